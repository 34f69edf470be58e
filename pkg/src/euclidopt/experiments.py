"""Monte Carlo harness for scaling and concentration measurements.

Every replicate is a pure function of ``(config, n, replicate)``: clouds are
drawn from ``ReplicateSeed(master_seed, stream)`` with ``stream = n_index *
replicates + replicate``. Replicates may run in any order and in any number
of worker processes; results are keyed by ``(n, replicate)`` and merged in
key order, so outputs are bit-identical for any worker count.

Costs of q-energies are normalized by the energy scale ``n**(1 - q/d)``.
"""

import configparser
import csv
import io
import logging
import math
import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from .btsp import alternating_nearest_neighbor_tour, alternating_two_opt_descent, btsp_edge_lengths
from .geometry import DensityConfig, ReplicateSeed, check_density_event, sample_uniform_clouds
from .matching import matching_edge_lengths, solve_matching_exact
from .tsp import nearest_neighbor_tour, tour_edge_lengths, two_opt_descent

logger = logging.getLogger(__name__)

__all__ = [
    "PROBLEMS",
    "ExperimentConfig",
    "ReplicateRecord",
    "SlopeFit",
    "ExperimentResult",
    "PRESETS",
    "energy_scale",
    "loglog_fit",
    "run_replicate",
    "collect_records",
    "summarize",
    "run_transfer_experiment",
    "run_maxedge_experiment",
    "run_concentration_experiment",
    "run_density_experiment",
    "records_csv",
    "summary_csv",
    "load_config",
    "preset",
    "RECORD_HEADER",
    "SUMMARY_HEADER",
]

PROBLEMS = ("matching", "tsp", "btsp")
DEFAULT_N_GRID = (128, 256, 512, 1024, 2048, 4096)

RECORD_HEADER = (
    "problem", "d", "p", "q", "n", "replicate", "seed", "cost", "normalized",
    "max_edge", "event_A", "event_B", "solver",
)
SUMMARY_HEADER = (
    "problem", "d", "p", "q", "n", "replicates", "mean_normalized",
    "std_normalized", "mean_cost", "std_cost", "mean_max_edge",
    "median_max_edge", "q90_max_edge", "freq_event_A", "freq_event_B", "solver",
)


def energy_scale(n, d, q):
    """``n**(1 - q/d)``, the order of the optimal q-cost for ``d >= 3``."""
    return float(n) ** (1.0 - q / d)


def _float_tuple(values):
    if isinstance(values, str):
        values = [v for v in values.replace(",", " ").split() if v]
    return tuple(float(v) for v in values)


def _int_tuple(values):
    if isinstance(values, str):
        values = [v for v in values.replace(",", " ").split() if v]
    return tuple(int(v) for v in values)


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration of one experiment.

    ``alpha`` defaults to ``0.9 * p / (p + d)`` and ``alpha_prime`` to
    ``alpha * (p + d) / p``, which couples the density exponent with the
    cost threshold ``p_cost <= n**(1 - alpha_prime * p / d)``. ``q_list``
    defaults to ``(p,)``.
    """

    problem: str = "matching"
    d: int = 3
    p: float = 1.0
    q_list: Tuple[float, ...] = ()
    n_grid: Tuple[int, ...] = DEFAULT_N_GRID
    replicates: int = 64
    master_seed: int = 0
    alpha: Optional[float] = None
    alpha_prime: Optional[float] = None
    density_grid: int = 8
    density_levels: int = 3

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        set_("d", int(self.d))
        set_("p", float(self.p))
        set_("replicates", int(self.replicates))
        set_("master_seed", int(self.master_seed))
        set_("n_grid", _int_tuple(self.n_grid))
        set_("q_list", _float_tuple(self.q_list) or (self.p,))
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if any(q < 1 for q in self.q_list):
            raise ValueError("every q must be >= 1")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be a nonempty strictly increasing list")
        min_n = {"matching": 1, "tsp": 3, "btsp": 2}[self.problem]
        if self.n_grid[0] < min_n:
            raise ValueError(f"{self.problem} needs n >= {min_n}")
        if self.replicates < 2:
            raise ValueError("replicates must be >= 2 for variance estimates")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        alpha = self.alpha
        if alpha is None:
            alpha = 0.9 * self.p / (self.p + self.d)
        alpha_prime = self.alpha_prime
        if alpha_prime is None:
            alpha_prime = alpha * (self.p + self.d) / self.p
        set_("alpha", float(alpha))
        set_("alpha_prime", float(alpha_prime))
        if not 0 < self.alpha < 1 or not 0 < self.alpha_prime < 1:
            raise ValueError(
                f"alpha and alpha_prime must lie in (0, 1), got {self.alpha}, {self.alpha_prime}"
            )
        DensityConfig(self.alpha, self.density_grid, self.density_levels)

    @property
    def solver_label(self):
        return "exact" if self.problem == "matching" else "2-opt-stable"

    @property
    def density(self):
        return DensityConfig(self.alpha, self.density_grid, self.density_levels)

    def describe(self):
        """``key = value`` lines of the resolved configuration."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            out.append(f"{f.name} = {v}")
        out.append(f"solver = {self.solver_label}")
        return "\n".join(out)


@dataclass(frozen=True)
class ReplicateRecord:
    problem: str
    d: int
    p: float
    n: int
    replicate: int
    seed: int
    p_cost: float
    q_costs: Dict[float, float]
    normalized_q_costs: Dict[float, float]
    max_edge: float
    event_A: bool
    event_B: bool
    solver: str


def _edge_lengths(cfg, n, seed):
    if cfg.problem == "matching":
        X, Y = sample_uniform_clouds(n, cfg.d, seed, 2)
        sol = solve_matching_exact(X, Y, cfg.p)
        return X, matching_edge_lengths(X, Y, sol.sigma)
    if cfg.problem == "tsp":
        (X,) = sample_uniform_clouds(n, cfg.d, seed, 1)
        sol = two_opt_descent(X, nearest_neighbor_tour(X), cfg.p)
        return X, tour_edge_lengths(X, sol.order)
    X, Y = sample_uniform_clouds(n, cfg.d, seed, 2)
    sol = alternating_two_opt_descent(X, Y, alternating_nearest_neighbor_tour(X, Y), cfg.p)
    return X, btsp_edge_lengths(X, Y, sol.tour)


def run_replicate(cfg: ExperimentConfig, n_index: int, replicate: int) -> ReplicateRecord:
    """Sample, optimize and measure one ``(n, replicate)`` cell."""
    n = cfg.n_grid[n_index]
    seed = ReplicateSeed(cfg.master_seed, n_index * cfg.replicates + replicate)
    X, lengths = _edge_lengths(cfg, n, seed)
    p_cost = float(np.sum(lengths**cfg.p))
    q_costs = {q: float(np.sum(lengths**q)) for q in cfg.q_list}
    normalized = {q: c / energy_scale(n, cfg.d, q) for q, c in q_costs.items()}
    return ReplicateRecord(
        problem=cfg.problem,
        d=cfg.d,
        p=cfg.p,
        n=n,
        replicate=replicate,
        seed=seed.derived_seed,
        p_cost=p_cost,
        q_costs=q_costs,
        normalized_q_costs=normalized,
        max_edge=float(lengths.max()),
        event_A=check_density_event(X, cfg.density).event_holds,
        event_B=bool(p_cost <= float(n) ** (1.0 - cfg.alpha_prime * cfg.p / cfg.d)),
        solver=cfg.solver_label,
    )


def _run_task(args):
    cfg, n_index, replicate = args
    return (n_index, replicate), run_replicate(cfg, n_index, replicate)


def _density_task(args):
    cfg, n_index, replicate, sampler = args
    n = cfg.n_grid[n_index]
    seed = ReplicateSeed(cfg.master_seed, n_index * cfg.replicates + replicate)
    cloud = sampler(n, cfg.d, seed)
    return (n_index, replicate), bool(check_density_event(cloud, cfg.density).event_holds)


def _map(fn, tasks, workers):
    if workers <= 1:
        results = [fn(t) for t in tasks]
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(fn, tasks, chunksize=1))
    results.sort(key=lambda kv: kv[0])
    return [v for _, v in results]


def collect_records(cfg: ExperimentConfig, workers: int = 1) -> List[ReplicateRecord]:
    """All replicate records, ordered by ``(n, replicate)``."""
    tasks = [(cfg, i, r) for i in range(len(cfg.n_grid)) for r in range(cfg.replicates)]
    # Largest instances first keeps the pool busy until the end.
    tasks.sort(key=lambda t: -cfg.n_grid[t[1]])
    return _map(_run_task, tasks, workers)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual_std: float
    num_points: int
    slope_stderr: float = 0.0


def loglog_fit(xs, ys) -> SlopeFit:
    """Ordinary least squares of ``log y`` on ``log x``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D of equal length")
    if xs.size < 2:
        raise ValueError("need at least two points")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(xs) & np.isfinite(ys)):
        raise ValueError("log-log fit needs finite positive values")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(lx) == 0:
        raise ValueError("xs must not all be equal")
    res = stats.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    dof = xs.size - 2
    rstd = float(np.sqrt(resid @ resid / dof)) if dof > 0 else 0.0
    return SlopeFit(float(res.slope), float(res.intercept), rstd, int(xs.size),
                    float(res.stderr) if dof > 0 else 0.0)


def _std(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def summarize(records: List[ReplicateRecord]) -> List[dict]:
    """Per ``(problem, n, q)`` aggregates in record order."""
    groups = {}
    for rec in records:
        for q in rec.q_costs:
            groups.setdefault((rec.problem, rec.n, q), []).append(rec)
    rows = []
    for (problem, n, q), recs in sorted(groups.items(), key=lambda kv: (PROBLEMS.index(kv[0][0]), kv[0][1], kv[0][2])):
        norm = np.array([r.normalized_q_costs[q] for r in recs])
        cost = np.array([r.q_costs[q] for r in recs])
        me = np.array([r.max_edge for r in recs])
        rows.append({
            "problem": problem,
            "d": recs[0].d,
            "p": recs[0].p,
            "q": q,
            "n": n,
            "replicates": len(recs),
            "mean_normalized": float(np.mean(norm)),
            "std_normalized": _std(norm),
            "mean_cost": float(np.mean(cost)),
            "std_cost": _std(cost),
            "mean_max_edge": float(np.mean(me)),
            "median_max_edge": float(np.median(me)),
            "q90_max_edge": float(np.quantile(me, 0.9)),
            "freq_event_A": float(np.mean([r.event_A for r in recs])),
            "freq_event_B": float(np.mean([r.event_B for r in recs])),
            "solver": recs[0].solver,
        })
    return rows


@dataclass
class ExperimentResult:
    """Records, per-``(n, q)`` summary rows and named fits or flags."""

    kind: str
    configs: List[ExperimentConfig]
    records: List[ReplicateRecord] = field(repr=False, default_factory=list)
    summary: List[dict] = field(default_factory=list)
    fits: Dict[str, SlopeFit] = field(default_factory=dict)
    flatness: Dict[str, float] = field(default_factory=dict)
    frequencies: Dict[int, float] = field(default_factory=dict)


def _rows_for(summary, problem, q):
    return [r for r in summary if r["problem"] == problem and r["q"] == q]


def run_transfer_experiment(cfg, workers=1, records=None) -> ExperimentResult:
    """q-energies of the p-optimizer, normalized by ``n**(1 - q/d)``.

    For each q, ``flatness`` holds max/min of the mean normalized cost over
    the grid and ``fits`` the log-log slope of that mean against n.
    """
    cfgs = list(cfg) if isinstance(cfg, (list, tuple)) else [cfg]
    if records is None:
        records = [rec for c in cfgs for rec in collect_records(c, workers)]
    summary = summarize(records)
    res = ExperimentResult("transfer", cfgs, records, summary)
    for c in cfgs:
        for q in c.q_list:
            rows = _rows_for(summary, c.problem, q)
            means = np.array([r["mean_normalized"] for r in rows])
            key = f"{c.problem}:q={q:g}"
            res.flatness[key] = float(means.max() / means.min()) if means.min() > 0 else math.inf
            if len(rows) >= 2 and means.min() > 0:
                res.fits[key] = loglog_fit([r["n"] for r in rows], means)
    return res


def run_maxedge_experiment(cfg, workers=1, records=None) -> ExperimentResult:
    """Longest optimizer edge against n, with event A/B frequencies."""
    if records is None:
        records = collect_records(cfg, workers)
    summary = summarize(records)
    res = ExperimentResult("maxedge", [cfg], records, summary)
    rows = _rows_for(summary, cfg.problem, cfg.q_list[0])
    if len(rows) >= 2:
        res.fits["max_edge"] = loglog_fit([r["n"] for r in rows], [r["mean_max_edge"] for r in rows])
    res.frequencies = {r["n"]: r["freq_event_A"] for r in rows}
    return res


def run_concentration_experiment(cfg, workers=1, records=None) -> ExperimentResult:
    """Sample std of ``p_cost / n**(1 - p/d)`` against n."""
    if cfg.replicates < 30:
        warnings.warn("fewer than 30 replicates: std estimates are noisy", stacklevel=2)
    if records is None:
        records = collect_records(cfg, workers)
    res = ExperimentResult("concentration", [cfg], records, summarize(records))
    ns, stds = [], []
    rows = []
    for n in cfg.n_grid:
        vals = np.array([r.p_cost / energy_scale(n, cfg.d, cfg.p) for r in records if r.n == n])
        ns.append(n)
        stds.append(_std(vals))
        rows.append((n, float(np.mean(vals)), stds[-1]))
    res.flatness = {f"n={n}": s for n, _, s in rows}
    if len(ns) >= 2 and min(stds) > 0:
        res.fits["std_normalized_cost"] = loglog_fit(ns, stds)
    res.frequencies = {n: m for n, m, _ in rows}
    return res


def _uniform_sampler(n, d, seed):
    return sample_uniform_clouds(n, d, seed, 1)[0]


def run_density_experiment(cfg, workers=1, sampler=None) -> ExperimentResult:
    """Frequency of the discretized density event per n.

    ``sampler(n, d, seed)`` replaces the uniform cloud (the default draws the
    same X cloud as the optimization experiments).
    """
    sampler = sampler or _uniform_sampler
    tasks = [(cfg, i, r, sampler) for i in range(len(cfg.n_grid)) for r in range(cfg.replicates)]
    flags = _map(_density_task, tasks, workers)
    res = ExperimentResult("density", [cfg])
    for i, n in enumerate(cfg.n_grid):
        res.frequencies[n] = float(np.mean(flags[i * cfg.replicates:(i + 1) * cfg.replicates]))
    return res


# -- CSV output ---------------------------------------------------------------


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(records) -> str:
    """One row per ``(record, q)`` with the fixed record header."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        for q, c in r.q_costs.items():
            w.writerow([_fmt(v) for v in (
                r.problem, r.d, r.p, q, r.n, r.replicate, r.seed, c,
                r.normalized_q_costs[q], r.max_edge, r.event_A, r.event_B, r.solver,
            )])
    return buf.getvalue()


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in SUMMARY_HEADER])
    return buf.getvalue()


# -- configuration files and presets ------------------------------------------

_CONFIG_KEYS = {f.name for f in fields(ExperimentConfig)}
_INT_KEYS = ("d", "replicates", "master_seed", "density_grid", "density_levels")
_FLOAT_KEYS = ("p", "alpha", "alpha_prime")


def load_config(path=None, overrides=None, base=None) -> ExperimentConfig:
    """Build a config from layered key-value sources.

    ``base`` (e.g. a preset's keyword dict) is overlaid by the
    ``[experiment]`` section of the INI file at ``path``, which is overlaid
    by ``overrides`` (e.g. CLI flags; ``None`` entries are ignored). Keys
    are the :class:`ExperimentConfig` field names; list values are comma or
    space separated. Derived exponents are recomputed from the final
    ``(p, d)`` unless some layer sets them.
    """
    values = dict(base or {})
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        with open(path) as fh:
            parser.read_file(fh)
        if not parser.has_section("experiment"):
            raise ValueError(f"{path}: missing [experiment] section")
        for key, val in parser.items("experiment"):
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}: unknown key {key!r}")
            values[key] = val
    for key, val in (overrides or {}).items():
        if val is not None:
            if key not in _CONFIG_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = val
    try:
        for key in _FLOAT_KEYS:
            if isinstance(values.get(key), str):
                values[key] = float(values[key])
        for key in _INT_KEYS:
            if isinstance(values.get(key), str):
                values[key] = int(values[key])
    except ValueError as exc:
        raise ValueError(f"malformed config value: {exc}") from exc
    return ExperimentConfig(**values)


_CRITICAL = dict(d=4, p=8.0, q_list=(8, 9, 10), n_grid=(64, 128, 256, 512, 1024))

# Keyword dicts rather than configs, so overrides of (p, d) re-derive alpha.
PRESETS: Dict[str, List[dict]] = {
    "transfer-d3-p1": [dict(problem="matching", d=3, p=1.0, q_list=(1, 2, 3))],
    "transfer-d4-p4": [dict(problem="matching", d=4, p=4.0, q_list=(4, 5, 6))],
    "tsp-transfer-d3-p1": [dict(problem="tsp", d=3, p=1.0, q_list=(1, 2, 3))],
    "maxedge-d3-p2": [dict(problem="matching", d=3, p=2.0)],
    "concentration-d3-p1": [dict(problem="matching", d=3, p=1.0)],
    "density-d3": [dict(problem="matching", d=3, p=1.0, n_grid=(4096,), replicates=100,
                        alpha=0.5, alpha_prime=0.9)],
    "critical": [dict(problem="matching", **_CRITICAL), dict(problem="tsp", **_CRITICAL)],
}


def preset(name) -> List[ExperimentConfig]:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return [ExperimentConfig(**kw) for kw in PRESETS[name]]
