"""Command-line interface.

Subcommands: ``sample``, ``solve``, ``verify``, ``experiment``, ``plot``.
Exit codes: 0 success, 1 verification failure, 2 usage or input error.
The resolved configuration is printed to stderr before any result.
"""

import argparse
import os
import sys

from . import btsp, experiments, geometry, matching, tsp
from .plotting import plot_summary, read_summary_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CHECKS = ("two-opt", "edge-energy", "density")
KINDS = ("transfer", "maxedge", "concentration", "density", "critical")
BTSP_EXACT_MAX_N = 6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fmt(x):
    return f"{x:.12g}"


def _emit_config(**items):
    for k, v in items.items():
        print(f"# {k} = {v}", file=sys.stderr)


def _clouds(args, problem):
    paths = args.clouds
    need = 1 if problem == "tsp" else 2
    if len(paths) != need:
        raise UsageError(f"{problem} needs {need} cloud file(s), got {len(paths)}")
    clouds = [geometry.read_cloud(p) for p in paths]
    if need == 2 and clouds[0].shape != clouds[1].shape:
        raise UsageError("X and Y clouds must have the same shape")
    return clouds


# -- sample ---------------------------------------------------------------------


def cmd_sample(args):
    seed = geometry.ReplicateSeed(args.seed, args.stream)
    _emit_config(n=args.n, d=args.d, seed=args.seed, stream=args.stream,
                 derived_seed=seed.derived_seed, out=", ".join(args.out))
    clouds = geometry.sample_uniform_clouds(args.n, args.d, seed, count=len(args.out))
    for path, cloud in zip(args.out, clouds):
        geometry.write_cloud(path, cloud)
    return EXIT_OK


# -- solve ----------------------------------------------------------------------


def cmd_solve(args):
    clouds = _clouds(args, args.problem)
    n = clouds[0].shape[0]
    if args.problem == "matching":
        method = "exact (linear assignment)"
    elif args.problem == "tsp":
        if args.exact and n > tsp.HELD_KARP_MAX_N:
            raise UsageError(f"--exact tsp needs n <= {tsp.HELD_KARP_MAX_N}, got {n}")
        method = "exact (Held-Karp)" if args.exact else "2-opt-stable"
    else:
        if args.exact and n > BTSP_EXACT_MAX_N:
            raise UsageError(f"--exact btsp needs n <= {BTSP_EXACT_MAX_N}, got {n}")
        method = "exact (enumeration)" if args.exact else "2-opt-stable"
    _emit_config(problem=args.problem, n=n, d=clouds[0].shape[1], p=args.p,
                 solver=method, out=args.out)

    if args.problem == "matching":
        sol = matching.solve_matching_exact(clouds[0], clouds[1], args.p)
        cost = sol.cost
        if args.out:
            matching.write_permutation(args.out, sol.sigma)
    elif args.problem == "tsp":
        (cloud,) = clouds
        if args.exact:
            sol = tsp.held_karp(cloud, args.p)
        else:
            sol = tsp.two_opt_descent(cloud, tsp.nearest_neighbor_tour(cloud), args.p)
        cost = sol.cost
        if args.out:
            tsp.write_tour(args.out, sol.order)
    else:
        X, Y = clouds
        if args.exact:
            sol = btsp.brute_force_btsp(X, Y, args.p)
        else:
            sol = btsp.alternating_two_opt_descent(
                X, Y, btsp.alternating_nearest_neighbor_tour(X, Y), args.p)
        cost = sol.cost
        if args.out:
            btsp.write_alternating_tour(args.out, sol.tour)
    print(_fmt(cost))
    return EXIT_OK


# -- verify ---------------------------------------------------------------------


def _line(ok, name, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


def _check_two_opt(problem, clouds, sol, p):
    if problem == "matching":
        bad = matching.verify_matching_two_opt(clouds[0], clouds[1], sol, p)
    elif problem == "tsp":
        bad = tsp.verify_tour_two_opt(clouds[0], sol, p)
    else:
        bad = btsp.verify_alternating_swap(clouds[0], clouds[1], sol, p)
    if not bad:
        return _line(True, "two-opt", "no improving pair")
    worst = max(bad, key=lambda t: abs(t[2]))
    return _line(False, "two-opt",
                 f"{len(bad)} violating pair(s), first ({bad[0][0]}, {bad[0][1]}), "
                 f"worst ({worst[0]}, {worst[1]}) by {_fmt(abs(worst[2]))}")


def _check_edge_energy(problem, clouds, sol, p):
    if p <= 1:
        print("SKIP edge-energy: requires p > 1")
        return True
    try:
        if problem == "matching":
            rep = matching.verify_local_edge_energy(clouds[0], clouds[1], sol, p)
        elif problem == "tsp":
            rep = tsp.verify_tsp_edge_energy(clouds[0], sol, p)
        else:
            rep = btsp.verify_btsp_edge_energy(clouds[0], clouds[1], sol, p)
    except ValueError as exc:
        return _line(False, "edge-energy", str(exc))
    ok = rep.holds and rep.pair_holds
    return _line(ok, "edge-energy",
                 f"worst slack {_fmt(rep.worst_slack)}, "
                 f"worst per-pair slack {_fmt(rep.worst_pair_slack)}")


def _check_density(cloud, alpha):
    rep = geometry.check_density_event(cloud, geometry.DensityConfig(alpha=alpha))
    detail = f"worst ratio {_fmt(rep.worst_ratio)} (needs >= 0.5)"
    if rep.witness is not None:
        center, radius, count = rep.witness
        detail += (f", witness center ({', '.join(_fmt(c) for c in center)}) "
                   f"radius {_fmt(radius)} count {count}")
    return _line(rep.event_holds, "density", detail)


def _read_solution(problem, path, n):
    if problem == "matching":
        return matching.read_permutation(path, n)
    if problem == "tsp":
        return tsp.read_tour(path, n)
    return btsp.read_alternating_tour(path, n)


def cmd_verify(args):
    clouds = _clouds(args, args.problem)
    n = clouds[0].shape[0]
    checks = args.checks.split(",") if args.checks else []
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise UsageError(f"unknown check(s): {', '.join(sorted(unknown))}")
    needs_solution = {"two-opt", "edge-energy"} & set(checks)
    if needs_solution and not args.solution:
        raise UsageError(f"check(s) {', '.join(sorted(needs_solution))} need --solution")
    _emit_config(problem=args.problem, n=n, d=clouds[0].shape[1], p=args.p,
                 checks=",".join(checks) or "(none)", alpha=args.alpha,
                 solution=args.solution)
    sol = _read_solution(args.problem, args.solution, n) if args.solution else None

    if args.recount:
        print(f"n = {n}")
    ok = True
    for check in checks:
        if check == "two-opt":
            ok &= _check_two_opt(args.problem, clouds, sol, args.p)
        elif check == "edge-energy":
            ok &= _check_edge_energy(args.problem, clouds, sol, args.p)
        else:
            ok &= _check_density(clouds[0], args.alpha)
    return EXIT_OK if ok else EXIT_FAIL


# -- experiment -----------------------------------------------------------------

_FLAG_KEYS = {
    "problem": "problem", "d": "d", "p": "p", "q": "q_list", "n_grid": "n_grid",
    "replicates": "replicates", "seed": "master_seed", "alpha": "alpha",
    "alpha_prime": "alpha_prime", "density_grid": "density_grid",
    "density_levels": "density_levels",
}


def _experiment_configs(args):
    overrides = {key: getattr(args, flag) for flag, key in _FLAG_KEYS.items()}
    name = args.preset or ("critical" if args.kind == "critical" else None)
    bases = experiments.PRESETS[name] if name else [{}]
    return [experiments.load_config(args.config, overrides, base) for base in bases]


def _write(out_dir, name, text):
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def cmd_experiment(args):
    if args.preset and args.preset not in experiments.PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; choose from "
                         f"{', '.join(sorted(experiments.PRESETS))}")
    cfgs = _experiment_configs(args)
    if args.kind != "transfer" and args.kind != "critical" and len(cfgs) != 1:
        raise UsageError(f"{args.kind} runs a single configuration")
    if args.workers < 1:
        raise UsageError("--workers must be positive")
    for cfg in cfgs:
        print(f"# [{cfg.problem}]", file=sys.stderr)
        for line in cfg.describe().splitlines():
            print(f"# {line}", file=sys.stderr)
    _emit_config(kind=args.kind, workers=args.workers, out=args.out)
    os.makedirs(args.out, exist_ok=True)

    if args.kind == "density":
        res = experiments.run_density_experiment(cfgs[0], args.workers)
        lines = ["n,replicates,freq_event_A"]
        lines += [f"{n},{cfgs[0].replicates},{f!r}" for n, f in res.frequencies.items()]
        _write(args.out, "density.csv", "\n".join(lines) + "\n")
        print(f"{'n':>8}  freq_event_A")
        for n, f in res.frequencies.items():
            print(f"{n:>8}  {_fmt(f)}")
        return EXIT_OK

    if args.kind in ("transfer", "critical"):
        res = experiments.run_transfer_experiment(cfgs, args.workers)
    elif args.kind == "maxedge":
        res = experiments.run_maxedge_experiment(cfgs[0], args.workers)
    else:
        res = experiments.run_concentration_experiment(cfgs[0], args.workers)
    _write(args.out, "records.csv", experiments.records_csv(res.records))
    _write(args.out, "summary.csv", experiments.summary_csv(res.summary))

    print(f"{'problem':>9} {'q':>5} {'n':>6} {'mean_norm':>14} {'std_norm':>14} {'max_edge':>14}")
    for r in res.summary:
        print(f"{r['problem']:>9} {r['q']:>5g} {r['n']:>6} {_fmt(r['mean_normalized']):>14} "
              f"{_fmt(r['std_normalized']):>14} {_fmt(r['mean_max_edge']):>14}")
    for key, val in res.flatness.items():
        if args.kind in ("transfer", "critical"):
            print(f"flatness {key}: max/min = {_fmt(val)}")
    for key, fit in res.fits.items():
        print(f"slope {key}: {_fmt(fit.slope)} (residual std {_fmt(fit.residual_std)}, "
              f"{fit.num_points} points)")
    return EXIT_OK


# -- plot -----------------------------------------------------------------------


def cmd_plot(args):
    _emit_config(summary=args.summary, out=args.out)
    rows = read_summary_csv(args.summary)
    k = plot_summary(rows, args.out)
    print(f"wrote {args.out} ({k} series)")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="euclidopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="draw uniform clouds in [0, 1)^d")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--seed", type=int, default=0, help="master seed")
    s.add_argument("--stream", type=int, default=0,
                   help="replicate stream; experiment clouds use n_index*replicates+replicate")
    s.add_argument("--out", nargs="+", required=True,
                   help="one output path per cloud, drawn in order from one stream")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("solve", help="solve matching / tsp / btsp")
    s.add_argument("problem", choices=experiments.PROBLEMS)
    s.add_argument("clouds", nargs="+", help="cloud file(s): X (and Y)")
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--exact", action="store_true",
                   help="exact solver (tsp: n <= 16, btsp: n <= 6; matching is always exact)")
    s.add_argument("--out", help="solution file")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("verify", help="check a solution or cloud")
    s.add_argument("problem", choices=experiments.PROBLEMS)
    s.add_argument("clouds", nargs="+")
    s.add_argument("--solution")
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--checks", default=None,
                   help=f"comma-separated subset of {','.join(CHECKS)} "
                        "(default: two-opt,edge-energy with --solution, else density)")
    s.add_argument("--alpha", type=float, default=0.5, help="density exponent")
    s.add_argument("--recount", action="store_true", help="print the number of points")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("--config", help="INI file with an [experiment] section")
    s.add_argument("--preset", help=f"one of {', '.join(sorted(experiments.PRESETS))}")
    s.add_argument("--out", default="results")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--problem", choices=experiments.PROBLEMS)
    s.add_argument("--d", type=int)
    s.add_argument("--p", type=float)
    s.add_argument("--q", help="comma-separated q list")
    s.add_argument("--n-grid", dest="n_grid", help="comma-separated n values")
    s.add_argument("--replicates", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--alpha-prime", dest="alpha_prime", type=float)
    s.add_argument("--density-grid", dest="density_grid", type=int)
    s.add_argument("--density-levels", dest="density_levels", type=int)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("plot", help="SVG of a summary CSV")
    s.add_argument("summary")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "verify" and args.checks is None:
            args.checks = "two-opt,edge-energy" if args.solution else "density"
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
