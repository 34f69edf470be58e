"""Static SVG plots of experiment summaries."""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import SUMMARY_HEADER  # noqa: E402

__all__ = ["read_summary_csv", "plot_summary"]


def read_summary_csv(path):
    """Rows of a summary CSV as dicts; raises ``ValueError`` on schema mismatch."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SUMMARY_HEADER:
            raise ValueError(f"{path}: not a summary CSV (header mismatch)")
        rows = [dict(zip(header, r)) for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: summary has no rows")
    try:
        for r in rows:
            r["n"] = int(r["n"])
            r["q"] = float(r["q"])
            r["mean_normalized"] = float(r["mean_normalized"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed row: {exc}") from exc
    return rows


def plot_summary(rows, out_path):
    """One polyline per ``(problem, q)``: mean normalized cost against n.

    The SVG is reproducible: fixed hash salt for element ids and no date
    metadata.
    """
    series = {}
    for r in rows:
        series.setdefault((r["problem"], r["q"]), []).append((r["n"], r["mean_normalized"]))
    with plt.rc_context({"svg.hashsalt": "euclidopt", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for (problem, q), pts in series.items():
            pts.sort()
            ns, ys = zip(*pts)
            ax.plot(ns, ys, marker="o", label=f"{problem}, q={q:g}")
        ax.set_xscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("cost / n^{1−q/d}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return len(series)
