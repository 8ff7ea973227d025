"""CSV and SVG writers with byte-stable formatting."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

FLOAT_FORMAT = "%.12e"


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    fv = float(v)
    if math.isnan(fv):
        return "nan"
    if math.isinf(fv):
        return "inf" if fv > 0 else "-inf"
    return FLOAT_FORMAT % fv


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write ``rows`` under ``header`` with fixed float formatting and ``\\n`` line ends."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def write_svg(path, series, xlabel: str, ylabel: str, title: str = "", logx=False, logy=False,
              scatter=False) -> Path:
    """Line (or scatter) chart of ``series = [(label, xs, ys), ...]`` as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "mrpencil", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, xs, ys in series:
            if scatter:
                ax.scatter(xs, ys, s=14, label=label)
            else:
                ax.plot(xs, ys, marker="o", ms=3, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
