"""PNG renderings of the figure tables (optional; CSV stays the primary output)."""

from __future__ import annotations

import os
import tempfile
from collections import defaultdict
from typing import Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig: Figure, path: str | os.PathLike) -> None:
    FigureCanvasAgg(fig)
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=120)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def plot_figure1(rows: Sequence[tuple], path: str | os.PathLike) -> None:
    """``T(2, N, k)`` against k, one line per N. Rows follow the threshold CSV layout."""
    series = defaultdict(list)
    for d, n, k, _, _, value in rows:
        series[n].append((k, value))
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for n, pts in sorted(series.items()):
        ks, vs = zip(*pts)
        ax.plot(ks, vs, marker="o", label=f"N={n}")
    ax.axhline(2 / 3, color="grey", lw=0.8, ls="--")
    ax.set_xlabel("k")
    ax.set_ylabel("T(2, N, k)")
    ax.legend()
    _save(fig, path)


def plot_figure2(rows: Sequence[dict], path: str | os.PathLike) -> None:
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for spec, label in (("half", "m=N/2"), ("twothirds", "m=2N/3"), ("nminus1", "m=N-1")):
        ns = [r["N"] for r in rows]
        ax.plot(ns, [r[spec] for r in rows], marker="o", label=label)
    ax.set_xlabel("N")
    ax.set_ylabel("T_e(2, N, m)")
    ax.legend()
    _save(fig, path)


def plot_figure3(rows: Sequence[dict], path: str | os.PathLike) -> None:
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ns = [r["N"] for r in rows]
    ax.plot(ns, [r["p_hi"] for r in rows], "o", label="k = ceil(N/2)+1")
    ax.plot(ns, [r["p_lo"] for r in rows], "s", label="k = ceil(N/2)")
    ax.plot(ns, [r["gme"] for r in rows], "-", color="black", label="GME bound")
    ax.set_xlabel("N")
    ax.set_ylabel("p")
    ax.legend()
    _save(fig, path)
