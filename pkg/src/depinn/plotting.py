"""Matplotlib figures for CLI reports.

Figures are built on a bare ``Figure`` with the Agg canvas so no global
pyplot state is touched.  SVG output is made reproducible by fixing the
hash salt and dropping the date stamp.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "depinn",
    "svg.fonttype": "none",
}


def _new(figsize=(5.0, 3.6)):
    fig = Figure(figsize=figsize)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def save(fig, path) -> Path:
    """Write ``fig`` to ``path``; the suffix picks the format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if path.suffix == ".svg" else None
    with matplotlib.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, metadata=meta)
    return path


def aubry_figure(configs, path, periods: int = 3, labels=None) -> Path:
    """Aubry diagram ``n -> x_n`` for periodic or window configurations."""
    from .configs import PeriodicConfiguration

    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        for i, c in enumerate(configs):
            if isinstance(c, PeriodicConfiguration):
                n = np.arange(-periods * c.q, periods * c.q + 1)
            else:
                n = c.indices
            lab = labels[i] if labels else None
            ax.plot(n, c.at(n), ".-", ms=3, label=lab)
        ax.set_xlabel("site n")
        ax.set_ylabel("x_n")
        if labels:
            ax.legend(frameon=False)
    return save(fig, path)


def velocity_figure(F, v, path, failed=None) -> Path:
    """Average velocity against tilt from a scan."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        ax.plot(F, v, "o-", ms=3)
        if failed is not None and len(failed):
            ax.plot(failed, np.zeros(len(failed)), "rx", label="failed")
            ax.legend(frameon=False)
        ax.set_xlabel("F")
        ax.set_ylabel("average velocity")
    return save(fig, path)


def fd_figure(omega, fd, path, limit=None, center=None) -> Path:
    """Depinning force samples against mean spacing."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        ax.plot(omega, fd, "o", ms=3)
        if limit is not None:
            ax.axhline(limit, ls="--", color="C1", label="one-sided limit")
        if center is not None:
            ax.axhline(center, ls=":", color="C2", label="F_d at centre")
        if limit is not None or center is not None:
            ax.legend(frameon=False)
        ax.set_xlabel("mean spacing")
        ax.set_ylabel("F_d")
    return save(fig, path)


def manifold_figure(arcs, path, orbits=(), labels=None) -> Path:
    """Invariant manifold arcs on the cylinder."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _new((5.0, 4.0))
        for i, arc in enumerate(arcs):
            lab = labels[i] if labels else getattr(arc, "branch", None)
            ax.plot(arc.points[:, 0], arc.points[:, 1], lw=0.8, label=lab)
        for o in orbits:
            pts = np.asarray(o.points)
            ax.plot(pts[:, 0], pts[:, 1], "ko", ms=3)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.legend(frameon=False, fontsize=7)
    return save(fig, path)


def ioc_figure(samples, path, catalog=None) -> Path:
    """Ordered circles projected on ``(x_0, x_1)`` with catalog points."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _new((4.5, 4.5))
        for smp in samples:
            c = np.asarray(smp.configs)
            ax.plot(c[:, 0], c[:, 1], lw=0.9, label=smp.label)
        if catalog is not None:
            marks = {0: "o", 1: "^", 2: "s"}
            for e in catalog:
                ax.plot(e.config.x[0], e.config.at(1), marks.get(e.index, "x"), color="k", ms=4)
        ax.set_xlabel("x_0")
        ax.set_ylabel("x_1")
        ax.legend(frameon=False, fontsize=7)
    return save(fig, path)


def front_figure(times, states, path, first_site: int = 0) -> Path:
    """Space-time plot of a front window (one line per site)."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        states = np.asarray(states)
        step = max(1, states.shape[1] // 40)
        for j in range(0, states.shape[1], step):
            ax.plot(times, states[:, j], lw=0.6, color="C0")
        ax.set_xlabel("t")
        ax.set_ylabel("x_n(t)")
        ax.set_title(f"sites from {first_site}, every {step}", fontsize=8)
    return save(fig, path)


def path_figure(energies, path, label=None) -> Path:
    """Energy profile along a minimax path."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _new()
        ax.plot(np.arange(len(energies)), energies, "o-", ms=3, label=label)
        ax.set_xlabel("image")
        ax.set_ylabel("energy")
        if label:
            ax.legend(frameon=False)
    return save(fig, path)
