"""Lattice kernels shared by the solvers.

All kernels work on an *extended* position vector ``ext`` holding the
represented sites plus one neighbour on each side.  For a periodic state
the neighbours come from the wrap rule; for a window they are the clamped
asymptote values.  Bond ``j`` joins ``ext[j]`` and ``ext[j+1]``.
"""

from __future__ import annotations

import numpy as np

from .configs import PeriodicConfiguration, WindowConfiguration


def extend_periodic(x: np.ndarray, p: int) -> np.ndarray:
    return np.concatenate(([x[-1] - p], x, [x[0] + p]))


def extend_window(values: np.ndarray, w: WindowConfiguration) -> np.ndarray:
    return np.concatenate(([w.left_asym.at(w.l - 1)], values, [w.right_asym.at(w.r + 1)]))


def extended(x) -> np.ndarray:
    if isinstance(x, PeriodicConfiguration):
        return extend_periodic(x.x, x.p)
    if isinstance(x, WindowConfiguration):
        return extend_window(x.values, x)
    raise TypeError(f"unsupported configuration {type(x).__name__}")


def velocity(ext: np.ndarray, E) -> np.ndarray:
    """Gradient-flow velocity ``-h2(x_{n-1},x_n) - h1(x_n,x_{n+1})`` at the
    interior sites of ``ext`` (the tilt is inside ``E``)."""
    d = E.eval(ext[:-1], ext[1:])
    return -d.h2[:-1] - d.h1[1:]


def hessian_bands(ext: np.ndarray, E):
    """Diagonal and super-diagonal of ``D^2 W`` at the interior sites.

    ``diag[n] = h22(x_{n-1},x_n) + h11(x_n,x_{n+1})`` and
    ``off[n] = h12(x_n,x_{n+1})`` couples site ``n`` to ``n+1``; the last
    entry of ``off`` is the coupling across the right edge.
    """
    d = E.eval(ext[:-1], ext[1:])
    diag = d.h22[:-1] + d.h11[1:]
    off = d.h12[1:]
    return diag, off


def periodic_hessian(x: np.ndarray, p: int, E) -> np.ndarray:
    """Dense cyclic ``D^2 W_{p,q}``; corner terms wrap around and for q=2
    the two couplings add up."""
    q = x.size
    diag, off = hessian_bands(extend_periodic(x, p), E)
    H = np.diag(diag.astype(float))
    for n in range(q):
        m = (n + 1) % q
        if m == n:
            H[n, n] += 2 * off[n]
        else:
            H[n, m] += off[n]
            H[m, n] += off[n]
    return H


def periodic_energy(x: np.ndarray, p: int, E) -> float:
    """``W_{p,q}(x) = sum_{n<q} h_F(x_n, x_{n+1})``."""
    nxt = np.append(x[1:], x[0] + p)
    return float(np.sum(E.energy(x, nxt)))


def spacings(ext: np.ndarray) -> np.ndarray:
    return np.diff(ext)
