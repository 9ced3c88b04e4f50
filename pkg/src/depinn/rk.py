"""Embedded Dormand-Prince 5(4) stepper with per-site error control.

Written out by hand (rather than using ``scipy.integrate``) because the
flow solvers need to intervene between steps: band-escape checks,
recentring a travelling front and locating crossing events by re-stepping
from the start of an accepted step.
"""

from __future__ import annotations

import numpy as np

from .errors import StepUnderflow

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class DormandPrince:
    """Autonomous integrator for ``y' = f(y)``.

    ``tol`` bounds the local error of every component separately (the
    error norm is a max-norm).  ``f`` must accept and return 1-D arrays.
    """

    def __init__(self, f, y0, dt0=0.05, tol=1e-10, max_dt=1.0, t0=0.0, min_dt=1e-13):
        self.f = f
        self.y = np.array(y0, dtype=float)
        self.t = float(t0)
        self.dt = float(dt0)
        self.tol = float(tol)
        self.max_dt = float(max_dt)
        self.min_dt = float(min_dt)
        self.fy = f(self.y)
        self.n_steps = 0
        self.n_rejected = 0

    def _stages(self, y, h, fy):
        k = [fy]
        for i in range(1, 7):
            acc = y.copy()
            for a, kj in zip(_A[i], k):
                if a:
                    acc += h * a * kj
            k.append(self.f(acc))
        return k

    def trial(self, y, h, fy=None):
        """One fifth-order step of length ``h`` from ``y`` without control."""
        if fy is None:
            fy = self.f(y)
        k = self._stages(y, h, fy)
        return y + h * sum(b * kj for b, kj in zip(_B5, k) if b)

    def step(self):
        """Take one accepted step; returns the state before the step."""
        y0, t0, f0 = self.y, self.t, self.fy
        h = min(self.dt, self.max_dt)
        while True:
            k = self._stages(y0, h, f0)
            y1 = y0 + h * sum(b * kj for b, kj in zip(_B5, k) if b)
            err = h * sum(e * kj for e, kj in zip(_E, k))
            en = float(np.max(np.abs(err))) / self.tol
            if np.isfinite(en) and en <= 1.0:
                break
            self.n_rejected += 1
            fac = 0.2 if not np.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
            h *= fac
            if h < self.min_dt * max(1.0, abs(t0)):
                raise StepUnderflow("step size underflow", t=t0, dt=h)
        self.y, self.t, self.fy = y1, t0 + h, k[6]
        self.n_steps += 1
        grow = 5.0 if en == 0 else min(5.0, 0.9 * en ** -0.2)
        self.dt = min(self.max_dt, h * max(1.0, grow))
        self.last_h = h
        return t0, y0, f0

    def locate(self, t0, y0, f0, g, h, xtol=1e-13):
        """Find ``s`` in ``(0, h]`` with ``g(y(t0+s)) = 0`` by secant/bisection
        on the step length.  Assumes a sign change of ``g`` over the step."""
        from scipy.optimize import brentq

        s = brentq(lambda s: g(self.trial(y0, s, f0)) if s > 0 else g(y0), 0.0, h, xtol=xtol)
        return t0 + s, self.trial(y0, s, f0) if s > 0 else y0.copy()
