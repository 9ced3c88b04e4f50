"""Generating functions for Frenkel-Kontorova chains.

A generating function ``h(x, x')`` is the nearest-neighbour energy of a
chain.  It is periodic under the diagonal shift ``(x, x') -> (x+1, x'+1)``
and satisfies the twist condition ``h12 <= -c < 0`` on a band of spacings
``M <= x' - x <= N``.  Every generating function here evaluates to a
``Derivs`` bundle holding the value and the five derivatives that the
gradient flow, Newton solvers and twist map need.

The builtin catalog contains:

* ``StandardFK(k)``: ``(x'-x)^2/2 + k cos(2 pi x) / (4 pi^2)``.
* ``DoubleWell(k, b)``: quadratic coupling with a two-well on-site potential.
* ``Bistable(k, A1, A2, A3)``: quadratic coupling with a trigonometric
  potential having two unequal wells per period.
* ``Mane(a1, a2, b1, b2)``: ``(x' - g(x))^2 / 2`` with a piecewise circle
  map ``g`` that has hyperbolic fixed points at 0 and ``b``.

``TiltedEnergy`` adds the uniform force, ``h_F = h - F x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import ModelError

TWO_PI = 2.0 * math.pi
FD_STEP = 1e-5


class Derivs(NamedTuple):
    """Value and derivatives of ``h`` at ``(x, x')``."""

    h: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h11: np.ndarray
    h12: np.ndarray
    h22: np.ndarray


class GeneratingFunction:
    """Base class; subclasses implement :meth:`_eval`.

    Attributes
    ----------
    c : float
        Lower bound for ``-h12`` on the band.
    band : tuple of int
        Spacing band ``(M, N)``.
    analytic : bool
        False when derivatives come from finite differences.
    """

    name = "generic"
    c: float = 1.0
    band: tuple = (-3, 4)
    analytic = True

    def params(self) -> dict:
        return {}

    def _eval(self, x, xp) -> Derivs:
        raise NotImplementedError

    def eval(self, x, xp) -> Derivs:
        """Derivative bundle at ``(x, xp)``; arrays broadcast."""
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        return self._eval(x, xp)

    def energy(self, x, xp):
        return self.eval(x, xp).h

    def first(self, x, xp):
        d = self.eval(x, xp)
        return d.h1, d.h2

    def second(self, x, xp):
        d = self.eval(x, xp)
        return d.h11, d.h12, d.h22

    @property
    def base(self) -> "GeneratingFunction":
        return self

    @property
    def F(self) -> float:
        return 0.0

    def describe(self) -> dict:
        out = {"kind": self.name}
        out.update(self.params())
        return out

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _fd_derivs(fun, x, xp, step=FD_STEP) -> Derivs:
    """Central finite-difference bundle for a scalar function ``fun``."""
    s = step
    h = fun(x, xp)
    h1 = (fun(x + s, xp) - fun(x - s, xp)) / (2 * s)
    h2 = (fun(x, xp + s) - fun(x, xp - s)) / (2 * s)
    h11 = (fun(x + s, xp) - 2 * h + fun(x - s, xp)) / s**2
    h22 = (fun(x, xp + s) - 2 * h + fun(x, xp - s)) / s**2
    h12 = (fun(x + s, xp + s) - fun(x + s, xp - s) - fun(x - s, xp + s)
           + fun(x - s, xp - s)) / (4 * s * s)
    return Derivs(h, h1, h2, h11, h12, h22)


class FunctionH(GeneratingFunction):
    """User-supplied ``h`` with finite-difference derivatives.

    Parameters
    ----------
    fun : callable
        Vectorised ``fun(x, xp)``.
    c : float
        Declared twist bound.
    """

    name = "user"
    analytic = False

    def __init__(self, fun: Callable, c: float = 1.0, band=(-3, 4), step: float = FD_STEP):
        self.fun = fun
        self.c = float(c)
        self.band = tuple(band)
        self.step = step

    def _eval(self, x, xp):
        return _fd_derivs(self.fun, x, xp, self.step)


class StandardFK(GeneratingFunction):
    """The standard Frenkel-Kontorova energy with pinning strength ``k``."""

    name = "standard_fk"

    def __init__(self, k: float = 1.0, band=(-3, 4)):
        if not np.isfinite(k) or k < 0:
            raise ModelError(f"StandardFK needs k >= 0, got {k}", k=k)
        self.k = float(k)
        self.c = 1.0
        self.band = tuple(band)

    def params(self):
        return {"k": self.k}

    def _eval(self, x, xp):
        k = self.k
        d = xp - x
        s = np.sin(TWO_PI * x)
        co = np.cos(TWO_PI * x)
        one = np.ones_like(d)
        return Derivs(
            0.5 * d * d + k / (4 * math.pi**2) * co,
            -d - k / TWO_PI * s,
            d,
            1.0 - k * co,
            -one,
            one,
        )


class _QuadraticCoupling(GeneratingFunction):
    """``kc (x'-x)^2 / 2 + V(x)``; subclasses supply ``V`` and derivatives."""

    coupling = 1.0

    def potential(self, x):
        raise NotImplementedError

    def _eval(self, x, xp):
        k = self.coupling
        d = xp - x
        v, v1, v2 = self.potential(x)
        one = np.ones_like(d + v)
        return Derivs(0.5 * k * d * d + v, -k * d + v1, k * d, k + v2, -k * one, k * one)


class DoubleWell(_QuadraticCoupling):
    """Two-well on-site potential ``-cos(2 pi x)/(4 pi^2) + b cos(4 pi x)/(16 pi^2)``.

    For ``b > 1`` the potential has minima at ``+-c`` with ``cos(2 pi c) = 1/b``,
    a local maximum at 0 and the global maximum at 1/2.
    """

    name = "double_well"

    def __init__(self, k: float = 0.03, b: float = 2.0, band=(-3, 4)):
        if not (np.isfinite(k) and k > 0):
            raise ModelError(f"DoubleWell needs k > 0, got {k}", k=k)
        if not (np.isfinite(b) and b > 1):
            raise ModelError(f"DoubleWell needs b > 1, got {b}", b=b)
        self.k = float(k)
        self.b = float(b)
        self.coupling = self.k
        self.c = self.k
        self.band = tuple(band)

    def params(self):
        return {"k": self.k, "b": self.b}

    @property
    def well(self) -> float:
        """Position ``c`` of the right potential minimum."""
        return math.acos(1.0 / self.b) / TWO_PI

    def potential(self, x):
        b = self.b
        t = TWO_PI * x
        v = -np.cos(t) / (4 * math.pi**2) + b * np.cos(2 * t) / (16 * math.pi**2)
        v1 = np.sin(t) / TWO_PI - b * np.sin(2 * t) / (4 * math.pi)
        v2 = np.cos(t) - b * np.cos(2 * t)
        return v, v1, v2


class Bistable(_QuadraticCoupling):
    """``V(x) = A1 cos 2 pi x + A2 cos 4 pi x + A3 sin 2 pi x``.

    With ``A2 < 0`` and small ``A1 > 0`` there are two wells per period, the
    one near 0 shallower than the one near 1/2.  :meth:`level_force` returns
    the tilt at which the lower well and the next copy of the upper well
    have equal tilted energy.
    """

    name = "bistable"

    def __init__(self, k: float = 4.0, A1: float = 0.002, A2: float = -0.02,
                 A3: float = 0.0, band=(-3, 4)):
        for nm, v in (("k", k), ("A1", A1), ("A2", A2), ("A3", A3)):
            if not np.isfinite(v):
                raise ModelError(f"Bistable parameter {nm} is not finite", **{nm: v})
        if k <= 0:
            raise ModelError(f"Bistable needs k > 0, got {k}", k=k)
        self.k = float(k)
        self.A1, self.A2, self.A3 = float(A1), float(A2), float(A3)
        self.coupling = self.k
        self.c = self.k
        self.band = tuple(band)
        if len(self._minima(0.0)) < 2:
            raise ModelError("Bistable potential must have two wells per period",
                             A1=A1, A2=A2, A3=A3)

    def params(self):
        return {"k": self.k, "A1": self.A1, "A2": self.A2, "A3": self.A3}

    def potential(self, x):
        t = TWO_PI * x
        a1, a2, a3 = self.A1, self.A2, self.A3
        v = a1 * np.cos(t) + a2 * np.cos(2 * t) + a3 * np.sin(t)
        v1 = TWO_PI * (-a1 * np.sin(t) - 2 * a2 * np.sin(2 * t) + a3 * np.cos(t))
        v2 = TWO_PI**2 * (-a1 * np.cos(t) - 4 * a2 * np.cos(2 * t) - a3 * np.sin(t))
        return v, v1, v2

    def _minima(self, F):
        """Local minima of ``V - F x`` in [-1/4, 3/4), sorted."""
        grid = np.linspace(-0.25, 0.75, 801)
        g = self.potential(grid)[1] - F
        out = []
        for i in range(len(grid) - 1):
            if g[i] < 0 <= g[i + 1]:
                r = brentq(lambda s: float(self.potential(s)[1]) - F, grid[i], grid[i + 1],
                           xtol=1e-15)
                out.append(r)
        return sorted(out)

    def level_force(self):
        """Return ``(F, a, b)`` with wells ``a < b < a+1`` of ``V - F x`` such
        that ``b`` and ``a + 1`` are level.  ``a`` is the well near 0."""

        def gap(F):
            a, b = self._minima(F)
            return (float(self.potential(b)[0]) - F * b) - (float(self.potential(a + 1)[0]) - F * (a + 1))

        lo, hi = 0.0, 1e-6
        while gap(hi) < 0:
            hi *= 2
            if hi > 10:
                raise ModelError("no levelling force found for Bistable parameters")
        F = brentq(gap, lo, hi, xtol=1e-16, rtol=1e-15) if gap(lo) < 0 else 0.0
        a, b = self._minima(F)
        return F, a, b


class Mane(GeneratingFunction):
    """``h = (x' - g(x))^2 / 2`` with ``g(x) = x + f(x)``.

    ``f`` is 1-periodic, equal to ``-x/2`` near 0 (mod 1) and a cubic Hermite
    interpolant in between, passing through ``f(a1) = -b1`` and
    ``f(a2) = -b2`` with zero slope there.  ``g`` has fixed points 0 and
    ``b`` (the root of ``f`` in ``(a1, a2)``).  ``g`` is only C^1 at the
    knots, so second derivatives of ``h`` jump there.
    """

    name = "mane"

    def __init__(self, a1: float = 0.25, a2: float = 0.75, b1: float = 0.1,
                 b2: float = -0.1, band=(-3, 4)):
        if not (0 < a1 < a2 < 1):
            raise ModelError("Mane needs 0 < a1 < a2 < 1", a1=a1, a2=a2)
        if not (b1 > 0 > b2):
            raise ModelError("Mane needs b1 > 0 > b2", b1=b1, b2=b2)
        self.a1, self.a2, self.b1, self.b2 = map(float, (a1, a2, b1, b2))
        self.band = tuple(band)
        self._knots = np.array([0.0, a1 / 2, a1, a2, (1 + a2) / 2, 1.0])
        self._pieces = [
            (a1 / 2, -a1 / 4, -0.5, a1, -b1, 0.0),
            (a1, -b1, 0.0, a2, -b2, 0.0),
            (a2, -b2, 0.0, (1 + a2) / 2, (1 - a2) / 4, -0.5),
        ]
        grid = np.linspace(0, 1, 20001)
        gmin = float(np.min(1 + self.f(grid)[1]))
        if gmin < 0.5 - 1e-12:
            raise ModelError(f"Mane g is too weakly monotone: min g' = {gmin:.4g} < 1/2",
                             min_gprime=gmin)
        self.c = 0.5
        self.fixed_b = brentq(lambda s: float(self.f(s)[0]), a1, a2, xtol=1e-15)

    def params(self):
        return {"a1": self.a1, "a2": self.a2, "b1": self.b1, "b2": self.b2}

    def f(self, x):
        """Return ``f, f', f''`` at ``x`` (periodic)."""
        x = np.asarray(x, dtype=float)
        u = x - np.floor(x)
        val = np.where(u < 0.5, -u / 2, -(u - 1) / 2)
        d1 = np.full_like(u, -0.5)
        d2 = np.zeros_like(u)
        for (x0, y0, m0, x1, y1, m1) in self._pieces:
            mask = (u >= x0) & (u <= x1)
            if not np.any(mask):
                continue
            hh = x1 - x0
            t = (u[mask] - x0) / hh
            h00 = 2 * t**3 - 3 * t**2 + 1
            h10 = t**3 - 2 * t**2 + t
            h01 = -2 * t**3 + 3 * t**2
            h11 = t**3 - t**2
            val[mask] = h00 * y0 + h10 * hh * m0 + h01 * y1 + h11 * hh * m1
            d1[mask] = ((6 * t**2 - 6 * t) * y0 + (3 * t**2 - 4 * t + 1) * hh * m0
                        + (-6 * t**2 + 6 * t) * y1 + (3 * t**2 - 2 * t) * hh * m1) / hh
            d2[mask] = ((12 * t - 6) * y0 + (6 * t - 4) * hh * m0
                        + (-12 * t + 6) * y1 + (6 * t - 2) * hh * m1) / hh**2
        return val, d1, d2

    def g(self, x):
        fv, f1, f2 = self.f(x)
        return np.asarray(x) + fv, 1 + f1, f2

    def residue(self, x) -> float:
        """Residue ``(1 - g')^2 / g'`` of a fixed point at ``(x, 0)``."""
        gp = float(self.g(x)[1])
        return (1 - gp) ** 2 / gp

    def _eval(self, x, xp):
        gv, g1, g2 = self.g(x)
        y = xp - gv
        return Derivs(0.5 * y * y, -y * g1, y, g1 * g1 - y * g2, -g1 + 0 * y, np.ones_like(y))


class Reversed(GeneratingFunction):
    """The reversed energy ``h~(x, x') = h(x', x)``.

    Reflecting a chain ``n -> -n`` maps solutions of ``h`` to solutions of
    ``h~`` and exchanges advancing and retreating discommensurations.
    """

    def __init__(self, h: GeneratingFunction):
        self.inner = h
        self.c = h.c
        self.band = (-h.band[1], -h.band[0])
        self.analytic = h.analytic
        self.name = "reversed_" + h.name

    def params(self):
        return {"inner": self.inner.describe()}

    def _eval(self, x, xp):
        d = self.inner.eval(xp, x)
        return Derivs(d.h, d.h2, d.h1, d.h22, d.h12, d.h11)


def reversed_h(h: GeneratingFunction) -> GeneratingFunction:
    """Return the reversed generating function (involution)."""
    if isinstance(h, Reversed):
        return h.inner
    return Reversed(h)


@dataclass(frozen=True)
class TiltedEnergy:
    """``h_F(x, x') = h(x, x') - F x``.

    Exposes the same ``eval`` interface as a generating function so that
    all solvers can take either.
    """

    base: GeneratingFunction
    F: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.F):
            raise ModelError("tilt F must be finite", F=self.F)

    @property
    def c(self):
        return self.base.c

    @property
    def band(self):
        return self.base.band

    def eval(self, x, xp) -> Derivs:
        x = np.asarray(x, dtype=float)
        d = self.base.eval(x, xp)
        return Derivs(d.h - self.F * x, d.h1 - self.F, d.h2, d.h11, d.h12, d.h22)

    def energy(self, x, xp):
        return self.eval(x, xp).h

    def with_F(self, F: float) -> "TiltedEnergy":
        return TiltedEnergy(self.base, float(F))

    def describe(self):
        return {"model": self.base.describe(), "F": self.F}


def as_tilted(E, F: float | None = None) -> TiltedEnergy:
    """Coerce a generating function or tilted energy to ``TiltedEnergy``."""
    if isinstance(E, TiltedEnergy):
        return E if F is None else E.with_F(F)
    if isinstance(E, GeneratingFunction):
        return TiltedEnergy(E, 0.0 if F is None else float(F))
    raise TypeError(f"expected a generating function, got {type(E).__name__}")


def eval_h(h, x, xp) -> Derivs:
    """Evaluate a derivative bundle, raising ``ModelError`` on non-finite output."""
    d = h.eval(x, xp)
    for name, v in zip(Derivs._fields, d):
        if not np.all(np.isfinite(v)):
            raise ModelError(f"generating function returned non-finite {name}",
                             x=np.asarray(x).tolist(), xp=np.asarray(xp).tolist())
    return d


# ---------------------------------------------------------------------------
# catalog

@dataclass(frozen=True)
class BuiltinSpec:
    """Catalog entry: ``kind`` in {standard_fk, double_well, bistable, mane}."""

    kind: str
    params: dict = field(default_factory=dict)


_CATALOG = {
    "standard_fk": StandardFK,
    "double_well": DoubleWell,
    "bistable": Bistable,
    "mane": Mane,
}


def make_builtin(spec) -> GeneratingFunction:
    """Build a catalog generating function from a ``BuiltinSpec`` or a dict
    such as ``{"kind": "standard_fk", "k": 1.0}``."""
    if isinstance(spec, dict):
        spec = dict(spec)
        kind = spec.pop("kind", None)
        spec = BuiltinSpec(kind, spec)
    cls = _CATALOG.get(spec.kind)
    if cls is None:
        raise ModelError(f"unknown model kind {spec.kind!r}; expected one of {sorted(_CATALOG)}")
    params = dict(spec.params)
    if "band" in params:
        params["band"] = tuple(int(v) for v in params["band"])
    try:
        return cls(**params)
    except TypeError as exc:
        raise ModelError(f"bad parameters for {spec.kind}: {exc}") from None


# ---------------------------------------------------------------------------
# verification

def verify_properties(h, samples: int = 1000, seed: int = 0) -> dict:
    """Sample the structural properties of ``h``.

    Returns a report with the maximum periodicity violation, the minimum of
    ``-h12`` over the band and the maximum discrepancy between supplied
    derivatives and central finite differences.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    M, N = h.band
    x = rng.uniform(-1.0, 1.0, samples)
    xp = x + rng.uniform(M, N, samples)
    d = eval_h(h, x, xp)
    shift = h.eval(x + 1.0, xp + 1.0)
    F = getattr(h, "F", 0.0)
    periodic = float(np.max(np.abs(shift.h - d.h + F)))
    twist = float(np.min(-d.h12))

    s = FD_STEP
    e = lambda a, b: h.eval(a, b).h  # noqa: E731
    fd1 = (e(x + s, xp) - e(x - s, xp)) / (2 * s)
    fd2 = (e(x, xp + s) - e(x, xp - s)) / (2 * s)
    first_err = float(max(np.max(np.abs(fd1 - d.h1)), np.max(np.abs(fd2 - d.h2))))
    fd12 = (h.eval(x, xp + s).h1 - h.eval(x, xp - s).h1) / (2 * s)
    fd11 = (h.eval(x + s, xp).h1 - h.eval(x - s, xp).h1) / (2 * s)
    fd22 = (h.eval(x, xp + s).h2 - h.eval(x, xp - s).h2) / (2 * s)
    second = np.abs(np.stack([fd11 - d.h11, fd12 - d.h12, fd22 - d.h22]))
    return {
        "samples": samples,
        "periodicity_violation": periodic,
        "min_minus_h12": twist,
        "twist_ok": bool(twist >= h.c * (1 - 1e-12)),
        "max_first_derivative_error": first_err,
        "max_second_derivative_error": float(np.max(second)),
        "finite_difference_derivatives": not getattr(h, "analytic", True),
    }


# ---------------------------------------------------------------------------
# band modification

_GL_X, _GL_W = np.polynomial.legendre.leggauss(40)


def _gauss(fun, a, b):
    """Composite Gauss-Legendre integral of ``fun`` over [a, b] (signed)."""
    if a == b:
        return 0.0
    n = max(1, int(math.ceil(abs(b - a))))
    edges = np.linspace(a, b, n + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        total += half * float(np.dot(_GL_W, fun(mid + half * _GL_X)))
    return total


class ModifiedBand(GeneratingFunction):
    """``h`` modified outside ``M <= x'-x <= N`` to have bounded second
    derivatives while staying C^2 and keeping ``h12 <= -c``.

    Outside the band the extension solves the wave equation
    ``h~_12 = -j(midpoint)`` with Cauchy data taken from the band edge.
    """

    def __init__(self, h: GeneratingFunction, M: int, N: int):
        if not M < N:
            raise ModelError("modify_band needs M < N", M=M, N=N)
        self.inner = h
        self.M, self.N = int(M), int(N)
        self.c = h.c
        self.band = (self.M, self.N)
        self.analytic = h.analytic
        self.name = "modified_" + h.name

    def params(self):
        return {"inner": self.inner.describe(), "M": self.M, "N": self.N}

    def _edge(self, xi, S):
        d = self.inner.eval(xi, xi + S)
        g = d.h
        gp = d.h1 + d.h2
        gpp = d.h11 + 2 * d.h12 + d.h22
        k = d.h2 - d.h1
        kp = d.h22 - d.h11
        j = -d.h12
        return g, gp, gpp, k, kp, j

    def _extend(self, u, w, S):
        edge = lambda xi: self._edge(xi, S)  # noqa: E731
        j = lambda xi: self._edge(xi, S)[5]  # noqa: E731
        kf = lambda xi: self._edge(xi, S)[3]  # noqa: E731
        m = 0.5 * (u + w)
        lo, hi = min(u, w), max(u, w)
        Q = 2 * (_gauss(lambda s: j(s) * (s - lo), lo, m) + _gauss(lambda s: j(s) * (hi - s), m, hi))
        Qu = 2 * _gauss(j, m, u)
        Qw = 2 * _gauss(j, m, w)
        gu, gpu, gppu, ku, kpu, ju = edge(u)
        gw, gpw, gppw, kw, kpw, jw = edge(w)
        jm = float(j(m))
        val = 0.5 * (gu + gw + _gauss(kf, u, w)) + Q
        h1 = 0.5 * (gpu - ku) + Qu
        h2 = 0.5 * (gpw + kw) + Qw
        h11 = 0.5 * (gppu - kpu) + 2 * ju - jm
        h22 = 0.5 * (gppw + kpw) + 2 * jw - jm
        return val, h1, h2, h11, -jm, h22

    def _eval(self, x, xp):
        x, xp = np.broadcast_arrays(x, xp)
        out = [np.array(a, dtype=float, copy=True) for a in self.inner.eval(x, xp)]
        d = xp - x
        for idx in zip(*np.nonzero((d > self.N) | (d < self.M))) if d.ndim else (
                [()] if (d > self.N or d < self.M) else []):
            S = self.N if d[idx] > self.N else self.M
            vals = self._extend(float(x[idx]), float(xp[idx]) - S, S)
            for arr, v in zip(out, vals):
                arr[idx] = v
        return Derivs(*out)


def modify_band(h: GeneratingFunction, M: int, N: int) -> GeneratingFunction:
    """Return ``h`` modified outside the spacing band ``[M, N]``."""
    return ModifiedBand(h, M, N)
