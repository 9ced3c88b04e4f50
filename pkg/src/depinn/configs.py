"""Configuration spaces of a chain.

``PeriodicConfiguration`` stores a type-(p, q) state by its q positions and
the wrap rule ``x[n+q] = x[n] + p``.  ``WindowConfiguration`` stores a
finite window of sites together with periodic asymptotes on either side,
which is how discommensurations are represented.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from pathlib import Path

import numpy as np

from .errors import InconsistentWindow

INT_SNAP = 1e-11


@dataclass(frozen=True, eq=False)
class PeriodicConfiguration:
    """A type-(p, q) configuration.

    Parameters
    ----------
    p, q : int
        Type; ``q >= 1``.
    x : array_like
        Positions of sites ``0..q-1``.
    """

    p: int
    q: int
    x: np.ndarray

    def __post_init__(self):
        if int(self.q) < 1:
            raise ValueError("q must be positive")
        arr = np.array(self.x, dtype=float).reshape(-1)
        if arr.size != int(self.q):
            raise ValueError(f"expected {self.q} positions, got {arr.size}")
        arr.setflags(write=False)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "x", arr)

    @property
    def reduced(self) -> bool:
        return math.gcd(self.p, self.q) == 1

    @property
    def omega(self) -> Fraction:
        return Fraction(self.p, self.q)

    def at(self, n):
        """Positions at integer sites ``n`` (scalar or array)."""
        n = np.asarray(n)
        k, r = np.divmod(n, self.q)
        out = self.x[r] + self.p * k
        return float(out) if out.ndim == 0 else out

    def sites(self, lo: int, hi: int) -> np.ndarray:
        """Positions for ``lo <= n <= hi``."""
        return self.at(np.arange(lo, hi + 1))

    @classmethod
    def uniform(cls, p: int, q: int, phase: float = 0.0):
        """Rigid rotation ``x_n = n p/q + phase``."""
        return cls(p, q, np.arange(q) * p / q + phase)

    def shifted(self, dx: float) -> "PeriodicConfiguration":
        return PeriodicConfiguration(self.p, self.q, self.x + dx)

    def with_values(self, x) -> "PeriodicConfiguration":
        return PeriodicConfiguration(self.p, self.q, x)

    def __eq__(self, other):
        return (isinstance(other, PeriodicConfiguration) and (self.p, self.q) == (other.p, other.q)
                and bool(np.array_equal(self.x, other.x)))

    def __hash__(self):
        return hash((self.p, self.q, self.x.tobytes()))

    def to_dict(self):
        return {"p": self.p, "q": self.q, "x": self.x.tolist()}


@dataclass(frozen=True, eq=False)
class WindowConfiguration:
    """Sites ``l..r`` of a state with periodic asymptotes.

    Outside the window the state is taken equal to ``left_asym`` (for
    ``n < l``) or ``right_asym`` (for ``n > r``).  ``left_shift`` and
    ``right_shift`` record which power of ``T_{qp}`` the asymptotes are
    stored at; they are bookkeeping only.
    """

    l: int
    values: np.ndarray
    left_asym: PeriodicConfiguration
    right_asym: PeriodicConfiguration
    left_shift: int = 0
    right_shift: int = 0

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "l", int(self.l))

    @property
    def r(self) -> int:
        return self.l + self.values.size - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.l, self.r + 1)

    def at(self, n):
        n = np.asarray(n)
        inside = (n >= self.l) & (n <= self.r)
        out = np.where(n < self.l, self.left_asym.at(n), self.right_asym.at(n))
        out = np.where(inside, self.values[np.clip(n - self.l, 0, self.values.size - 1)], out)
        return float(out) if out.ndim == 0 else out

    def sites(self, lo: int, hi: int) -> np.ndarray:
        return self.at(np.arange(lo, hi + 1))

    @property
    def boundary_residuals(self):
        """Distances of the end sites from their asymptotes."""
        return (abs(self.values[0] - self.left_asym.at(self.l)),
                abs(self.values[-1] - self.right_asym.at(self.r)))

    def with_values(self, values) -> "WindowConfiguration":
        return WindowConfiguration(self.l, values, self.left_asym, self.right_asym,
                                   self.left_shift, self.right_shift)

    def __eq__(self, other):
        return (isinstance(other, WindowConfiguration) and self.l == other.l
                and np.array_equal(self.values, other.values)
                and self.left_asym == other.left_asym and self.right_asym == other.right_asym)

    def __hash__(self):
        return hash((self.l, self.values.tobytes()))

    def to_dict(self):
        return {"l": self.l, "values": self.values.tolist(),
                "left_asym": self.left_asym.to_dict(), "right_asym": self.right_asym.to_dict()}


# ---------------------------------------------------------------------------
# rotation symbols

@total_ordering
@dataclass(frozen=True)
class RotationSymbol:
    """A rotation number, possibly blown up at a rational.

    ``side`` is -1, 0 or +1 for ``p/q-``, ``p/q`` and ``p/q+``; real
    (irrational) symbols carry ``side = 0`` and a float value.
    """

    value: Fraction | float
    side: int = 0

    @classmethod
    def rational(cls, p, q, side=0):
        return cls(Fraction(p, q), int(side))

    @classmethod
    def real(cls, w: float):
        return cls(float(w), 0)

    def _key(self):
        return (self.value, self.side)

    def __lt__(self, other):
        if not isinstance(other, RotationSymbol):
            return NotImplemented
        if self.value != other.value:
            return self.value < other.value
        return self.side < other.side

    def __eq__(self, other):
        return isinstance(other, RotationSymbol) and self.value == other.value and self.side == other.side

    def __hash__(self):
        return hash(self._key())

    def __str__(self):
        mark = {-1: "-", 0: "", 1: "+"}[self.side]
        return f"{self.value}{mark}"


# ---------------------------------------------------------------------------
# operations

def translate(x, q0: int, p0: int):
    """Apply ``T_{q0,p0}``: ``out_n = x_{n-q0} + p0``."""
    if isinstance(x, PeriodicConfiguration):
        return PeriodicConfiguration(x.p, x.q, x.at(np.arange(x.q) - q0) + p0)
    if isinstance(x, WindowConfiguration):
        return WindowConfiguration(x.l + q0, x.values + p0, translate(x.left_asym, q0, p0),
                                   translate(x.right_asym, q0, p0), x.left_shift, x.right_shift)
    raise TypeError(f"cannot translate {type(x).__name__}")


def reflect(x):
    """Reflect the chain, ``out_n = x_{-n}``.  Type (p, q) becomes (-p, q)."""
    if isinstance(x, PeriodicConfiguration):
        return PeriodicConfiguration(-x.p, x.q, x.at(-np.arange(x.q)))
    if isinstance(x, WindowConfiguration):
        return WindowConfiguration(-x.r, x.values[::-1], reflect(x.right_asym),
                                   reflect(x.left_asym), x.right_shift, x.left_shift)
    raise TypeError(f"cannot reflect {type(x).__name__}")


class Order(enum.Enum):
    EQUAL = "equal"
    STRICTLY_LESS = "strictly_less"
    LESS = "less"
    STRICTLY_GREATER = "strictly_greater"
    GREATER = "greater"
    INCOMPARABLE = "incomparable"

    @property
    def is_le(self):
        return self in (Order.EQUAL, Order.LESS, Order.STRICTLY_LESS)

    @property
    def is_ge(self):
        return self in (Order.EQUAL, Order.GREATER, Order.STRICTLY_GREATER)


def _site_range(x, y, horizon):
    if isinstance(x, PeriodicConfiguration) and isinstance(y, PeriodicConfiguration):
        if Fraction(x.p, x.q) == Fraction(y.p, y.q):
            n = x.q * y.q // math.gcd(x.q, y.q)
            return 0, n - 1
        return -horizon, horizon
    lo, hi = [], []
    for z in (x, y):
        if isinstance(z, WindowConfiguration):
            lo.append(z.l)
            hi.append(z.r)
    return min(lo) - horizon, max(hi) + horizon


def compare(x, y, horizon: int = 0, tol: float = 0.0) -> Order:
    """Classify ``x`` against ``y`` componentwise.

    Periodic states of equal mean spacing are compared over one common
    period; otherwise over the represented sites widened by ``horizon``.
    """
    lo, hi = _site_range(x, y, horizon)
    n = np.arange(lo, hi + 1)
    d = np.asarray(y.at(n)) - np.asarray(x.at(n))
    if np.all(np.abs(d) <= tol):
        return Order.EQUAL
    if np.all(d >= -tol):
        return Order.STRICTLY_LESS if np.all(d > tol) else Order.LESS
    if np.all(d <= tol):
        return Order.STRICTLY_GREATER if np.all(d < -tol) else Order.GREATER
    return Order.INCOMPARABLE


def _snap(v):
    r = np.round(v)
    return np.where(np.abs(v - r) < INT_SNAP, r, v)


def width(x: PeriodicConfiguration) -> int:
    """Width ``sup_m n+(m) - n-(m)``.

    ``n-(m) = floor(min_k (x_k - x_{k-m}))`` and
    ``n+(m) = ceil(max_k (x_k - x_{k-m}))``; both shift by p when m
    shifts by q, so ``m`` ranges over one period.
    """
    k = np.arange(x.q)
    best = 0
    for m in range(x.q):
        d = _snap(x.at(k) - x.at(k - m))
        best = max(best, int(math.ceil(d.max()) - math.floor(d.min())))
    return best


def mean_spacing(x) -> float:
    """``p/q`` for periodic states; the common asymptote value for windows."""
    if isinstance(x, PeriodicConfiguration):
        return x.p / x.q
    left = Fraction(x.left_asym.p, x.left_asym.q)
    right = Fraction(x.right_asym.p, x.right_asym.q)
    if left != right:
        raise InconsistentWindow(f"window asymptotes have spacings {left} and {right}",
                                 left=str(left), right=str(right))
    return float(left)


@dataclass
class BirkhoffReport:
    birkhoff: bool
    witness: tuple | None = None

    def __bool__(self):
        return self.birkhoff


def is_birkhoff(x: PeriodicConfiguration, check_horizon: int | None = None) -> BirkhoffReport:
    """Check that all translates ``T_{a,b} x`` within the horizon are
    comparable with ``x``.  The witness is the first incomparable ``(a, b)``."""
    if check_horizon is None:
        qa, pb = 3 * x.q, 3 * abs(x.p) + 3
    else:
        qa = pb = int(check_horizon)
    k = np.arange(x.q)
    base = x.at(k)
    for a in range(-qa, qa + 1):
        shifted = x.at(k - a)
        for b in range(-pb, pb + 1):
            d = _snap(shifted + b - base)
            if np.any(d > 0) and np.any(d < 0):
                return BirkhoffReport(False, (a, b))
    return BirkhoffReport(True, None)


def _aubry_rows(x, periods):
    if isinstance(x, PeriodicConfiguration):
        n = np.arange(periods * x.q)
    else:
        n = x.indices
    return n, np.asarray(x.at(n), dtype=float)


def export_aubry(x, path, periods: int = 3, svg: bool = False, extra=()) -> Path:
    """Write the Aubry diagram of ``x`` as CSV ``n,x``.

    With ``svg=True`` a sibling ``.svg`` file is written holding one
    polyline per configuration (``x`` followed by ``extra``).
    """
    path = Path(path)
    n, v = _aubry_rows(x, periods)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "x"])
        for a, b in zip(n, v):
            w.writerow([int(a), repr(float(b))])
    if svg:
        _write_svg(path.with_suffix(".svg"), [x, *extra], periods)
    return path


def _write_svg(path, configs, periods, size=(480, 360), pad=30):
    rows = [_aubry_rows(c, periods) for c in configs]
    nmin = min(r[0].min() for r in rows)
    nmax = max(r[0].max() for r in rows)
    xmin = min(r[1].min() for r in rows)
    xmax = max(r[1].max() for r in rows)
    sx = (size[0] - 2 * pad) / max(nmax - nmin, 1)
    sy = (size[1] - 2 * pad) / max(xmax - xmin, 1e-12)
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size[0]}" height="{size[1]}">']
    for i, (n, v) in enumerate(rows):
        pts = " ".join(f"{pad + (a - nmin) * sx:.3f},{size[1] - pad - (b - xmin) * sy:.3f}"
                       for a, b in zip(n, v))
        lines.append(f'<polyline fill="none" stroke="{colours[i % len(colours)]}" points="{pts}"/>')
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")
