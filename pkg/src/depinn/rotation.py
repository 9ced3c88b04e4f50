"""Farey neighbours, mediant sequences and one-sided depinning limits.

``F_d(p/q+)`` is approached along the mediants ``(n p + p')/(n q + q')``
of ``p/q`` with its upper Farey neighbour ``p'/q'``; the minus side uses
the lower neighbour.  The tail is extrapolated with Aitken's delta-squared
process and reported together with the raw samples.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InternalConsistencyError, PreconditionError
from .flow import depinning_force


@dataclass(frozen=True)
class FareyPair:
    p: int
    q: int
    upper: tuple
    lower: tuple


def _check_reduced(p, q):
    if q < 1 or math.gcd(p, q) != 1:
        raise PreconditionError(f"{p}/{q} is not a reduced rational with q >= 1", p=p, q=q)


def farey_neighbours(p: int, q: int) -> FareyPair:
    """Minimal-denominator neighbours ``p'/q' > p/q > p''/q''`` with
    ``p' q - p q' = 1`` and ``p q'' - p'' q = 1``."""
    _check_reduced(p, q)
    if q == 1:
        return FareyPair(p, q, (p + 1, 1), (p - 1, 1))
    inv = pow(p % q, -1, q)
    qu = (-inv) % q or q
    pu = (1 + p * qu) // q
    ql = inv % q or q
    pl = (p * ql - 1) // q
    return FareyPair(p, q, (pu, qu), (pl, ql))


def mediant_sequence(p: int, q: int, side: str, n_max: int, neighbour=None) -> list[Fraction]:
    """``(n p + p')/(n q + q')`` for ``n = 1..n_max``.  ``side`` is ``"plus"``
    or ``"minus"``; ``neighbour`` overrides the Farey neighbour."""
    _check_reduced(p, q)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if neighbour is None:
        pair = farey_neighbours(p, q)
        neighbour = pair.upper if side == "plus" else pair.lower
    elif side not in ("plus", "minus"):
        raise ValueError(side)
    pp, qq = neighbour
    if abs(pp * q - p * qq) != 1:
        raise PreconditionError(f"{pp}/{qq} is not a Farey neighbour of {p}/{q}")
    if (side == "plus") != (Fraction(pp, qq) > Fraction(p, q)):
        raise PreconditionError(f"neighbour {pp}/{qq} lies on the wrong side of {p}/{q}")
    return [Fraction(n * p + pp, n * q + qq) for n in range(1, n_max + 1)]


def aitken(s0: float, s1: float, s2: float) -> float:
    """Aitken delta-squared extrapolant of three successive terms."""
    den = s2 - 2 * s1 + s0
    if den == 0:
        return s2
    return s2 - (s2 - s1) ** 2 / den


@dataclass
class LimitEstimate:
    p: int
    q: int
    side: str
    samples: list
    estimate: float
    increments: list
    extrapolant: float
    raw_bracket: tuple
    F_d_center: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "p": self.p, "q": self.q, "side": self.side,
            "samples": [{"P": P, "Q": Q, "F_d": F} for P, Q, F in self.samples],
            "estimate": self.estimate, "increments": self.increments,
            "extrapolant": self.extrapolant, "raw_bracket": list(self.raw_bracket),
            "F_d_center": self.F_d_center, "diagnostics": self.diagnostics,
        }


def _fd_job(args):
    P, Q, h, method, tol_F = args
    return depinning_force(P, Q, h, method=method, tol_F=tol_F).F_d


def _map(jobs, fn, items):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def fd_limit(p: int, q: int, side: str, h, n_max: int = 9, tol_F: float = 1e-7,
             method: str = "continuation", jobs: int = 1, neighbour=None,
             check_center: bool = True) -> LimitEstimate:
    """Estimate ``F_d(p/q+)`` or ``F_d(p/q-)`` from the mediant tail.

    The estimate is the Aitken extrapolant of the last three samples,
    clipped into the raw bracket ``[0, min sample]`` since ``F_d`` along
    the tail decreases towards the limit from above.
    """
    if n_max < 3:
        raise ValueError("n_max must be >= 3")
    seq = mediant_sequence(p, q, side, n_max, neighbour)
    vals = _map(jobs, _fd_job, [(f.numerator, f.denominator, h, method, tol_F) for f in seq])
    samples = [(f.numerator, f.denominator, float(v)) for f, v in zip(seq, vals)]
    incs = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
    ext = aitken(*vals[-3:])
    lo = 0.0
    hi = min(vals[-3:])
    est = min(max(ext, lo), hi)
    center = None
    diag = {}
    if check_center:
        center = depinning_force(p, q, h, method=method, tol_F=tol_F).F_d
        diag["theorem_a_ok"] = bool(est <= center + tol_F and est >= -tol_F)
        if not diag["theorem_a_ok"]:
            raise InternalConsistencyError("one-sided limit exceeds F_d(p/q)",
                                           estimate=est, F_d_center=center)
    return LimitEstimate(p, q, side, samples, float(est), incs, float(ext), (lo, hi), center, diag)
