"""Discommensurations.

An advancing discommensuration between ordered type-(p, q) equilibria
``xm << xp`` is a state asymptotic to ``xm`` on the left and ``xp`` on the
right.  Equilibrium ones are found by Newton on a finite window with the
two outside neighbours clamped to the asymptotes.  Sliding ones travel
with ``x(t+T) = T_{-q,-p} x(t)``; they are integrated on a window that is
recentred by ``T_{qp}`` every time the front passes the central site.
Retreating problems are mapped to advancing ones by reflecting the chain
and reversing the generating function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, solve_banded

from . import chain
from .configs import (Order, PeriodicConfiguration, WindowConfiguration, compare, reflect,
                      translate)
from .errors import (GluingError, InsufficientTail, NewtonDivergence, NonexistenceSignal,
                     PreconditionError)
from .flow import FlowSettings, _System
from .model import TiltedEnergy, as_tilted, reversed_h
from .rk import DormandPrince

ADVANCING = "advancing"
RETREATING = "retreating"


def _reverse_energy(E: TiltedEnergy) -> TiltedEnergy:
    return TiltedEnergy(reversed_h(E.base), E.F)


def _check_pair(xm, xp):
    if (xm.p, xm.q) != (xp.p, xp.q):
        raise PreconditionError("asymptotes must have the same type",
                                xm=[xm.p, xm.q], xp=[xp.p, xp.q])
    if compare(xm, xp) is not Order.STRICTLY_LESS:
        raise PreconditionError("need xm << xp (strictly ordered asymptotes)")


def _profile(xm, xp, L, centre=0.0, width=None):
    n = np.arange(-L, L + 1)
    w = width or max(1.0, xm.q / 2)
    s = 1.0 / (1.0 + np.exp(-(n - centre) / w))
    return n, xm.at(n) + (xp.at(n) - xm.at(n)) * s


def _window_newton(w: WindowConfiguration, E, lower=None, upper=None, tol=1e-12, max_iter=80):
    """Damped Newton for the window equilibrium with clamped neighbours."""
    x = w.values.copy()
    left, right = w.left_asym.at(w.l - 1), w.right_asym.at(w.r + 1)

    def resid(v):
        return -chain.velocity(np.concatenate(([left], v, [right])), E)

    G = resid(x)
    res = float(np.max(np.abs(G)))
    it = 0
    while res > tol and it < max_iter:
        it += 1
        diag, off = chain.hessian_bands(np.concatenate(([left], x, [right])), E)
        ab = np.zeros((3, x.size))
        ab[0, 1:] = off[:-1]
        ab[1] = diag
        ab[2, :-1] = off[:-1]
        try:
            dx = solve_banded((1, 1), ab, -G)
        except (np.linalg.LinAlgError, ValueError):
            raise NewtonDivergence("singular window Jacobian", residual=res) from None
        lam = 1.0
        while True:
            xn = x + lam * dx
            Gn = resid(xn)
            rn = float(np.max(np.abs(Gn)))
            if rn < res or lam < 1e-4:
                break
            lam *= 0.5
        x, G, res = xn, Gn, rn
        if lower is not None and (np.any(x < lower - 1e-8) or np.any(x > upper + 1e-8)):
            raise NonexistenceSignal("iterate left the order interval [xm, xp]", residual=res,
                                     iteration=it)
        if not np.all(np.isfinite(x)):
            raise NewtonDivergence("non-finite Newton iterate", iteration=it)
    if res > 1e-10:
        raise NewtonDivergence("window Newton did not converge", residual=res, iterations=it)
    return w.with_values(x), res


def window_residual(w: WindowConfiguration, E) -> np.ndarray:
    return chain.velocity(chain.extended(w), as_tilted(E))


@dataclass
class HeteroclinicSolution:
    window: WindowConfiguration
    kind: str
    residual: float
    decay: tuple
    tail_gaps: tuple
    tails_monotone: bool
    morse_index: int | None = None

    def to_dict(self):
        return {"kind": self.kind, "residual": self.residual, "decay": list(self.decay),
                "tail_gaps": list(self.tail_gaps), "tails_monotone": self.tails_monotone,
                "morse_index": self.morse_index, "window": self.window.to_dict()}


def _tail_stats(w: WindowConfiguration):
    n = w.indices
    q = w.left_asym.q
    gl = np.abs(w.values - w.left_asym.at(n))
    gr = np.abs(w.values - w.right_asym.at(n))
    third = max(q, len(n) // 3)
    left, right = gl[:third], gr[-third:][::-1]

    def rate(g):
        # per-period maxima, outermost first
        k = len(g) // q
        if k < 2:
            return float("nan"), True
        blocks = g[: k * q].reshape(k, q).max(axis=1)
        ok = bool(np.all(np.diff(blocks[::-1]) <= 1e-12 + 1e-9 * blocks[::-1][1:]))
        pos = blocks > 1e-13
        if pos.sum() < 2:
            return float("inf"), ok
        idx = np.arange(k)[pos]
        slope = np.polyfit(idx * q, np.log(blocks[pos]), 1)[0]
        return float(slope), ok

    rl, okl = rate(left)
    rr, okr = rate(right)
    return (float(gl[0]), float(gr[-1])), (rl, rr), okl and okr


def find_equilibrium_disc(xm: PeriodicConfiguration, xp: PeriodicConfiguration, kind: str,
                          E, half_width: int | None = None, relax_time: float = 200.0,
                          tail_tol: float = 1e-8, max_doublings: int = 3) -> HeteroclinicSolution:
    """Equilibrium discommensuration between ``xm << xp``.

    ``kind="advancing"`` goes from ``xm`` on the left to ``xp`` on the right;
    ``"retreating"`` the other way round and is solved as an advancing
    problem for the reflected chain.
    """
    E = as_tilted(E)
    _check_pair(xm, xp)
    if kind == RETREATING:
        sol = find_equilibrium_disc(reflect(xm), reflect(xp), ADVANCING, _reverse_energy(E),
                                    half_width, relax_time, tail_tol, max_doublings)
        return HeteroclinicSolution(reflect(sol.window), RETREATING, sol.residual,
                                    sol.decay[::-1], sol.tail_gaps[::-1], sol.tails_monotone,
                                    sol.morse_index)
    if kind != ADVANCING:
        raise ValueError(f"unknown kind {kind!r}")
    q = xm.q
    L = half_width or 12 * q
    if L < 5 * q:
        raise PreconditionError("half-width must be at least 5q", L=L, q=q)
    # an off-centre profile avoids relaxing onto a symmetric saddle
    n, v = _profile(xm, xp, L, centre=0.3 * q)
    w = WindowConfiguration(-L, v, xm, xp)
    w = _relax_window(w, E, relax_time)
    for _ in range(max_doublings + 1):
        n = w.indices
        sol, res = _window_newton(w, E, xm.at(n), xp.at(n))
        gaps, rates, mono = _tail_stats(sol)
        if max(gaps) <= tail_tol:
            break
        L *= 2
        n2 = np.arange(-L, L + 1)
        w = WindowConfiguration(-L, sol.at(n2), xm, xp)
    idx = morse_index_truncated(sol, sol.l - 1, sol.r + 1, E).index
    return HeteroclinicSolution(sol, ADVANCING, res, rates, gaps, mono, idx)


def _relax_window(w, E, t_max, tol=1e-6):
    sysm = _System(w, E, check_band=False)
    rk = DormandPrince(sysm.f, sysm.y0, 0.05, 1e-8, 1.0)
    while rk.t < t_max and np.max(np.abs(rk.fy)) > tol:
        rk.step()
    return w.with_values(rk.y)


# ---------------------------------------------------------------------------
# sliding fronts

@dataclass
class SlidingFront:
    kind: str
    T: float
    v: float
    recurrence_error: float
    window: WindowConfiguration
    samples_t: np.ndarray = field(repr=False, default=None)
    samples_x: np.ndarray = field(repr=False, default=None)
    periods: int = 0
    status: str = "sliding"

    def to_dict(self):
        return {"kind": self.kind, "status": self.status, "T": self.T, "v": self.v,
                "recurrence_error": self.recurrence_error, "periods": self.periods,
                "window": self.window.to_dict()}


@dataclass
class UndeterminedFront:
    kind: str
    displacement: float
    residual: float
    t: float
    window: WindowConfiguration
    status: str = "undetermined"

    def to_dict(self):
        return {"kind": self.kind, "status": self.status, "displacement": self.displacement,
                "residual": self.residual, "t": self.t, "window": self.window.to_dict()}


def _front_position(y, lo, hi):
    frac = np.clip((y - lo) / (hi - lo), 0.0, 1.0)
    return float(np.sum(1.0 - frac))


def find_sliding_disc(xm: PeriodicConfiguration, xp: PeriodicConfiguration, kind: str, E,
                      settings: FlowSettings | None = None, half_width: int | None = None,
                      t_max: float | None = None, min_periods: int = 2):
    """Integrate a front between ``xm << xp`` in a co-moving window.

    The window is recentred by ``T_{qp}`` each time the central site
    crosses the midpoint of its asymptotes; the time between recentrings
    is the period ``T``.  Advancing fronts move left with ``v = -1/T``.
    """
    E = as_tilted(E)
    s = settings or FlowSettings()
    _check_pair(xm, xp)
    if kind == RETREATING:
        out = find_sliding_disc(reflect(xm), reflect(xp), ADVANCING, _reverse_energy(E), s,
                                half_width, t_max, min_periods)
        out.kind = RETREATING
        out.window = reflect(out.window)
        if isinstance(out, SlidingFront):
            out.v = -out.v
            out.samples_x = out.samples_x[:, ::-1]
        return out
    if kind != ADVANCING:
        raise ValueError(f"unknown kind {kind!r}")
    p, q = xm.p, xm.q
    L = half_width or 40 * q
    t_max = t_max or s.t_max
    n, v = _profile(xm, xp, L, centre=q / 2)
    w = WindowConfiguration(-L, v, xm, xp)
    lo, hi = xm.at(n), xp.at(n)
    c = L  # array index of site 0
    mid = 0.5 * (lo[c] + hi[c])
    left_fill = xm.at(n[:q])

    sysm = _System(w, E, check_band=False)
    rk = DormandPrince(sysm.f, v.copy(), s.dt0, s.tol, s.max_dt)
    events = []
    pos_log = [(0.0, _front_position(rk.y, lo, hi))]
    buf_t, buf_x = [0.0], [rk.y.copy()]
    while rk.t < t_max:
        t0, y0, f0 = rk.step()
        if rk.y[c] >= mid > y0[c]:
            te, ye = rk.locate(t0, y0, f0, lambda y: y[c] - mid, rk.last_h)
            buf_t.append(te)
            buf_x.append(ye.copy())
            if events:
                tp, yp = events[-1]
                err = float(np.max(np.abs(ye - yp)))
                if err < s.recur_tol and len(events) >= min_periods:
                    T = te - tp
                    return SlidingFront(ADVANCING, T, -1.0 / T, err, w.with_values(ye),
                                        np.array(buf_t), np.array(buf_x), len(events))
            events.append((te, ye.copy()))
            nxt = np.empty_like(ye)
            nxt[q:] = ye[:-q] + p
            nxt[:q] = left_fill
            rk = DormandPrince(sysm.f, nxt, rk.dt, s.tol, s.max_dt, t0=te)
            buf_t, buf_x = [te], [nxt.copy()]
        else:
            buf_t.append(rk.t)
            buf_x.append(rk.y.copy())
        pos_log.append((rk.t, _front_position(rk.y, lo, hi) - q * len(events)))
    half = [pp for tt, pp in pos_log if tt >= rk.t / 2]
    disp = float(max(half) - min(half)) if half else 0.0
    return UndeterminedFront(ADVANCING, disp, float(np.max(np.abs(rk.fy))), rk.t,
                             w.with_values(rk.y))


# ---------------------------------------------------------------------------
# gluing

@dataclass
class GluingPlan:
    """Pieces used on consecutive site ranges.

    Piece ``i`` supplies sites ``cuts[i-1] < n <= cuts[i]`` (the first
    piece everything up to ``cuts[0]``, the last everything after the final
    cut).  ``delta`` optionally caps the allowed junction mismatch.
    """

    pieces: list
    cuts: list
    E: object = None
    l: int | None = None
    r: int | None = None
    delta: float | None = None


@dataclass
class GlueReport:
    window: WindowConfiguration
    delta: float
    C: float
    junction_residual: float
    piece_residual: float
    max_residual: float

    @property
    def bound_ok(self) -> bool:
        return self.junction_residual <= self.C * self.delta + self.piece_residual + 1e-13


def _asym(piece, side):
    if isinstance(piece, PeriodicConfiguration):
        return piece
    return piece.left_asym if side == "left" else piece.right_asym


def _twist_sup(E, a0, a1, b0, b1, n=9):
    """``sup |h12|`` over the segments swept when switching pieces at a cut."""
    s = np.linspace(0, 1, n)
    x = np.concatenate([np.full(n, a0), a0 + s * (b0 - a0)])
    xp = np.concatenate([a1 + s * (b1 - a1), np.full(n, b1)])
    return float(np.max(np.abs(E.eval(x, xp).h12)))


def glue(plan: GluingPlan):
    """Concatenate pieces at the cuts and bound the junction residual.

    Returns ``(window, report)``; the report compares the largest velocity
    at junction sites with ``C * delta``, ``C`` the measured sup of
    ``|h12|`` near the junction.
    """
    if len(plan.cuts) != len(plan.pieces) - 1:
        raise PreconditionError("need exactly one cut between consecutive pieces")
    if list(plan.cuts) != sorted(plan.cuts):
        raise PreconditionError("cuts must be increasing")
    E = as_tilted(plan.E)
    l = plan.l if plan.l is not None else min(plan.cuts) - 10
    r = plan.r if plan.r is not None else max(plan.cuts) + 10
    n = np.arange(l, r + 1)
    vals = np.empty(n.size)
    bounds = [-np.inf, *plan.cuts, np.inf]
    for i, piece in enumerate(plan.pieces):
        mask = (n > bounds[i]) & (n <= bounds[i + 1])
        vals[mask] = piece.at(n[mask])
    win = WindowConfiguration(l, vals, _asym(plan.pieces[0], "left"),
                              _asym(plan.pieces[-1], "right"))
    delta, C, jres, pres = 0.0, 0.0, 0.0, 0.0
    vel = window_residual(win, E)
    for i, n0 in enumerate(plan.cuts):
        y, z = plan.pieces[i], plan.pieces[i + 1]
        yy, zz = y.at(np.array([n0 - 1, n0, n0 + 1, n0 + 2])), z.at(np.array([n0 - 1, n0, n0 + 1, n0 + 2]))
        d = float(max(abs(yy[1] - zz[1]), abs(yy[2] - zz[2])))
        if plan.delta is not None and d > plan.delta:
            raise GluingError("pieces disagree beyond the requested delta at a cut",
                              cut=n0, mismatch=d, delta=plan.delta)
        delta = max(delta, d)
        C = max(C, _twist_sup(E, yy[1], yy[2], zz[1], zz[2]))
        for j in (n0, n0 + 1):
            if l <= j <= r:
                jres = max(jres, abs(vel[j - l]))
        py = chain.velocity(y.at(np.arange(n0 - 1, n0 + 2)), E)
        pz = chain.velocity(z.at(np.arange(n0, n0 + 3)), E)
        pres = max(pres, float(np.max(np.abs(py))), float(np.max(np.abs(pz))))
    report = GlueReport(win, delta, C, jres, pres, float(np.max(np.abs(vel))))
    return win, report


def build_mediant_config(y: PeriodicConfiguration, z: HeteroclinicSolution, pp: int, qq: int,
                         n: int, m: int = 1, N: int | None = None, E=None,
                         delta: float | None = None):
    """Periodic configuration of type ``(n p + p', n q + q')`` assembled from
    the discommensuration ``z`` joining ``y`` to ``T_{q'p'} y``.

    With ``m > 1`` the block of length ``n q + q'`` is followed by ``m - 1``
    blocks of length ``N q + q'``, giving type
    ``(n p + (m-1) N p + m p', n q + (m-1) N q + m q')``.
    Returns ``(config, max_residual, tail_gap)``.
    """
    p, q = y.p, y.q
    w = z.window if isinstance(z, HeteroclinicSolution) else z
    if m > 1 and N is None:
        N = n
    target = translate(y, qq, pp)
    if w.right_asym != target and not np.allclose(w.right_asym.x, target.x, atol=1e-9):
        raise PreconditionError("z must connect y to T_{q'p'} y")
    lens = [n] + [N] * (m - 1)
    vals, P_tot = [], 0
    Q1 = n * q + qq
    a1 = -(Q1 // 2)
    c, end_prev = 0.0, None
    for nk in lens:
        Qk = nk * q + qq
        ak = a1 - q * int(round((Qk - Q1) / (2 * q)))
        if end_prev is not None:
            # continue where the previous block's right tail left off
            c += pp + ((end_prev - ak) // q) * p
        vals.append(w.at(np.arange(ak, ak + Qk)) + c)
        end_prev = ak + nk * q
        P_tot += nk * p + pp
    x = np.concatenate(vals)
    cfg = PeriodicConfiguration(P_tot, x.size, x)
    gap = float(max(abs(w.at(a1) - y.at(a1)),
                    abs(w.at(a1 + lens[-1] * q + qq) - target.at(a1 + lens[-1] * q + qq)),
                    *w.boundary_residuals))
    if delta is not None and gap > delta:
        raise InsufficientTail(f"tail gap {gap:.3g} exceeds delta {delta:.3g}; increase n",
                               gap=gap, delta=delta, n=n)
    res = None
    if E is not None:
        res = float(np.max(np.abs(chain.velocity(chain.extended(cfg), as_tilted(E)))))
    return cfg, res, gap


# ---------------------------------------------------------------------------
# Morse indices

def _sturm_count(diag, off, sigma=0.0):
    """Number of eigenvalues below ``sigma`` of a symmetric tridiagonal matrix."""
    count = 0
    d = 1.0
    tiny = 1e-300
    for i in range(len(diag)):
        b2 = off[i - 1] ** 2 if i > 0 else 0.0
        d = diag[i] - sigma - (b2 / d if i > 0 else 0.0)
        if d == 0.0:
            d = -tiny
        if d < 0:
            count += 1
    return count


@dataclass
class MorseReport:
    index: int
    edge: float
    size: int


def morse_index_truncated(x, l: int, m: int, E) -> MorseReport:
    """Morse index of the truncation to sites ``l+1..m-1``.

    Builds ``A = -D^2 W`` with ``beta_i = -h22(x_{i-1},x_i) - h11(x_i,x_{i+1})``
    and ``alpha_i = -h12(x_{i-1},x_i)`` and counts its positive eigenvalues
    with a Sturm sequence.  ``edge`` is the largest eigenvalue of ``A``.
    """
    if m <= l + 1:
        raise ValueError("need m > l + 1")
    E = as_tilted(E)
    ext = np.asarray(x.at(np.arange(l, m + 1)), dtype=float)
    d = E.eval(ext[:-1], ext[1:])
    beta = -d.h22[:-1] - d.h11[1:]
    alpha = -d.h12[1:-1]
    index = _sturm_count(-beta, -alpha, 0.0)
    if beta.size == 1:
        edge = float(beta[0])
    else:
        edge = float(eigvalsh_tridiagonal(beta, alpha, select="i",
                                          select_range=(beta.size - 1, beta.size - 1))[0])
    return MorseReport(index, edge, int(beta.size))


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    morse_index: int
    degenerate: bool


def hessian_spectrum_periodic(x: PeriodicConfiguration, E, degeneracy_tol: float = 1e-8) -> SpectrumReport:
    """Eigenvalues of the cyclic ``D^2 W_{p,q}`` with index and degeneracy flag."""
    H = chain.periodic_hessian(x.x, x.p, as_tilted(E))
    ev = np.linalg.eigvalsh(H)
    scale = max(np.linalg.norm(H, 2), 1e-300)
    return SpectrumReport(ev, int(np.sum(ev < -degeneracy_tol * scale)),
                          bool(np.min(np.abs(ev)) < degeneracy_tol * scale))
