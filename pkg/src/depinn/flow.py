"""The tilted gradient flow of a chain.

    x_n' = -h2(x_{n-1}, x_n) - h1(x_n, x_{n+1}) + F

The flow is monotone: ordered initial data stay ordered.  This module
integrates it, classifies long-time behaviour of type-(p, q) states as
pinned or sliding, solves for equilibria and computes the depinning force
``F_d(p/q)`` by bisection on the classification or by continuation of the
equilibrium branch to its fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import chain
from .configs import PeriodicConfiguration, WindowConfiguration, translate
from .errors import BandEscape, InternalConsistencyError, NewtonDivergence, NumericalError
from .model import TiltedEnergy, as_tilted
from .rk import DormandPrince


@dataclass(frozen=True)
class FlowSettings:
    """Integration and classification controls.

    ``t_max`` is the first time budget; undetermined runs are extended by a
    factor 4 until ``t_cap``.
    """

    dt0: float = 0.05
    tol: float = 1e-10
    max_dt: float = 1.0
    t_max: float = 1e4
    t_cap: float = 1.6e5
    eq_tol: float = 1e-10
    recur_tol: float = 1e-8

    def __post_init__(self):
        for name in ("dt0", "tol", "max_dt", "t_max", "t_cap", "eq_tol", "recur_tol"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"FlowSettings.{name} must be positive and finite")

    @classmethod
    def for_model(cls, h, **kw):
        """Defaults scaled to the pinning strength of catalog models."""
        k = getattr(h, "k", 1.0) or 1.0
        kw.setdefault("t_max", 1e4 / max(k, 1e-3) if k < 1 else 1e4)
        kw.setdefault("t_cap", 16 * kw["t_max"])
        return cls(**kw)


# ---------------------------------------------------------------------------
# right-hand side and integration

def rhs(x, E) -> np.ndarray:
    """Velocity at every represented site (windows use clamped neighbours)."""
    E = as_tilted(E)
    return chain.velocity(chain.extended(x), E)


class _System:
    """Bind a configuration shape to a flat state vector."""

    def __init__(self, x0, E: TiltedEnergy, check_band=True):
        self.template = x0
        self.E = E
        self.band = E.band
        self.check_band = check_band
        if isinstance(x0, PeriodicConfiguration):
            p = x0.p
            self._ext = lambda y: chain.extend_periodic(y, p)
            self.y0 = x0.x.copy()
        elif isinstance(x0, WindowConfiguration):
            left = x0.left_asym.at(x0.l - 1)
            right = x0.right_asym.at(x0.r + 1)
            self._ext = lambda y: np.concatenate(([left], y, [right]))
            self.y0 = x0.values.copy()
        else:
            raise TypeError(f"unsupported configuration {type(x0).__name__}")

    def f(self, y):
        return chain.velocity(self._ext(y), self.E)

    def check(self, y, t):
        if not self.check_band:
            return
        d = np.diff(self._ext(y))
        M, N = self.band
        if d.min() < M or d.max() > N:
            raise BandEscape("spacing left the model band", t=t, min_spacing=float(d.min()),
                             max_spacing=float(d.max()), band=list(self.band))

    def wrap(self, y):
        return self.template.with_values(y)


@dataclass
class Trajectory:
    """Samples of a flow line; ``x[i]`` is the state at ``t[i]``."""

    t: np.ndarray
    x: np.ndarray
    template: object = None

    def state(self, i=-1):
        return self.template.with_values(self.x[i])

    def to_rows(self, first_site: int = 0):
        """Rows ``(t, n, x)`` for CSV export."""
        n = np.arange(self.x.shape[1]) + first_site
        for ti, xi in zip(self.t, self.x):
            for a, b in zip(n, xi):
                yield float(ti), int(a), float(b)


def integrate(x0, E, settings: FlowSettings | None = None, t_end: float = 1.0,
              sample_dt: float | None = None, check_band: bool = True) -> Trajectory:
    """Integrate from ``x0`` to ``t_end``.

    Samples are taken at every accepted step, or on a uniform grid of
    spacing ``sample_dt`` when given (the step is then capped at it).
    """
    s = settings or FlowSettings()
    if t_end > s.t_cap:
        raise ValueError("t_end exceeds the settings time cap")
    E = as_tilted(E)
    sysm = _System(x0, E, check_band)
    max_dt = s.max_dt if sample_dt is None else min(s.max_dt, sample_dt)
    rk = DormandPrince(sysm.f, sysm.y0, s.dt0, s.tol, max_dt)
    ts, xs = [0.0], [sysm.y0.copy()]
    next_sample = sample_dt
    while rk.t < t_end - 1e-14:
        rk.dt = min(rk.dt, t_end - rk.t)
        if sample_dt is not None:
            rk.dt = min(rk.dt, next_sample - rk.t)
        rk.step()
        sysm.check(rk.y, rk.t)
        if sample_dt is None or rk.t >= next_sample - 1e-12:
            ts.append(rk.t)
            xs.append(rk.y.copy())
            if sample_dt is not None:
                next_sample += sample_dt
    return Trajectory(np.array(ts), np.array(xs), x0)


def relax(x0, E, t_max: float = 500.0, tol: float = 1e-9, settings: FlowSettings | None = None):
    """Run the flow until the velocity falls below ``tol`` or ``t_max``."""
    s = settings or FlowSettings()
    E = as_tilted(E)
    sysm = _System(x0, E)
    rk = DormandPrince(sysm.f, sysm.y0, s.dt0, min(s.tol, 1e-8), s.max_dt)
    while rk.t < t_max and np.max(np.abs(rk.fy)) > tol:
        rk.step()
        sysm.check(rk.y, rk.t)
    return sysm.wrap(rk.y)


# ---------------------------------------------------------------------------
# equilibria

@dataclass
class EquilibriumResult:
    """A Newton-polished periodic equilibrium and its Hessian spectrum."""

    config: PeriodicConfiguration
    residual: float
    eigenvalues: np.ndarray
    iterations: int

    @property
    def morse_index(self) -> int:
        return int(np.sum(self.eigenvalues < -self._zero_tol))

    @property
    def degenerate(self) -> bool:
        return bool(np.min(np.abs(self.eigenvalues)) <= self._zero_tol)

    @property
    def _zero_tol(self):
        return 1e-9 * max(1.0, float(np.max(np.abs(self.eigenvalues))))

    @property
    def stable(self) -> bool:
        return self.morse_index == 0 and not self.degenerate


def find_equilibrium(x0: PeriodicConfiguration, E, tol: float = 1e-12,
                     max_iter: int = 60) -> EquilibriumResult:
    """Damped Newton on the periodic equilibrium equations.

    The Jacobian is the cyclic tridiagonal ``D^2 W_{p,q}``; a singular
    Jacobian falls back to a least-squares step and is reported through
    ``EquilibriumResult.degenerate``.
    """
    E = as_tilted(E)
    p = x0.p
    x = x0.x.astype(float).copy()
    G = -chain.velocity(chain.extend_periodic(x, p), E)
    res = float(np.max(np.abs(G)))
    it = 0
    while res > tol and it < max_iter:
        it += 1
        H = chain.periodic_hessian(x, p, E)
        try:
            dx = np.linalg.solve(H, -G)
            if not np.all(np.isfinite(dx)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(H, -G, rcond=None)[0]
        lam = 1.0
        while True:
            xn = x + lam * dx
            Gn = -chain.velocity(chain.extend_periodic(xn, p), E)
            rn = float(np.max(np.abs(Gn)))
            if rn < res or lam < 1e-4:
                break
            lam *= 0.5
        if rn >= res and lam < 1e-4 and res > 1e3 * tol:
            raise NewtonDivergence("Newton stalled on periodic equilibrium", residual=res,
                                   iterations=it, x=x.tolist())
        x, G, res = xn, Gn, rn
    if not res <= max(tol, 1e3 * tol) or not np.all(np.isfinite(x)):
        raise NewtonDivergence("Newton did not converge", residual=res, iterations=it)
    ev = np.linalg.eigvalsh(chain.periodic_hessian(x, p, E))
    return EquilibriumResult(PeriodicConfiguration(p, x0.q, x), res, ev, it)


def energy(x: PeriodicConfiguration, E) -> float:
    """Periodic action ``W_{p,q}``."""
    return chain.periodic_energy(x.x, x.p, as_tilted(E))


# ---------------------------------------------------------------------------
# classification

@dataclass
class Pinned:
    equilibrium: PeriodicConfiguration
    residual: float
    t: float
    certificate: str
    kind: str = "pinned"

    @property
    def v(self):
        return 0.0


@dataclass
class Sliding:
    T: float
    v: float
    t0: float
    recurrence_error: float
    p: int
    q: int
    samples_t: np.ndarray = field(repr=False, default=None)
    samples_x: np.ndarray = field(repr=False, default=None)
    kind: str = "sliding"


@dataclass
class Undetermined:
    residual: float
    displacement: float
    t: float
    kind: str = "undetermined"

    @property
    def v(self):
        return float("nan")


def _certify(x, p, E, v):
    """Return an equilibrium bounding the monotone trajectory through ``x``."""
    if np.all(v >= 0):
        sign = 1
    elif np.all(v <= 0):
        sign = -1
    else:
        return None
    try:
        eq = find_equilibrium(PeriodicConfiguration(p, x.size, x), E, max_iter=30)
    except NumericalError:
        return None
    d = (eq.config.x - x) * sign
    if np.all(d >= -1e-12):
        return eq
    return None


def classify(x0: PeriodicConfiguration, E, settings: FlowSettings | None = None,
             escalate: bool = True):
    """Integrate from ``x0`` and return ``Pinned``, ``Sliding`` or ``Undetermined``.

    Pinned is certified either by the residual falling below ``eq_tol`` or,
    for a monotone trajectory, by a Newton equilibrium lying ahead of the
    current state (by the comparison principle the trajectory cannot pass
    it).  Sliding is detected from site 0 crossing successive integer
    levels; the state at consecutive crossings must recur up to ``+1``.
    """
    s = settings or FlowSettings()
    E = as_tilted(E)
    p, q = x0.p, x0.q
    sysm = _System(x0, E)
    rk = DormandPrince(sysm.f, sysm.y0, s.dt0, s.tol, s.max_dt)
    base = float(x0.x[0])
    up, down = base + 1.0, base - 1.0
    last_cross = None
    buf_t, buf_x = [0.0], [sysm.y0.copy()]
    t_limit = s.t_max
    next_cert = 1.0
    while True:
        if rk.t >= t_limit:
            if escalate and t_limit < s.t_cap:
                t_limit = min(4 * t_limit, s.t_cap)
                continue
            disp = float(np.max(np.abs(rk.y - x0.x)))
            return Undetermined(float(np.max(np.abs(rk.fy))), disp, rk.t)
        t0, y0, f0 = rk.step()
        sysm.check(rk.y, rk.t)
        vel = rk.fy
        res = float(np.max(np.abs(vel)))
        if res < s.eq_tol:
            try:
                eq = find_equilibrium(sysm.wrap(rk.y), E)
                return Pinned(eq.config, eq.residual, rk.t, "residual")
            except NumericalError:
                return Pinned(sysm.wrap(rk.y), res, rk.t, "residual")
        if rk.t >= next_cert:
            next_cert = rk.t * 1.5 + 1.0
            eq = _certify(rk.y, p, E, vel)
            if eq is not None:
                return Pinned(eq.config, eq.residual, rk.t, "order-bound")
        crossed = None
        if rk.y[0] >= up > y0[0]:
            crossed = up
        elif rk.y[0] <= down < y0[0]:
            crossed = down
        if crossed is None:
            buf_t.append(rk.t)
            buf_x.append(rk.y.copy())
            continue
        level = crossed
        tc, yc = rk.locate(t0, y0, f0, lambda y: y[0] - level, rk.last_h)
        sign = 1.0 if crossed == up else -1.0
        buf_t.append(tc)
        buf_x.append(yc.copy())
        if last_cross is not None:
            tp, yp = last_cross
            err = float(np.max(np.abs(yc - yp - sign)))
            if err < s.recur_tol:
                T = tc - tp
                i0 = buf_t.index(tp) if tp in buf_t else 0
                return Sliding(T, sign / T, tp, err, p, q,
                               np.array(buf_t[i0:]), np.array(buf_x[i0:]))
        last_cross = (tc, yc.copy())
        buf_t, buf_x = [tc, rk.t], [yc.copy(), rk.y.copy()]
        up, down = level + 1.0, level - 1.0


def average_velocity(x0, E, settings=None) -> float:
    """``v = 1/T`` for sliding, 0 for pinned, NaN if undetermined."""
    return classify(x0, E, settings).v


# ---------------------------------------------------------------------------
# hull function

@dataclass
class HullTable:
    alpha: np.ndarray
    X: np.ndarray
    monotone_violation: float
    wrap_error: float
    monotone: bool


def extract_hull(verdict: Sliding, omega=None, tol: float | None = None) -> HullTable:
    """Tabulate the dynamical hull function ``X`` with ``x_n(t) = X(n w + v t)``.

    Phases are taken relative to the start of the stored period.
    """
    if not isinstance(verdict, Sliding) or verdict.samples_t is None:
        raise ValueError("extract_hull needs a Sliding verdict with samples")
    q = verdict.q
    w = verdict.p / q if omega is None else float(omega)
    tol = verdict.recurrence_error * 10 + 1e-12 if tol is None else tol
    t = verdict.samples_t - verdict.samples_t[0]
    alpha = (np.arange(q)[None, :] * w + verdict.v * t[:, None]).ravel()
    X = verdict.samples_x.ravel()
    fl = np.floor(alpha)
    a, Xr = alpha - fl, X - fl
    order = np.argsort(a, kind="stable")
    a, Xr = a[order], Xr[order]
    viol = float(max(0.0, -np.min(np.diff(Xr)))) if Xr.size > 1 else 0.0
    wrap = float(np.max(np.abs(verdict.samples_x[-1] - verdict.samples_x[0] - np.sign(verdict.v))))
    return HullTable(a, Xr, viol, wrap, viol <= max(tol, 1e-9))


# ---------------------------------------------------------------------------
# depinning force

@dataclass
class DepinningResult:
    p: int
    q: int
    F_lo: float
    F_hi: float
    F_d: float
    method: str
    fold_state: PeriodicConfiguration | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"p": self.p, "q": self.q, "F_lo": self.F_lo, "F_hi": self.F_hi,
               "F_d": self.F_d, "method": self.method}
        if self.fold_state is not None:
            out["fold_state"] = self.fold_state.x.tolist()
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def _same_mod_translation(a: PeriodicConfiguration, b: PeriodicConfiguration, tol=1e-7):
    q = a.q
    for s in range(q):
        t = translate(b, s, 0)
        d = a.x - t.x
        shift = np.round(d[0])
        if np.max(np.abs(d - shift)) < tol:
            return True
    return False


def minimizers(p: int, q: int, E, n_phase: int | None = None) -> list[EquilibriumResult]:
    """Index-0 type-(p, q) equilibria reached by relaxing rigid rotations,
    deduplicated modulo translations."""
    E = as_tilted(E)
    n_phase = n_phase or 4 * q
    found: list[EquilibriumResult] = []
    for phi in (np.arange(n_phase) + 0.5) / n_phase:
        x = PeriodicConfiguration.uniform(p, q, phi / q)
        try:
            x = relax(x, E, t_max=200.0, tol=1e-7)
            eq = find_equilibrium(x, E)
        except NumericalError:
            continue
        if eq.morse_index != 0:
            continue
        if any(_same_mod_translation(eq.config, f.config) for f in found):
            continue
        found.append(eq)
    found.sort(key=lambda e: energy(e.config, E))
    return found


def _tangent(J, prev=None):
    """Unit null vector of the q x (q+1) matrix ``[J | -1]``."""
    A = np.hstack([J, -np.ones((J.shape[0], 1))])
    _, _, vt = np.linalg.svd(A)
    t = vt[-1]
    if prev is None:
        if t[-1] < 0:
            t = -t
    elif np.dot(t, prev) < 0:
        t = -t
    return t


def _correct(y_pred, y_base, t, ds, p, h, tol=1e-13, max_iter=25):
    """Newton corrector for the pseudo-arclength system."""
    y = y_pred.copy()
    q = y.size - 1
    for _ in range(max_iter):
        E = TiltedEnergy(h, y[-1])
        G = -chain.velocity(chain.extend_periodic(y[:-1], p), E)
        c = np.dot(t, y - y_base) - ds
        r = np.append(G, c)
        if np.max(np.abs(r)) < tol:
            return y, True
        J = chain.periodic_hessian(y[:-1], p, E)
        A = np.zeros((q + 1, q + 1))
        A[:q, :q] = J
        A[:q, q] = -1.0
        A[q] = t
        try:
            y = y - np.linalg.solve(A, r)
        except np.linalg.LinAlgError:
            return y, False
        if not np.all(np.isfinite(y)):
            return y, False
    E = TiltedEnergy(h, y[-1])
    G = -chain.velocity(chain.extend_periodic(y[:-1], p), E)
    return y, bool(np.max(np.abs(G)) < 1e-10)


def _monitor(y, p, h):
    """Eigenvalue of ``D^2 W`` closest to zero (signed)."""
    J = chain.periodic_hessian(y[:-1], p, TiltedEnergy(h, y[-1]))
    ev = np.linalg.eigvalsh(J)
    return float(ev[np.argmin(np.abs(ev))]), J


def continue_to_fold(start: PeriodicConfiguration, h, ds0: float = 0.02, tol_F: float = 1e-10,
                     max_steps: int = 5000):
    """Follow an equilibrium branch from ``F = 0`` to its first fold.

    Returns ``(F_fold, state, diagnostics)``.
    """
    p = start.p
    y = np.append(start.x, 0.0)
    lam, J = _monitor(y, p, h)
    t = _tangent(J)
    ds = ds0
    for step in range(max_steps):
        y_new, ok = _correct(y + ds * t, y, t, ds, p, h)
        if not ok:
            ds *= 0.5
            if ds < 1e-12:
                raise NumericalError("continuation step underflow", F=float(y[-1]))
            continue
        lam_new, J_new = _monitor(y_new, p, h)
        t_new = _tangent(J_new, t)
        if lam_new * lam < 0 or t_new[-1] < 0:
            # secant on the monitored eigenvalue as a function of arclength
            s0, s1, l0, l1 = 0.0, ds, lam, lam_new
            best = y_new
            for _ in range(60):
                if l1 == l0:
                    break
                s2 = s1 - l1 * (s1 - s0) / (l1 - l0)
                s2 = min(max(s2, 0.0), ds)
                y2, ok2 = _correct(y + s2 * t, y, t, s2, p, h)
                if not ok2:
                    break
                l2, _ = _monitor(y2, p, h)
                best = y2
                s0, l0, s1, l1 = s1, l1, s2, l2
                if abs(l2) < 1e-13 or abs(s1 - s0) < 1e-15:
                    break
            F = float(best[-1])
            cfg = PeriodicConfiguration(p, start.q, best[:-1])
            return F, cfg, {"steps": step + 1, "fold_eigenvalue": float(l1)}
        y, lam, t = y_new, lam_new, t_new
        ds = min(ds * 1.3, 0.1)
    raise NumericalError("no fold found along equilibrium branch", F=float(y[-1]))


def _depin_continuation(p, q, h, tol_F):
    mins = minimizers(p, q, TiltedEnergy(h, 0.0))
    if not mins:
        raise NumericalError("no minimizer found at F=0", p=p, q=q)
    if all(m.degenerate for m in mins):
        cfg = mins[0].config
        return DepinningResult(p, q, 0.0, 0.0, 0.0, "continuation", cfg,
                               {"degenerate_minimizer": True})
    best = None
    folds = []
    for m in mins:
        if m.degenerate:
            continue
        F, cfg, diag = continue_to_fold(m.config, h)
        folds.append(F)
        if best is None or F > best[0]:
            best = (F, cfg, diag)
    F, cfg, diag = best
    err = min(tol_F / 4, 1e-10 * max(1.0, F))
    diag = dict(diag, branch_folds=folds)
    return DepinningResult(p, q, max(F - err, 0.0), F + err, F, "continuation", cfg, diag)


def _depin_bisection(p, q, h, tol_F, settings):
    s = settings or FlowSettings.for_model(h)
    mins = minimizers(p, q, TiltedEnergy(h, 0.0))
    if not mins:
        raise NumericalError("no minimizer found at F=0", p=p, q=q)
    start = mins[0].config
    F_lo, x_lo = 0.0, start
    F_hi = None
    trial = 0.05
    while F_hi is None:
        v = classify(x_lo, TiltedEnergy(h, trial), s)
        if isinstance(v, Sliding):
            F_hi = trial
        elif isinstance(v, Pinned):
            F_lo, x_lo = trial, v.equilibrium
            trial *= 2
            if trial > 1e3:
                raise NumericalError("no sliding force found below 1e3", p=p, q=q)
        else:
            return DepinningResult(p, q, F_lo, trial, 0.5 * (F_lo + trial), "bisection", x_lo,
                                   {"undetermined_at": trial})
    diag = {}
    while F_hi - F_lo > tol_F:
        mid = 0.5 * (F_lo + F_hi)
        v = classify(x_lo, TiltedEnergy(h, mid), s)
        if isinstance(v, Pinned):
            F_lo, x_lo = mid, v.equilibrium
        elif isinstance(v, Sliding):
            F_hi = mid
        else:
            diag["undetermined_at"] = mid
            break
    return DepinningResult(p, q, F_lo, F_hi, 0.5 * (F_lo + F_hi), "bisection", x_lo, diag)


def depinning_force(p: int, q: int, h, method: str = "continuation", tol_F: float = 1e-6,
                    settings: FlowSettings | None = None) -> DepinningResult:
    """Depinning force ``F_d(p/q)``.

    ``method`` is ``"bisection"``, ``"continuation"`` or ``"cross-validated"``
    (runs both and requires agreement within ``5 tol_F``).
    """
    if tol_F <= 0:
        raise ValueError("tol_F must be positive")
    if isinstance(h, TiltedEnergy):
        h = h.base
    if method == "continuation":
        return _depin_continuation(p, q, h, tol_F)
    if method == "bisection":
        return _depin_bisection(p, q, h, tol_F, settings)
    if method in ("cross-validated", "cross"):
        a = _depin_bisection(p, q, h, tol_F, settings)
        b = _depin_continuation(p, q, h, tol_F)
        if abs(a.F_d - b.F_d) > 5 * tol_F:
            raise InternalConsistencyError("bisection and continuation disagree",
                                           bisection=a.F_d, continuation=b.F_d, tol_F=tol_F)
        lo, hi = max(a.F_lo, b.F_lo), min(a.F_hi, b.F_hi)
        if lo > hi:
            lo, hi = min(a.F_lo, b.F_lo), max(a.F_hi, b.F_hi)
        return DepinningResult(p, q, lo, hi, b.F_d, "cross-validated", b.fold_state,
                               {"bisection": a.to_dict(), "continuation": b.to_dict()})
    raise ValueError(f"unknown method {method!r}")


def max_min_force(p: int, q: int, h, n_grid: int = 400) -> float:
    """Depinning force from ``max_x min_n (h2(x_{n-1},x_n) + h1(x_n,x_{n+1}))``
    for q = 1, an independent check of the continuation value."""
    if q != 1:
        raise ValueError("max-min formula implemented for q = 1 only")
    from scipy.optimize import minimize_scalar

    def g(x):
        d = h.eval(x, x + p)
        return -(d.h1 + d.h2)

    xs = np.linspace(0, 1, n_grid, endpoint=False)
    i = int(np.argmin(g(xs)))
    r = minimize_scalar(lambda s: float(g(s)), bracket=(xs[i] - 1 / n_grid, xs[i], xs[i] + 1 / n_grid),
                        tol=1e-12)
    return float(-r.fun)
