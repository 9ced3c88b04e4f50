"""The area-preserving twist map of a chain.

Equilibria of the tilted chain correspond to orbits of

    p  = -h1(x, x') + F,
    p' =  h2(x, x'),

on the cylinder.  This module iterates the map (solving the implicit
first line for ``x'``), lifts equilibria to orbits, computes residues two
independent ways, grows stable and unstable manifolds of hyperbolic
periodic orbits, measures lobe areas against action differences and
decides whether an invariant circle of periodic orbits exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chain
from .configs import PeriodicConfiguration, WindowConfiguration, translate
from .disc import _window_newton
from .errors import (BracketError, InternalConsistencyError, NotAnEquilibrium, NumericalError,
                     PreconditionError)
from .flow import find_equilibrium, minimizers
from .model import TiltedEnergy, as_tilted

ROOT_TOL = 1e-13


@dataclass(frozen=True)
class CylinderPoint:
    x: float
    p: float

    def as_array(self):
        return np.array([self.x, self.p])


# ---------------------------------------------------------------------------
# the map

def _monotone_solve(fun, guess, slope_sign, c, max_iter=100):
    """Vectorised safeguarded Newton for a monotone function.

    ``fun(z)`` returns ``(value, derivative)``; its derivative has sign
    ``slope_sign`` with modulus at least ``c``, which gives an initial
    bracket of half-width ``|value|/c`` around ``guess``.
    """
    z = np.array(guess, dtype=float)
    v, dv = fun(z)
    rad = np.abs(v) / c * 1.0000001 + 1e-15
    lo, hi = z - rad, z + rad
    flo = fun(lo)[0] * slope_sign
    fhi = fun(hi)[0] * slope_sign
    for _ in range(60):
        bad = (flo > 0) | (fhi < 0)
        if not np.any(bad):
            break
        lo = np.where(flo > 0, lo - 2 * rad, lo)
        hi = np.where(fhi < 0, hi + 2 * rad, hi)
        rad = rad * 2
        flo = fun(lo)[0] * slope_sign
        fhi = fun(hi)[0] * slope_sign
    else:
        raise BracketError("could not bracket the twist-map root")
    for _ in range(max_iter):
        v, dv = fun(z)
        s = v * slope_sign
        lo = np.where(s < 0, z, lo)
        hi = np.where(s > 0, z, hi)
        conv = np.abs(v) < 1e-16 * (1 + np.abs(z))
        zn = z - v / dv
        out = (zn < lo) | (zn > hi) | ~np.isfinite(zn)
        zn = np.where(conv, z, np.where(out, 0.5 * (lo + hi), zn))
        done = np.all(conv | (np.abs(zn - z) <= ROOT_TOL * (1 + np.abs(z))))
        z = zn
        if done:
            break
    return z


def apply(E, pt):
    """One step of the map.  ``pt`` is a ``CylinderPoint`` or an ``(..., 2)``
    array of ``(x, p)`` rows (vectorised)."""
    E = as_tilted(E)
    scalar = isinstance(pt, CylinderPoint)
    a = pt.as_array() if scalar else np.asarray(pt, dtype=float)
    x, p = a[..., 0], a[..., 1]

    def fun(xp):
        d = E.eval(x, xp)
        return -d.h1 - p, -d.h12

    xp = _monotone_solve(fun, x + p, 1.0, E.c)
    out = np.stack([xp, E.eval(x, xp).h2], axis=-1)
    return CylinderPoint(float(out[0]), float(out[1])) if scalar else out


def inverse(E, pt):
    """Inverse step: solve ``p' = h2(x, x')`` for ``x``, then ``p = -h1 + F``."""
    E = as_tilted(E)
    scalar = isinstance(pt, CylinderPoint)
    a = pt.as_array() if scalar else np.asarray(pt, dtype=float)
    xp, pp = a[..., 0], a[..., 1]

    def fun(x):
        d = E.eval(x, xp)
        return d.h2 - pp, d.h12

    x = _monotone_solve(fun, xp - pp, -1.0, E.c)
    out = np.stack([x, -E.eval(x, xp).h1], axis=-1)
    return CylinderPoint(float(out[0]), float(out[1])) if scalar else out


def step_jacobian(E, x, xp) -> np.ndarray:
    """Jacobian of one map step at the bond ``(x, x')`` (determinant 1)."""
    d = as_tilted(E).eval(x, xp)
    h11, h12, h22 = float(d.h11), float(d.h12), float(d.h22)
    return np.array([[-h11 / h12, -1.0 / h12], [h12 - h22 * h11 / h12, -h22 / h12]])


def orbit_of_config(x, E, tol: float = 1e-9) -> np.ndarray:
    """Lift an equilibrium to its orbit points ``(x_n, p_n)``.

    For periodic states the q points of one period are returned; for
    windows the points of sites ``l..r``.
    """
    E = as_tilted(E)
    ext = chain.extended(x)
    res = np.max(np.abs(chain.velocity(ext, E)))
    if res > tol:
        raise NotAnEquilibrium("configuration is not an equilibrium", residual=float(res))
    xs = ext[1:-1]
    ps = -E.eval(xs, ext[2:]).h1
    pts = np.stack([xs, ps], axis=-1)
    nxt = apply(E, pts)
    succ = np.stack([ext[2:], E.eval(xs, ext[2:]).h2], axis=-1)
    if np.max(np.abs(nxt - succ)) > tol:
        raise InternalConsistencyError("map does not reproduce the orbit successor",
                                       error=float(np.max(np.abs(nxt - succ))))
    return pts


# ---------------------------------------------------------------------------
# periodic orbits

@dataclass
class PeriodicOrbit:
    p: int
    q: int
    config: PeriodicConfiguration
    points: np.ndarray
    tau: float
    tau_det: float
    tau_mono: float
    monodromy: np.ndarray
    E: TiltedEnergy = field(repr=False)

    @property
    def classification(self) -> str:
        return classify_tau(self.tau)

    @property
    def hyperbolic(self) -> bool:
        return self.classification in ("hyperbolic", "inverse-hyperbolic")

    def to_dict(self):
        return {"p": self.p, "q": self.q, "x": self.config.x.tolist(),
                "points": self.points.tolist(), "tau": self.tau, "tau_det": self.tau_det,
                "tau_monodromy": self.tau_mono, "classification": self.classification}


def classify_tau(tau: float, tol: float = 1e-12) -> str:
    if abs(tau) <= tol or abs(tau + 4) <= tol:
        return "parabolic"
    if tau > 0:
        return "hyperbolic"
    if tau > -4:
        return "elliptic"
    return "inverse-hyperbolic"


def monodromy(config: PeriodicConfiguration, E) -> np.ndarray:
    ext = chain.extended(config)
    M = np.eye(2)
    for n in range(config.q):
        M = step_jacobian(E, ext[n + 1], ext[n + 2]) @ M
    return M


def residue_det(config: PeriodicConfiguration, E) -> float:
    """``det D^2 W_{p,q} / prod(-h12)`` over one period."""
    E = as_tilted(E)
    H = chain.periodic_hessian(config.x, config.p, E)
    ext = chain.extended(config)
    h12 = E.eval(ext[1:-1], ext[2:]).h12
    return float(np.linalg.det(H) / np.prod(-h12))


def find_periodic_orbit(p: int, q: int, E, guess) -> PeriodicOrbit:
    """Polish ``guess`` to an equilibrium and lift it to a periodic orbit.

    The residue ``tau = lambda + 1/lambda - 2`` is computed from the Hessian
    determinant and from the monodromy trace; they must agree to 1e-8.
    """
    E = as_tilted(E)
    if not isinstance(guess, PeriodicConfiguration):
        g = np.atleast_1d(np.asarray(guess, dtype=float))
        if g.size == 1 and q > 1:
            g = g[0] + np.arange(q) * p / q
        guess = PeriodicConfiguration(p, q, g)
    cfg = find_equilibrium(guess, E).config
    pts = orbit_of_config(cfg, E)
    M = monodromy(cfg, E)
    t_mono = float(np.trace(M) - 2.0)
    t_det = residue_det(cfg, E)
    scale = max(1.0, abs(t_det))
    if abs(t_mono - t_det) > 1e-8 * scale:
        raise InternalConsistencyError("residue from determinant and monodromy disagree",
                                       tau_det=t_det, tau_monodromy=t_mono)
    return PeriodicOrbit(p, q, cfg, pts, t_det, t_det, t_mono, M, E)


def translate_orbit(orbit: PeriodicOrbit, q0: int, p0: int) -> PeriodicOrbit:
    cfg = translate(orbit.config, q0, p0)
    return PeriodicOrbit(orbit.p, orbit.q, cfg, orbit_of_config(cfg, orbit.E), orbit.tau,
                         orbit.tau_det, orbit.tau_mono, monodromy(cfg, orbit.E), orbit.E)


# ---------------------------------------------------------------------------
# invariant manifolds

BRANCHES = ("unstable-right", "unstable-left", "stable-right", "stable-left")


@dataclass
class ManifoldArc:
    """Polyline of a manifold branch from its base point outward.

    ``u`` is the fundamental-domain parameter: the point with parameter
    ``j + s`` is ``G^j`` of the seed ``P + eps * mu^s * v``.
    """

    orbit: PeriodicOrbit = field(repr=False)
    branch: str
    points: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    eps: float
    mu: float
    vec: np.ndarray
    power: int = 1

    @property
    def base(self) -> np.ndarray:
        return self.orbit.points[0]

    @property
    def stable(self) -> bool:
        return self.branch.startswith("stable")

    def _map(self, pts):
        return _G(self.orbit, pts, self.stable, self.power)

    def seed(self, frac):
        frac = np.asarray(frac, dtype=float)
        return self.base + self.eps * (self.mu ** frac)[..., None] * self.vec

    def point_at(self, u):
        """Manifold points at parameters ``u`` (vectorised)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        j = np.floor(u).astype(int)
        pts = self.seed(u - j)
        for level in range(int(j.max()) + 1 if j.size else 0):
            mask = j > level
            if np.any(mask):
                pts[mask] = self._map(pts[mask])
        return pts

    def to_rows(self):
        for si, (x, p) in zip(self.s, self.points):
            yield float(si), float(x), float(p)


def _G(orbit, pts, backwards, power=1):
    """``shift o Phi^q`` (or its inverse) applied ``power`` times."""
    E = orbit.E
    out = np.array(pts, dtype=float)
    for _ in range(power):
        if backwards:
            out = out + np.array([orbit.p, 0.0])
            for _ in range(orbit.q):
                out = inverse(E, out)
        else:
            for _ in range(orbit.q):
                out = apply(E, out)
            out = out - np.array([orbit.p, 0.0])
    return out


def _eigen(orbit: PeriodicOrbit, stable: bool):
    lam, vecs = np.linalg.eig(orbit.monodromy)
    lam, vecs = lam.real, vecs.real
    i = int(np.argmin(np.abs(lam))) if stable else int(np.argmax(np.abs(lam)))
    v = vecs[:, i] / np.linalg.norm(vecs[:, i])
    return float(lam[i]), v


def grow_manifold(orbit: PeriodicOrbit, branch: str, target_arclength: float,
                  max_seg: float = 1e-3, eps: float | None = None, max_levels: int = 400,
                  max_points: int = 100000) -> ManifoldArc:
    """Grow one branch of the stable or unstable manifold of ``orbit``.

    A fundamental segment seeded along the eigenvector is iterated under
    ``shift o Phi^q`` (its inverse for stable branches) and refined by
    parameter bisection until consecutive points are ``max_seg`` apart.
    Growth stops at ``target_arclength``, at ``max_points`` or when the
    branch stalls on another fixed point (a level shorter than 1e-5 of the
    longest one, or growing again after having shrunk).
    """
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    if not orbit.hyperbolic:
        raise PreconditionError("manifolds need a hyperbolic orbit", tau=orbit.tau)
    stable = branch.startswith("stable")
    lam, v = _eigen(orbit, stable)
    mu = abs(1.0 / lam if stable else lam)
    power = 1
    if lam < 0:
        power, mu = 2, mu * mu
    right = branch.endswith("right")
    if (v[0] < 0) == right or (abs(v[0]) < 1e-14 and (v[1] < 0) == right):
        v = -v
    if eps is None:
        eps = 1e-7 * (mu - 1.0) / mu
    arc = ManifoldArc(orbit, branch, np.empty((0, 2)), np.empty(0), np.empty(0), eps, mu, v, power)

    sig = np.linspace(0.0, 1.0, 9)
    level_pts = arc.seed(sig)
    all_u, all_pts = [np.array([-np.inf])], [arc.base[None, :]]
    total = float(np.linalg.norm(level_pts[0] - arc.base))
    max_len = prev_len = 0.0
    for level in range(max_levels):
        if level > 0:
            level_pts = arc._map(level_pts)
        # refine by parameter bisection
        while True:
            gaps = np.linalg.norm(np.diff(level_pts, axis=0), axis=1)
            bad = np.nonzero(gaps > max_seg)[0]
            if bad.size == 0 or sig.size > max_points:
                break
            mids = 0.5 * (sig[bad] + sig[bad + 1])
            new = arc.point_at(level + mids)
            sig = np.insert(sig, bad + 1, mids)
            level_pts = np.insert(level_pts, bad + 1, new, axis=0)
        # the first point of a level repeats the last one of the previous level
        start = 0 if level == 0 else 1
        prev = all_pts[-1][-1]
        seg = np.linalg.norm(np.diff(np.vstack([prev, level_pts[start:]]), axis=0), axis=1)
        s_level = total + np.cumsum(seg)
        if s_level[-1] >= target_arclength:
            keep = int(np.searchsorted(s_level, target_arclength)) + 1
            all_u.append(level + sig[start:][:keep])
            all_pts.append(level_pts[start:][:keep])
            break
        all_u.append(level + sig[start:])
        all_pts.append(level_pts[start:])
        length = float(s_level[-1] - total)
        total = float(s_level[-1])
        # the branch has run into another fixed point; iterating further
        # only amplifies roundoff along that point's unstable direction
        if level > 0 and (length < 1e-5 * max_len or (prev_len < 0.5 * max_len and length > prev_len)):
            break
        max_len = max(max_len, length)
        prev_len = length
        if sum(a.size for a in all_u) > max_points:
            break
    pts = np.concatenate(all_pts)
    u = np.concatenate(all_u)
    s = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))))
    arc.points, arc.u, arc.s = pts, u, s
    return arc


# ---------------------------------------------------------------------------
# intersections and action-area

@dataclass
class Intersection:
    point: np.ndarray
    su: float
    ss: float
    uu: float
    us: float


def _segment_crossings(P, Q, chunk=2048):
    """All crossings between polylines P and Q as ``(i, ti, j, tj)``."""
    a0, a1 = P[:-1], P[1:]
    b0, b1 = Q[:-1], Q[1:]
    amin, amax = np.minimum(a0, a1), np.maximum(a0, a1)
    bmin, bmax = np.minimum(b0, b1), np.maximum(b0, b1)
    out = []
    for s in range(0, len(a0), chunk):
        sl = slice(s, s + chunk)
        ov = ((amin[sl, None, 0] <= bmax[None, :, 0]) & (bmin[None, :, 0] <= amax[sl, None, 0])
              & (amin[sl, None, 1] <= bmax[None, :, 1]) & (bmin[None, :, 1] <= amax[sl, None, 1]))
        ii, jj = np.nonzero(ov)
        if ii.size == 0:
            continue
        ii = ii + s
        r = a1[ii] - a0[ii]
        d = b1[jj] - b0[jj]
        w = b0[jj] - a0[ii]
        den = r[:, 0] * d[:, 1] - r[:, 1] * d[:, 0]
        ok = np.abs(den) > 1e-300
        ti = np.where(ok, (w[:, 0] * d[:, 1] - w[:, 1] * d[:, 0]) / np.where(ok, den, 1), -1)
        tj = np.where(ok, (w[:, 0] * r[:, 1] - w[:, 1] * r[:, 0]) / np.where(ok, den, 1), -1)
        good = ok & (ti >= 0) & (ti < 1) & (tj >= 0) & (tj < 1)
        for i, t1, j, t2 in zip(ii[good], ti[good], jj[good], tj[good]):
            out.append((int(i), float(t1), int(j), float(t2)))
    return out


def _param_at(arc, i, t):
    u0, u1 = arc.u[i], arc.u[i + 1]
    if not np.isfinite(u0):
        u0 = u1 - 1.0
    return u0 + t * (u1 - u0)


def find_intersections(arcU: ManifoldArc, arcS: ManifoldArc, refine: bool = True,
                       exclude_base: float = 1e-6, avoid=(), avoid_radius: float = 0.0,
                       limit: int | None = None, order: str = "u") -> list[Intersection]:
    """Transverse crossings of two arcs, ordered by arclength along ``arcU``
    (``order="u"``) or by the summed arclength along both arcs (``"sum"``,
    which puts the primary homoclinic points first).

    Crossings within ``avoid_radius`` of any point in ``avoid`` are dropped.
    The first ``limit`` crossings (all by default) are polished by Newton
    on the pair of fundamental parameters so that they lie on the true
    manifolds.
    """
    raw = []
    for i, ti, j, tj in _segment_crossings(arcU.points, arcS.points):
        su = arcU.s[i] + ti * (arcU.s[i + 1] - arcU.s[i])
        ss = arcS.s[j] + tj * (arcS.s[j + 1] - arcS.s[j])
        if su < exclude_base or ss < exclude_base:
            continue
        pt = arcU.points[i] + ti * (arcU.points[i + 1] - arcU.points[i])
        if any(np.linalg.norm(pt - np.asarray(c)) <= avoid_radius for c in avoid):
            continue
        raw.append((su, ss, i, ti, j, tj, pt))
    if order not in ("u", "sum"):
        raise ValueError(f"unknown order {order!r}")
    raw.sort(key=(lambda r: r[0]) if order == "u" else (lambda r: r[0] + r[1]))
    if limit is not None:
        raw = raw[:limit]
    out = []
    for su, ss, i, ti, j, tj, pt in raw:
        uu, us = _param_at(arcU, i, ti), _param_at(arcS, j, tj)
        if refine and i > 0 and j > 0:
            uu, us, pt = _polish_crossing(arcU, arcS, uu, us, pt)
        out.append(Intersection(np.asarray(pt, dtype=float), float(su), float(ss), float(uu), float(us)))
    return out


def _polish_crossing(arcU, arcS, uu, us, pt, iters=12):
    h = 1e-7
    for _ in range(iters):
        A = arcU.point_at([uu, uu + h])
        B = arcS.point_at([us, us + h])
        r = A[0] - B[0]
        if np.max(np.abs(r)) < 1e-14:
            break
        J = np.column_stack([(A[1] - A[0]) / h, -(B[1] - B[0]) / h])
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        uu, us = uu + du[0], us + du[1]
        if np.max(np.abs(du)) < 1e-15:
            break
    return uu, us, arcU.point_at([uu])[0]


def _area_between(arc: ManifoldArc, u_a: float, u_b: float, max_seg=2e-4) -> float:
    """``int y dx`` along ``arc`` from parameter ``u_a`` to ``u_b``.

    The polyline vertices in between are used, refined by exact
    manifold points so no chord exceeds ``max_seg``; the result uses the
    trapezoid rule with a Richardson correction from halving.
    """
    lo, hi = min(u_a, u_b), max(u_a, u_b)
    inner = arc.u[(arc.u > lo) & (arc.u < hi)]
    u = np.concatenate(([lo], inner, [hi]))
    pts = arc.point_at(u)
    while True:
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        bad = np.nonzero(gaps > max_seg)[0]
        if bad.size == 0:
            break
        mids = 0.5 * (u[bad] + u[bad + 1])
        pts = np.insert(pts, bad + 1, arc.point_at(mids), axis=0)
        u = np.insert(u, bad + 1, mids)
    # Richardson: coarse rule on every other point
    fine = float(np.sum(0.5 * (pts[1:, 1] + pts[:-1, 1]) * np.diff(pts[:, 0])))
    if len(u) >= 5 and len(u) % 2 == 1:
        c = pts[::2]
        coarse = float(np.sum(0.5 * (c[1:, 1] + c[:-1, 1]) * np.diff(c[:, 0])))
        fine = fine + (fine - coarse) / 3.0
    return fine if u_b >= u_a else -fine


def _align_asym(asym: PeriodicConfiguration, n: np.ndarray, vals: np.ndarray):
    """Translate ``asym`` by ``T_{a,b}`` to best match ``vals`` at sites ``n``."""
    best = None
    for a in range(asym.q):
        t = translate(asym, a, 0)
        b = float(np.round(np.mean(vals - t.at(n))))
        cand = translate(t, 0, int(b))
        err = float(np.max(np.abs(vals - cand.at(n))))
        if best is None or err < best[0]:
            best = (err, cand)
    return best[1]


def heteroclinic_orbit(point, arcU: ManifoldArc, arcS: ManifoldArc, pad: int = 40,
                       approach: float = 1e-4, max_steps: int = 400) -> WindowConfiguration:
    """Configuration of the orbit through an intersection point of an
    unstable arc of ``x-`` and a stable arc of ``x+``, polished by Newton on
    a window with clamped asymptotes."""
    E = arcU.orbit.E
    pt = np.asarray(point, dtype=float)
    base_u, base_s = arcU.orbit, arcS.orbit
    fwd, bwd = [pt], []
    cur = pt
    for _ in range(max_steps):
        cur = apply(E, cur)
        fwd.append(cur)
        if np.min(np.abs(cur[0] - (base_s.config.x[:, None] + np.arange(-50, 51)[None, :] * 1.0)).ravel()) < approach \
                and _near_orbit(cur, base_s):
            break
    cur = pt
    for _ in range(max_steps):
        cur = inverse(E, cur)
        bwd.append(cur)
        if _near_orbit(cur, base_u):
            break
    xs = np.array([b[0] for b in bwd[::-1]] + [f[0] for f in fwd])
    l = -len(bwd)
    n = np.arange(l, l + xs.size)
    q = base_u.q
    left = _align_asym(base_u.config, n[:q], xs[:q])
    right = _align_asym(base_s.config, n[-q:], xs[-q:])
    n_full = np.arange(l - pad, n[-1] + pad + 1)
    vals = np.concatenate([left.at(n_full[:pad]), xs, right.at(n_full[-pad:])])
    w = WindowConfiguration(l - pad, vals, left, right)
    w, _ = _window_newton(w, E)
    return w


def _near_orbit(pt, orbit, tol=1e-4):
    d = pt[None, :] - orbit.points
    d[:, 0] -= np.round(d[:, 0] / max(abs(orbit.p), 1)) * max(abs(orbit.p), 1) if orbit.p else np.round(d[:, 0])
    return bool(np.min(np.linalg.norm(d, axis=1)) < tol)


def action_difference(wa: WindowConfiguration, wb: WindowConfiguration, E) -> tuple[float, float]:
    """``sum_n h_F(b_n, b_{n+1}) - h_F(a_n, a_{n+1})`` and the largest tail term."""
    E = as_tilted(E)
    if wa.left_asym != wb.left_asym or wa.right_asym != wb.right_asym:
        raise NumericalError("orbits have different asymptotic phases; sum not convergent")
    lo = min(wa.l, wb.l) - 1
    hi = max(wa.r, wb.r) + 1
    n = np.arange(lo, hi + 1)
    a, b = wa.at(n), wb.at(n)
    terms = E.energy(b[:-1], b[1:]) - E.energy(a[:-1], a[1:])
    return float(np.sum(terms)), float(max(abs(terms[0]), abs(terms[-1])))


@dataclass
class ActionArea:
    area: float
    dW: float
    tail: float

    def to_dict(self):
        return {"area": self.area, "dW": self.dW, "tail": self.tail,
                "difference": self.area - self.dW}


def action_area(arcU: ManifoldArc, arcS: ManifoldArc, ptA: Intersection, ptB: Intersection) -> ActionArea:
    """Lobe area between two intersections against the action difference.

    ``area = int_U(A->B) y dx - int_S(A->B) y dx`` and
    ``dW = sum_n [h(orbit B) - h(orbit A)]``.
    """
    if ptA is ptB or (abs(ptA.uu - ptB.uu) < 1e-15 and abs(ptA.us - ptB.us) < 1e-15):
        return ActionArea(0.0, 0.0, 0.0)
    area = _area_between(arcU, ptA.uu, ptB.uu) - _area_between(arcS, ptA.us, ptB.us)
    wa = heteroclinic_orbit(ptA.point, arcU, arcS)
    wb = heteroclinic_orbit(ptB.point, arcU, arcS)
    dW, tail = action_difference(wa, wb, arcU.orbit.E)
    return ActionArea(float(area), dW, tail)


# ---------------------------------------------------------------------------
# circle verdict

def _profile_residual(p, q, E, x0):
    """``dW/dx_0`` after minimising over the other sites with ``x_0`` fixed."""
    if q == 1:
        d = E.eval(x0, x0 + p)
        return float(d.h1 + d.h2)
    x = x0 + np.arange(q) * p / q
    for _ in range(60):
        ext = chain.extend_periodic(x, p)
        G = -chain.velocity(ext, E)
        if np.max(np.abs(G[1:])) < 1e-13:
            break
        H = chain.periodic_hessian(x, p, E)
        try:
            x[1:] -= np.linalg.solve(H[1:, 1:], G[1:])
        except np.linalg.LinAlgError:
            break
    return float(-chain.velocity(chain.extend_periodic(x, p), E)[0])


def _polyline_distance(P, B):
    """Distance from each point of ``P`` to the polyline ``B`` and the index
    of the nearest segment."""
    a0, d = B[:-1], np.diff(B, axis=0)
    dd = np.maximum((d * d).sum(1), 1e-300)
    best = np.full(len(P), np.inf)
    seg = np.zeros(len(P), dtype=int)
    for s in range(0, len(P), 256):
        w = P[s:s + 256, None, :] - a0[None, :, :]
        t = np.clip((w * d[None]).sum(-1) / dd[None], 0.0, 1.0)
        r = np.linalg.norm(w - t[..., None] * d[None], axis=-1)
        j = np.argmin(r, axis=1)
        best[s:s + 256] = r[np.arange(len(j)), j]
        seg[s:s + 256] = j
    return best, seg


def _arc_distance(arcA: ManifoldArc, arcB: ManifoldArc, mask, n_probe=200, refine_below=1e-6):
    """Largest distance from probe points of ``arcA`` (where ``mask``) to
    ``arcB``.  Probes closer than ``refine_below`` to the polyline are
    refined against the true curve by golden-section search on the
    fundamental parameter, removing the chord error."""
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return float("inf")
    idx = idx[np.linspace(0, idx.size - 1, min(n_probe, idx.size)).astype(int)]
    P = arcA.points[idx]
    dist, j = _polyline_distance(P, arcB.points)
    near = dist < refine_below
    if np.any(near):
        P, j = P[near], np.clip(j[near], 1, len(arcB.u) - 2)
        lo, hi = arcB.u[j - 1], arcB.u[j + 2 if j.max() + 2 < len(arcB.u) else j + 1]
        lo = np.where(np.isfinite(lo), lo, arcB.u[j] - 1.0)
        g = (math.sqrt(5) - 1) / 2
        a, b = lo.copy(), hi.copy()
        for _ in range(50):
            c1 = b - g * (b - a)
            c2 = a + g * (b - a)
            f1 = np.linalg.norm(arcB.point_at(c1) - P, axis=1)
            f2 = np.linalg.norm(arcB.point_at(c2) - P, axis=1)
            left = f1 < f2
            b = np.where(left, c2, b)
            a = np.where(left, a, c1)
        # normal distance to the local tangent: insensitive to the residual
        # along-curve offset of the parameter search
        um = 0.5 * (a + b)
        du = np.maximum(1e-6 * np.abs(um), 1e-9)
        C, Cp, Cm = arcB.point_at(um), arcB.point_at(um + du), arcB.point_at(um - du)
        T = Cp - Cm
        w = P - C
        tn = np.linalg.norm(T, axis=1)
        normal = np.abs(w[:, 0] * T[:, 1] - w[:, 1] * T[:, 0]) / np.where(tn > 0, tn, 1.0)
        dist[near] = np.where(tn > 0, normal, np.linalg.norm(w, axis=1))
    return float(np.max(dist))


@dataclass
class GapResult:
    lower: list
    upper: list
    advancing_distance: float
    retreating_distance: float
    advancing: bool
    retreating: bool
    lobe: dict | None = None


@dataclass
class CircleVerdict:
    kind: str
    gaps: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "diagnostics": self.diagnostics,
                "gaps": [{"lower": g.lower, "upper": g.upper,
                          "advancing_distance": g.advancing_distance,
                          "retreating_distance": g.retreating_distance,
                          "advancing": g.advancing, "retreating": g.retreating,
                          "lobe": g.lobe} for g in self.gaps]}


def _gap_chain(orbits):
    """Consecutive pairs of minimizing orbits (as translated orbits) from
    the first one up to its translate by ``T_{0,1}``."""
    base = orbits[0]
    cands = []
    for o in orbits:
        for a in range(o.q):
            t = translate(o.config, a, 0)
            b = math.floor(base.config.x[0] - t.x[0])
            for bb in (b, b + 1, b + 2):
                cfg = translate(t, 0, bb)
                if base.config.x[0] - 1e-9 <= cfg.x[0] <= base.config.x[0] + 1 + 1e-9:
                    cands.append((cfg.x[0], o, a, bb))
    cands.sort(key=lambda c: c[0])
    uniq = []
    for c in cands:
        if not uniq or c[0] - uniq[-1][0] > 1e-9:
            uniq.append(c)
    chain_ = [translate_orbit(o, a, bb) for _, o, a, bb in uniq]
    return list(zip(chain_[:-1], chain_[1:]))


def circle_verdict(p: int, q: int, h, coincide_tol: float = 1e-9, split_tol: float = 1e-6,
                   max_seg: float = 1e-3, grid: int = 16) -> CircleVerdict:
    """Decide whether the untilted map has a rotational invariant circle of
    type-(p, q) orbits and of which kind (see the module docstring)."""
    E = TiltedEnergy(h.base if isinstance(h, TiltedEnergy) else h, 0.0)
    xs = (np.arange(grid) + 0.25) / grid
    prof = max(abs(_profile_residual(p, q, E, x0)) for x0 in xs)
    if prof < 1e-10:
        return CircleVerdict("CircleOfPeriodic", [], {"profile_residual": prof})
    mins = minimizers(p, q, E)
    orbits = []
    for m in mins:
        o = find_periodic_orbit(p, q, E, m.config)
        if o.hyperbolic:
            orbits.append(o)
    if not orbits:
        return CircleVerdict("Undetermined", [], {"reason": "no hyperbolic minimizing orbit",
                                                  "profile_residual": prof})
    gaps = []
    for lo, hi in _gap_chain(orbits):
        P0, P1 = lo.points[0], hi.points[0]
        chord = float(np.linalg.norm(P1 - P0))
        target = 1.5 * chord + 0.3
        rho = 0.1 * chord
        res = {}
        for kind, (ob_u, bu, ob_s, bs) in {
            "advancing": (lo, "unstable-right", hi, "stable-left"),
            "retreating": (hi, "unstable-left", lo, "stable-right"),
        }.items():
            U = grow_manifold(ob_u, bu, target, max_seg=max_seg)
            S = grow_manifold(ob_s, bs, target, max_seg=max_seg)
            inside = ((np.linalg.norm(U.points - P0, axis=1) > rho)
                      & (np.linalg.norm(U.points - P1, axis=1) > rho)
                      & (U.s <= 1.2 * chord + 0.1))
            dist = _arc_distance(U, S, inside)
            res[kind] = (dist, U, S)
        lobe = None
        if min(res["advancing"][0], res["retreating"][0]) > coincide_tol:
            _, U, S = res["advancing"]
            ints = find_intersections(U, S, avoid=(P0, P1), avoid_radius=rho, limit=2)
            if len(ints) >= 2:
                aa = _area_between(U, ints[0].uu, ints[1].uu) - _area_between(S, ints[0].us, ints[1].us)
                lobe = {"area": float(aa), "intersections": len(ints)}
        gaps.append(GapResult(lo.config.x.tolist(), hi.config.x.tolist(),
                              res["advancing"][0], res["retreating"][0],
                              res["advancing"][0] < coincide_tol, res["retreating"][0] < coincide_tol,
                              lobe))
    diag = {"profile_residual": prof, "orbits": len(orbits)}
    adv = [g.advancing for g in gaps]
    ret = [g.retreating for g in gaps]
    cover = [a or r for a, r in zip(adv, ret)]
    if all(adv):
        kind = "CircleWithAdvancing"
    elif all(ret):
        kind = "CircleWithRetreating"
    elif all(cover):
        kind = "MixedCircle"
    else:
        unresolved = [g for g, c in zip(gaps, cover) if not c
                      and min(g.advancing_distance, g.retreating_distance) < split_tol
                      and not (g.lobe and abs(g.lobe["area"]) > coincide_tol)]
        kind = "Undetermined" if unresolved else "NoCircle"
        lobes = [g.lobe["area"] for g in gaps if g.lobe]
        if lobes:
            diag["lobe_area"] = lobes[0]
    return CircleVerdict(kind, gaps, diag)
