"""Invariant ordered circles of periodic configurations.

The equilibria of ``W_{p,q}`` are catalogued by multistart Newton; circles
are assembled from gradient-descent curves leaving the index-1 saddles
along their (positive) unstable eigenvectors, chained through the minima
until the chain closes up under ``x -> x + 1``.  ``verify_ioc`` audits a
sampled circle and ``minimax`` finds mountain-pass saddles between two
minima with a climbing-image elastic band.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import root

from . import chain
from .configs import PeriodicConfiguration
from .errors import NumericalError, PreconditionError
from .model import as_tilted

DEDUP_TOL = 1e-8
MERGE_TOL = 1e-4


def _grad(x, p, E):
    return -chain.velocity(chain.extend_periodic(np.asarray(x, dtype=float), p), E)


def _energy(x, p, E):
    return chain.periodic_energy(np.asarray(x, dtype=float), p, E)


def _hess(x, p, E):
    return chain.periodic_hessian(np.asarray(x, dtype=float), p, E)


# ---------------------------------------------------------------------------
# equilibrium catalog

@dataclass
class CatalogEntry:
    config: PeriodicConfiguration
    index: int
    energy: float
    eigenvalues: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"x": self.config.x.tolist(), "index": self.index, "energy": self.energy,
                "eigenvalues": self.eigenvalues.tolist()}


@dataclass
class EquilibriumCatalog:
    p: int
    q: int
    entries: list

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_index(self, index: int) -> list:
        return [e for e in self.entries if e.index == index]

    def to_dict(self):
        return {"p": self.p, "q": self.q, "entries": [e.to_dict() for e in self.entries]}


def _reduce(x):
    """Representative modulo ``T_{0,1}`` with ``x_0`` in ``[0, 1)``."""
    return x - np.floor(x[0] + 1e-12)


def _newton_critical(x0, p, E, tol=1e-12):
    sol = root(lambda x: _grad(x, p, E), x0, jac=lambda x: _hess(x, p, E), method="hybr",
               options={"xtol": 1e-14})
    x = sol.x
    for _ in range(3):
        g = _grad(x, p, E)
        if np.max(np.abs(g)) < tol:
            break
        try:
            x = x - np.linalg.solve(_hess(x, p, E), g)
        except np.linalg.LinAlgError:
            break
    return x, float(np.max(np.abs(_grad(x, p, E))))


def find_all_equilibria(p: int, q: int, E, grid_density: int = 8,
                        tol: float = 1e-10) -> EquilibriumCatalog:
    """Critical points of ``W_{p,q}`` from a grid of Newton starts.

    Starts are ``x_j = j p/q + u_j`` with ``u`` on a ``grid_density^q``
    grid in the unit cube.  Results are deduplicated modulo ``T_{0,1}``
    (sup-distance below 1e-8) and carry Morse index and energy.
    """
    if grid_density < 4:
        raise PreconditionError("grid_density must be at least 4", grid_density=grid_density)
    E = as_tilted(E)
    base = np.arange(q) * p / q
    axis = (np.arange(grid_density) + 0.5) / grid_density
    found = []
    for u in itertools.product(axis, repeat=q):
        x, res = _newton_critical(base + np.asarray(u), p, E)
        if not (res < tol and np.all(np.isfinite(x))):
            continue
        x = _reduce(x)
        if any(np.max(np.abs(x - f)) < DEDUP_TOL for f in found):
            continue
        found.append(x)
    entries = []
    for x in found:
        lam = np.linalg.eigvalsh(_hess(x, p, E))
        entries.append(CatalogEntry(PeriodicConfiguration(p, q, x), int(np.sum(lam < 0)),
                                    _energy(x, p, E), lam))
    entries.sort(key=lambda e: (e.index, e.energy, tuple(e.config.x)))
    return EquilibriumCatalog(p, q, entries)


# ---------------------------------------------------------------------------
# ordered circles

@dataclass
class OrderedCircleSample:
    """Configurations of one period of an ordered circle on an ``s`` grid.

    ``configs[k]`` holds ``x_0..x_{q-1}`` at ``s[k]``; the grid extends past
    1 by a margin and obeys ``configs(s+1) = configs(s) + 1``.
    """

    p: int
    q: int
    s: np.ndarray
    configs: np.ndarray
    label: str = ""
    knots: np.ndarray | None = None

    @classmethod
    def from_function(cls, p, q, fn, n: int = 200, margin: float = 0.1, label: str = ""):
        s = np.arange(int(round(n * (1 + margin))) + 1) / n
        return cls(p, q, s, np.array([fn(si) for si in s], dtype=float), label)

    def site(self, j: int) -> np.ndarray:
        """Coordinate ``x_j`` for any integer ``j`` (via ``x_{j+q} = x_j + p``)."""
        k, r = divmod(j, self.q)
        return self.configs[:, r] + k * self.p

    def period_slice(self):
        return self.s <= 1.0 + 1e-12

    def write_csv(self, path) -> Path:
        path = Path(path)
        head = "s," + ",".join(f"x_{j}" for j in range(self.q))
        rows = [head] + [",".join(repr(float(v)) for v in (si, *c)) for si, c in zip(self.s, self.configs)]
        path.write_text("\n".join(rows) + "\n")
        return path

    def to_dict(self):
        return {"p": self.p, "q": self.q, "label": self.label, "s": self.s.tolist(),
                "configs": self.configs.tolist()}


class _Curve:
    """Piecewise curve parametrised by arclength ``tau`` in ``[0, length]``.

    Each piece is ``(L, fn)`` with ``fn`` mapping ``tau`` in ``[0, L]`` to
    points; ``vertices`` keeps sample points for cheap order checks.
    """

    def __init__(self, pieces, vertices):
        self.pieces = pieces
        self.vertices = vertices

    @property
    def length(self) -> float:
        return float(sum(L for L, _ in self.pieces))

    @classmethod
    def segment(cls, a, b):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        L = float(np.linalg.norm(b - a))
        d = (b - a) / L if L > 0 else np.zeros_like(a)
        return cls([(L, lambda t: a + np.multiply.outer(t, d))], np.vstack([a, b]))

    def reversed(self):
        out = []
        for L, fn in reversed(self.pieces):
            out.append((L, (lambda fn, L: lambda t: fn(L - np.asarray(t)))(fn, L)))
        return _Curve(out, self.vertices[::-1])

    def shifted(self, c):
        return _Curve([(L, (lambda fn: lambda t: fn(t) + c)(fn)) for L, fn in self.pieces],
                      self.vertices + c)

    def then(self, other):
        return _Curve(self.pieces + other.pieces, np.vstack([self.vertices, other.vertices[1:]]))

    def __call__(self, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        ends = np.cumsum([L for L, _ in self.pieces])
        starts = ends - np.array([L for L, _ in self.pieces])
        which = np.clip(np.searchsorted(ends, tau, side="left"), 0, len(self.pieces) - 1)
        out = np.empty((tau.size, self.vertices.shape[1]))
        for k, (L, fn) in enumerate(self.pieces):
            m = which == k
            if np.any(m):
                out[m] = fn(np.clip(tau[m] - starts[k], 0.0, L))
        return out


def _descend(x0, p, E, g_stop=1e-9, max_len=20.0) -> _Curve:
    """Gradient curve parametrised by arclength, from ``x0`` down to where
    the gradient falls below ``g_stop`` (dense output kept)."""

    def f(_, x):
        g = _grad(x, p, E)
        n = np.linalg.norm(g)
        return -g / n if n > 0 else np.zeros_like(g)

    def stop(_, x):
        return np.linalg.norm(_grad(x, p, E)) - g_stop

    stop.terminal = True
    sol = solve_ivp(f, (0.0, max_len), x0, method="DOP853", rtol=1e-12, atol=1e-14,
                    events=stop, dense_output=True, max_step=1e-2)
    dense = sol.sol
    return _Curve([(float(sol.t[-1]), lambda t: dense(np.asarray(t)).T)], sol.y.T)


@dataclass
class _Edge:
    lower: int
    upper: int
    shift: int
    curve: _Curve
    saddle: int


def _match_min(x, minima, tol=1e-6):
    for i, m in enumerate(minima):
        d = x - m
        k = np.round(np.mean(d))
        if np.max(np.abs(d - k)) < tol:
            return i, int(k)
    return None, None


def _saddle_edges(catalog, E):
    p = catalog.p
    mins = [e.config.x for e in catalog.by_index(0)]
    edges, failures = [], []
    for si, ent in enumerate(catalog.entries):
        if ent.index != 1:
            continue
        x = ent.config.x
        lam, vec = np.linalg.eigh(_hess(x, p, E))
        v = vec[:, 0]
        if np.all(v <= 0):
            v = -v
        if not np.all(v > 0):
            failures.append({"saddle": x.tolist(), "reason": "unstable eigenvector not positive"})
            continue
        delta = 1e-6
        ends, curves = [], []
        for sign in (-1.0, 1.0):
            start = x + sign * delta * v
            down = _descend(start, p, E)
            end = down.vertices[-1]
            m, k = _match_min(end, mins)
            if m is None:
                # a minimum the grid missed: polish it and add it to the graph
                y, res = _newton_critical(end, p, E)
                if res > 1e-10 or np.any(np.linalg.eigvalsh(_hess(y, p, E)) <= 0):
                    break
                m, k = _match_min(y, mins, tol=1e-8)
                if m is None:
                    mins.append(_reduce(y))
                    m, k = _match_min(y, mins, tol=1e-8)
            curve = _Curve.segment(x, start).then(down).then(_Curve.segment(end, mins[m] + k))
            ends.append((m, k))
            curves.append(curve)
        if len(ends) < 2:
            failures.append({"saddle": x.tolist(), "reason": "descent did not reach a catalogued minimum"})
            continue
        (ml, kl), (mu, ku) = ends
        # lower curve runs saddle -> lower minimum; reverse it so the edge
        # goes lower minimum -> saddle -> upper minimum, relative to lower
        path = curves[0].reversed().then(curves[1]).shifted(-kl)
        edges.append(_Edge(ml, mu, ku - kl, path, si))
    return mins, edges, failures


def _shift_closed(saddles, p, q, tol=1e-7) -> bool:
    """True if the index-shift translate of every saddle is in the set
    (modulo ``T_{0,1}``)."""
    red = [_reduce(np.asarray(x)) for x in saddles]
    for x in red:
        y = _reduce(np.concatenate([x[1:], [x[0] + p]]))
        if not any(np.max(np.abs(y - z)) < tol for z in red):
            return False
    return True


def _cycles(n_nodes, edges):
    """Simple cycles of the minimum graph whose diagonal shifts sum to 1."""
    out, seen = [], set()
    adj = {i: [] for i in range(n_nodes)}
    for ei, e in enumerate(edges):
        adj[e.lower].append(ei)

    def dfs(start, node, shift, used, visited):
        for ei in adj[node]:
            e = edges[ei]
            tot = shift + e.shift
            if e.upper == start:
                if tot == 1:
                    key = frozenset(used + [ei])
                    if key not in seen:
                        seen.add(key)
                        out.append(used + [ei])
                continue
            if e.upper in visited:
                continue
            dfs(start, e.upper, tot, used + [ei], visited | {e.upper})

    for s in range(n_nodes):
        dfs(s, s, 0, [], {s})
    return out


def _is_ordered_curve(pts, tol=0.0):
    d = np.diff(pts, axis=0)
    return bool(np.all(d >= -tol))


def _graded_grid(n, margin, knots, alpha=0.1, finest=1e-6):
    """Uniform ``s`` grid refined towards each knot (local spacing
    ``min(1/n, alpha * distance)``), periodic under ``s -> s + 1`` and
    extended past 1 by ``margin``."""
    h = 1.0 / n
    d = [finest]
    while d[-1] < h / alpha:
        d.append(d[-1] + min(h, alpha * d[-1]))
    d = np.array(d)
    knots = np.mod(np.asarray(knots, dtype=float), 1.0)
    uni = np.arange(n) * h
    # drop uniform points inside the graded zones
    near = np.min(np.abs(((uni[:, None] - knots[None, :]) + 0.5) % 1.0 - 0.5), axis=1) < d[-1]
    parts = [uni[~near]] + [np.concatenate(([k], k + d, k - d)) for k in knots]
    s0 = np.unique(np.round(np.mod(np.concatenate(parts), 1.0), 14))
    s0 = s0[s0 < 1.0]
    full = np.concatenate([s0, s0 + 1.0])
    return full[full <= 1.0 + margin + 1e-12]


def _resample(curve: _Curve, knots, n, margin):
    """Arclength resampling of one period of ``curve`` (which ends at its
    start plus 1).  Returns the ``s`` grid, configurations and the knot
    positions in ``[0, 1]``."""
    total = curve.length
    kn = knots / total
    s = _graded_grid(n, margin, kn[:-1])
    wrap = np.floor(s + 1e-13)
    frac = np.clip(s - wrap, 0.0, 1.0)
    return s, curve(frac * total) + wrap[:, None], kn


def _hausdorff(a: OrderedCircleSample, b: OrderedCircleSample) -> float:
    A = a.configs[a.period_slice()]
    B = b.configs[b.period_slice()]
    Bx = np.vstack([B - 1, B, B + 1])
    d1 = np.max(np.min(np.max(np.abs(A[:, None, :] - Bx[None]), axis=-1), axis=1))
    Ax = np.vstack([A - 1, A, A + 1])
    d2 = np.max(np.min(np.max(np.abs(B[:, None, :] - Ax[None]), axis=-1), axis=1))
    return float(max(d1, d2))


@dataclass
class IOCResult:
    circles: list
    failures: list

    def to_dict(self):
        return {"circles": [c.to_dict() for c in self.circles], "failures": self.failures}


def build_ioc(p: int, q: int, E, catalog: EquilibriumCatalog | None = None,
              n: int = 400, margin: float = 0.1) -> IOCResult:
    """Ordered circles assembled from saddle descent curves.

    Every index-1 saddle is connected to the minima below and above it;
    cycles of these connections closing under ``T_{0,1}`` are resampled by
    arclength to an ``s`` grid (``n`` points per period).  Circles closer
    than 1e-4 in Hausdorff sup-distance are merged.
    """
    E = as_tilted(E)
    if catalog is None:
        catalog = find_all_equilibria(p, q, E)
    if not catalog.by_index(0) or not catalog.by_index(1):
        raise PreconditionError("catalog needs index-0 and index-1 points")
    mins, edges, failures = _saddle_edges(catalog, E)
    circles = []
    saddle_x = {si: catalog.entries[si].config.x for si in {e.saddle for e in edges}}
    for cyc in _cycles(len(mins), edges):
        if not _shift_closed([saddle_x[edges[ei].saddle] for ei in cyc], p, q):
            failures.append({"cycle": [int(edges[ei].saddle) for ei in cyc],
                             "reason": "not invariant under the index shift"})
            continue
        # start the chain at its lowest minimum for a canonical s origin
        starts = [edges[ei].lower for ei in cyc]
        r = int(np.argmin([np.sum(mins[i]) for i in starts]))
        cyc = cyc[r:] + cyc[:r]
        offset = 0
        curve, knots = None, [0.0]
        for ei in cyc:
            e = edges[ei]
            piece = e.curve.shifted(offset)
            curve = piece if curve is None else curve.then(piece)
            knots.append(curve.length)
            offset += e.shift
        if not _is_ordered_curve(curve.vertices, tol=1e-12):
            failures.append({"cycle": [int(edges[ei].saddle) for ei in cyc],
                             "reason": "descent curve leaves the order cone"})
            continue
        s, cfg, knots = _resample(curve, np.array(knots), n, margin)
        cand = OrderedCircleSample(p, q, s, cfg, label="saddles " + ",".join(
            str(edges[ei].saddle) for ei in cyc), knots=knots)
        if all(_hausdorff(cand, c) > MERGE_TOL for c in circles):
            circles.append(cand)
    return IOCResult(circles, failures)


# ---------------------------------------------------------------------------
# verification

@dataclass
class IOCReport:
    ordered: bool
    min_increment: float
    periodicity_error: float
    tangency_residual: float
    reconstruction_error: float
    tangency_tol: float = 1e-6
    reconstruction_tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return (self.ordered and self.periodicity_error < 1e-12
                and self.tangency_residual < self.tangency_tol
                and self.reconstruction_error < self.reconstruction_tol)

    def to_dict(self):
        return {"ordered": self.ordered, "min_increment": self.min_increment,
                "periodicity_error": self.periodicity_error,
                "tangency_residual": self.tangency_residual,
                "reconstruction_error": self.reconstruction_error, "passed": self.passed}


def _grid_period(sample):
    """Index ``m`` with ``s[m:] = s[:-m] + 1`` (the grid repeats with period
    1), or None."""
    m = int(np.searchsorted(sample.s, sample.s[0] + 1.0 - 1e-12))
    if m == 0 or m >= len(sample.s):
        return None
    tail = sample.s[m:] - 1.0
    if np.max(np.abs(tail - sample.s[:len(tail)])) > 1e-9:
        return None
    return m


def _extended(sample):
    m = _grid_period(sample)
    s = sample.s[:m]
    c = sample.configs[:m]
    return (np.concatenate([s - 1, s, s + 1, [s[0] + 2]]),
            np.vstack([c - 1, c, c + 1, c[:1] + 2]))


def _spline_tangent(sample, s_ext, c_ext):
    """Curve tangent at the grid points from cubic splines fitted
    piecewise between knots (corners at minima are not smoothed over)."""
    if sample.knots is None or len(sample.knots) == 0:
        return CubicSpline(s_ext, c_ext, axis=0)(sample.s, 1)
    k = np.asarray(sample.knots, dtype=float)
    breaks = np.unique(np.concatenate([k + j for j in range(-2, 3)]))
    T = np.zeros_like(sample.configs)
    seg_ext = np.searchsorted(breaks, s_ext, side="right")
    seg_s = np.searchsorted(breaks, sample.s, side="right")
    for b in np.unique(seg_s):
        m = seg_ext == b
        if m.sum() < 4:
            continue
        sp = CubicSpline(s_ext[m], c_ext[m], axis=0)
        sel = seg_s == b
        T[sel] = sp(sample.s[sel], 1)
    return T


def verify_ioc(sample: OrderedCircleSample, E, tangency_tol: float = 1e-6) -> IOCReport:
    """Audit a sampled circle: strict order along ``s``, ``x(s+1) = x(s) + 1``,
    tangency of the flow to the spline-interpolated curve, and the
    two-coordinate reconstruction of ``x_{-1}`` and ``x_2``."""
    E = as_tilted(E)
    p = sample.p
    c = sample.configs
    inc = np.diff(c, axis=0)
    ordered = bool(np.all(inc > 0))
    m = _grid_period(sample)
    per = float(np.max(np.abs(c[m:] - c[:len(c) - m] - 1))) if m is not None else float("inf")

    s_ext, c_ext = _extended(sample) if m is not None else (sample.s, c)
    T = _spline_tangent(sample, s_ext, c_ext)
    tn = np.linalg.norm(T, axis=1, keepdims=True)
    T = T / np.where(tn > 0, tn, 1)
    vel = np.array([-_grad(x, p, E) for x in c])
    perp = vel - np.sum(vel * T, axis=1, keepdims=True) * T
    tang = float(np.max(np.linalg.norm(perp, axis=1)))

    rec = _reconstruction_error(sample, s_ext, c_ext)
    return IOCReport(ordered, float(inc.min()) if inc.size else 0.0, per, tang, rec,
                     tangency_tol=tangency_tol)


def _reconstruction_error(sample, s_ext, c_ext) -> float:
    """Rebuild ``x_2`` and ``x_{-1}`` from the graphs of ``x_0`` and ``x_1``
    using invariance of the circle under the index shift."""
    p, q = sample.p, sample.q

    def coord(j, cc):
        k, r = divmod(j, q)
        return cc[:, r] + k * p

    x0, x1 = coord(0, c_ext), coord(1, c_ext)
    if not (np.all(np.diff(x0) > 0) and np.all(np.diff(x1) > 0)):
        return float("inf")
    X0, X1 = PchipInterpolator(s_ext, x0), PchipInterpolator(s_ext, x1)
    X0inv, X1inv = PchipInterpolator(x0, s_ext), PchipInterpolator(x1, s_ext)
    c = sample.configs
    s = sample.s
    keep = (coord(1, c) >= x0[0]) & (coord(1, c) <= x0[-1]) & (coord(0, c) >= x1[0]) & (coord(0, c) <= x1[-1])
    x2_rec = X1(X0inv(coord(1, c)[keep]))
    xm_rec = X0(X1inv(coord(0, c)[keep]))
    err = max(np.max(np.abs(x2_rec - coord(2, c)[keep])), np.max(np.abs(xm_rec - coord(-1, c)[keep])))
    del s
    return float(err)


# ---------------------------------------------------------------------------
# minimax

@dataclass
class MinimaxResult:
    saddle: PeriodicConfiguration
    height: float
    barrier: float
    index: int
    gradient_norm: float
    path: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    iterations: int = 0

    def to_dict(self):
        return {"saddle": self.saddle.x.tolist(), "height": self.height, "barrier": self.barrier,
                "index": self.index, "gradient_norm": self.gradient_norm,
                "iterations": self.iterations, "energies": self.energies.tolist()}


def _tangents(path, W):
    """Energy-weighted upwind tangents of the interior nodes."""
    t = np.zeros_like(path)
    for i in range(1, len(path) - 1):
        tp, tm = path[i + 1] - path[i], path[i] - path[i - 1]
        if W[i + 1] > W[i] > W[i - 1]:
            tau = tp
        elif W[i + 1] < W[i] < W[i - 1]:
            tau = tm
        else:
            dmax = max(abs(W[i + 1] - W[i]), abs(W[i - 1] - W[i]))
            dmin = min(abs(W[i + 1] - W[i]), abs(W[i - 1] - W[i]))
            tau = tp * dmax + tm * dmin if W[i + 1] > W[i - 1] else tp * dmin + tm * dmax
        n = np.linalg.norm(tau)
        t[i] = tau / n if n > 0 else tau
    return t


def minimax(minA, minB, E, path_nodes: int = 21, via=None, max_iter: int = 20000,
            force_tol: float = 1e-7, grad_tol: float = 1e-9) -> MinimaxResult:
    """Mountain-pass saddle between two minima of the same type.

    A climbing-image elastic band of ``path_nodes`` configurations (through
    ``via`` if given) is relaxed with FIRE; the climbing node is then
    polished by Newton to a critical point with gradient below
    ``grad_tol``.  The returned ``index`` should be 1; other values are
    reported rather than raised.
    """
    E = as_tilted(E)
    if not (isinstance(minA, PeriodicConfiguration) and isinstance(minB, PeriodicConfiguration)):
        raise PreconditionError("minima must be PeriodicConfiguration")
    if (minA.p, minA.q) != (minB.p, minB.q):
        raise PreconditionError("minima have different types")
    p = minA.p
    a, b = minA.x.astype(float), minB.x.astype(float)
    if np.max(np.abs(a - b)) < 1e-10:
        raise PreconditionError("minA and minB coincide")
    if path_nodes < 5:
        raise PreconditionError("path_nodes must be >= 5")
    if via is None:
        path = a + np.linspace(0, 1, path_nodes)[:, None] * (b - a)
    else:
        v = np.asarray(via.x if isinstance(via, PeriodicConfiguration) else via, dtype=float)
        h = path_nodes // 2
        path = np.vstack([a + np.linspace(0, 1, h + 1)[:-1, None] * (v - a),
                          v + np.linspace(0, 1, path_nodes - h)[:, None] * (b - v)])
    k_spring = 1.0
    dt, dt_max, alpha0 = 0.05, 0.5, 0.1
    alpha, n_pos = alpha0, 0
    vel = np.zeros_like(path)
    it = 0
    for it in range(max_iter):
        W = np.array([_energy(x, p, E) for x in path])
        G = np.array([_grad(x, p, E) for x in path])
        tau = _tangents(path, W)
        ci = 1 + int(np.argmax(W[1:-1]))
        F = np.zeros_like(path)
        for i in range(1, len(path) - 1):
            gpar = np.dot(G[i], tau[i]) * tau[i]
            if i == ci and it > 50:
                F[i] = -G[i] + 2 * gpar
            else:
                spring = k_spring * (np.linalg.norm(path[i + 1] - path[i])
                                     - np.linalg.norm(path[i] - path[i - 1])) * tau[i]
                F[i] = -(G[i] - gpar) + spring
        fmax = float(np.max(np.abs(F)))
        if fmax < force_tol and it > 50:
            break
        # FIRE step
        P = float(np.sum(F * vel))
        fn, vn = np.linalg.norm(F), np.linalg.norm(vel)
        if P > 0:
            vel = (1 - alpha) * vel + alpha * F / (fn if fn > 0 else 1) * vn
            n_pos += 1
            if n_pos > 5:
                dt = min(dt * 1.1, dt_max)
                alpha *= 0.99
        else:
            vel[:] = 0
            dt *= 0.5
            alpha, n_pos = alpha0, 0
        vel = vel + dt * F
        path[1:-1] = path[1:-1] + dt * vel[1:-1]
    W = np.array([_energy(x, p, E) for x in path])
    ci = 1 + int(np.argmax(W[1:-1]))
    x, gnorm = _newton_critical(path[ci], p, E, tol=grad_tol)
    if gnorm > grad_tol:
        raise NumericalError("climbing image did not converge to a critical point",
                             gradient=gnorm, force=fmax)
    lam = np.linalg.eigvalsh(_hess(x, p, E))
    height = _energy(x, p, E)
    barrier = height - max(_energy(a, p, E), _energy(b, p, E))
    return MinimaxResult(PeriodicConfiguration(minA.p, minA.q, x), float(height), float(barrier),
                         int(np.sum(lam < 0)), gnorm, path, W, it)
