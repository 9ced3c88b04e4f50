"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``CRITERION n: PASS|FAIL`` line; the lines are also
collected into the pytest terminal summary.  Run directly with
``pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from depinn import Bistable, DoubleWell, Mane, StandardFK, modify_band
from depinn import flow, ioc, rotation, twistmap
from depinn.configs import PeriodicConfiguration, translate
from depinn.disc import GluingPlan, find_equilibrium_disc, find_sliding_disc, glue
from depinn.model import TiltedEnergy

pytestmark = pytest.mark.acceptance

TOL_F = 1e-7


def report(n, ok, detail=""):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


@pytest.fixture(scope="module")
def limit_estimate():
    t = time.time()
    est = rotation.fd_limit(0, 1, "plus", StandardFK(1.0), n_max=9, tol_F=TOL_F)
    return est, time.time() - t


def test_criterion_1_analytic_depinning():
    details, ok = [], True
    for k in (0.5, 1.0, 2.0):
        tol = 1e-6
        t = time.time()
        r = flow.depinning_force(0, 1, StandardFK(k), method="cross-validated", tol_F=tol)
        dt = time.time() - t
        exact = k / (2 * np.pi)
        rel = abs(r.F_d - exact) / exact
        fb = r.diagnostics["bisection"]["F_d"]
        fc = r.diagnostics["continuation"]["F_d"]
        good = rel < 1e-3 and abs(fb - fc) <= 5 * tol and dt < 120
        ok &= good
        details.append(f"k={k}: rel={rel:.1e} |bis-cont|={abs(fb - fc):.1e} {dt:.1f}s")
    assert report(1, ok, "; ".join(details))


def test_criterion_2_mediant_tail(limit_estimate):
    est, dt = limit_estimate
    vals = [F for *_, F in est.samples]
    qs = [Q for _, Q, _ in est.samples]
    incs = np.diff(vals)
    fd0 = 1 / (2 * np.pi)
    cauchy = abs(incs[-1]) < 0.25 * abs(incs[-3])
    strict = 10 * TOL_F < est.estimate < fd0 - 10 * TOL_F
    ok = qs == list(range(2, 11)) and cauchy and strict and dt < 1800
    assert report(2, ok, f"F_hat={est.estimate:.6g} last/third-last={incs[-1] / incs[-3]:.3f} "
                         f"{dt:.1f}s")


def test_criterion_3_regimes(limit_estimate):
    est, _ = limit_estimate
    h = StandardFK(1.0)
    fd0 = 1 / (2 * np.pi)

    def asymptotes(E):
        y = min(flow.minimizers(0, 1, E), key=lambda m: flow.energy(m.config, E)).config
        return y, translate(y, 1, 1)

    E = TiltedEnergy(h, est.estimate / 2)
    xm, xp = asymptotes(E)
    d = find_equilibrium_disc(xm, xp, "advancing", E)
    mono = bool(np.all(np.diff(d.window.values) >= 0))
    ok_a = d.residual < 1e-10 and mono

    E = TiltedEnergy(h, 0.5 * (est.estimate + fd0))
    xm, xp = asymptotes(E)
    s = find_sliding_disc(xm, xp, "advancing", E)
    ok_b = (getattr(s, "status", "") == "sliding" and s.recurrence_error < 1e-6
            and s.T > 0 and abs(s.v + 1 / s.T) < 1e-14)
    assert report(3, ok_a and ok_b,
                  f"(a) residual={d.residual:.1e} monotone={mono}; "
                  f"(b) T={getattr(s, 'T', float('nan')):.4g} "
                  f"recurrence={getattr(s, 'recurrence_error', float('nan')):.1e}")


def _grid_saddles(h, p, box, step):
    """Index-1 critical points of ``W(x0, x1) = h(x0, x1) + h(x1, x0 + p)``
    located by minimising ``|grad W|`` on a grid (independent of the
    package's chain code)."""
    x0, x1 = np.meshgrid(np.arange(box[0], box[1], step), np.arange(box[2], box[3], step),
                         indexing="ij")
    a, b = h.eval(x0, x1), h.eval(x1, x0 + p)
    g0, g1 = a.h1 + b.h2, a.h2 + b.h1
    h00, h11, h01 = a.h11 + b.h22, a.h22 + b.h11, a.h12 + b.h12
    gn = np.hypot(g0, g1)
    return x0, x1, gn, h00 * h11 - h01**2


def _refine_saddle(h, p, guess):
    x, y = guess
    for span in (4e-3, 4e-5):
        xs = np.linspace(x - span, x + span, 201)
        ys = np.linspace(y - span, y + span, 201)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        a, b = h.eval(X, Y), h.eval(Y, X + p)
        gn = np.hypot(a.h1 + b.h2, a.h2 + b.h1)
        i, j = np.unravel_index(np.argmin(gn), gn.shape)
        x, y = X[i, j], Y[i, j]
    return np.array([x, y])


def test_criterion_4_double_well():
    t = time.time()
    h = DoubleWell(0.03, 2.0)
    E = TiltedEnergy(h, 0.0)
    cat = ioc.find_all_equilibria(1, 2, E)
    c = h.well
    # reference critical points of the decoupled limit and their Morse indices
    figure = [((-c, c), 0), ((c, c), 0), ((c, 1 - c), 0), ((c, 1 + c), 0), ((1 - c, 1 + c), 0),
              ((1 - c, 1 - c), 0), ((-c, 1 - c), 0),
              ((-c, 0.5), 1), ((0, c), 1), ((0, 1 - c), 1), ((c, 0.5), 1), ((c, 1), 1),
              ((0.5, 1 - c), 1), ((0.5, 1 + c), 1), ((1 - c, 1), 1),
              ((0, 0.5), 2), ((0.5, 1), 2)]
    missing = 0
    for pt, index in figure:
        P = PeriodicConfiguration(1, 2, np.array(pt, dtype=float))
        images = [translate(P, a, b).x for a in (0, 1) for b in range(-3, 4)]
        hit = any(e.index == index and min(np.max(np.abs(e.config.x - im)) for im in images) < 0.05
                  for e in cat)
        missing += not hit
    ok_cat = missing == 0

    built = ioc.build_ioc(1, 2, E, cat)
    reps = [ioc.verify_ioc(s, E) for s in built.circles]
    ok_ioc = len(reps) >= 2 and all(r.passed and r.tangency_residual < 1e-6 for r in reps)

    mins = sorted(cat.by_index(0), key=lambda e: (e.energy, e.config.x[0]))
    A, B = mins[0].config, mins[1].config
    d = B.x - A.x
    perp = np.array([-d[1], d[0]]) / np.linalg.norm(d)
    mid = 0.5 * (A.x + B.x)
    runs = [ioc.minimax(A, B, E, via=mid + s * 0.15 * perp) for s in (1, -1)]
    hdiff = abs(runs[0].height - runs[1].height)
    distinct = np.max(np.abs(runs[0].saddle.x - runs[1].saddle.x)) > 1e-3
    # brute-force oracle for the saddle locations
    X0, X1, gn, det = _grid_saddles(h, 1, (-0.5, 1.5, -0.5, 2.5), 2e-3)
    loc_err = 0.0
    for r in runs:
        # coarse-grid saddle in the basin of the reported one, then refined
        near = (np.abs(X0 - r.saddle.x[0]) < 0.02) & (np.abs(X1 - r.saddle.x[1]) < 0.02) & (det < 0)
        i = np.argmin(np.where(near, gn, np.inf))
        ref = _refine_saddle(h, 1, (X0.flat[i], X1.flat[i]))
        loc_err = max(loc_err, float(np.max(np.abs(ref - r.saddle.x))))
    ok_mm = hdiff < 1e-8 and distinct and all(r.index == 1 for r in runs) and loc_err < 1e-4
    dt = time.time() - t
    ok = ok_cat and ok_ioc and ok_mm and dt < 300
    assert report(4, ok, f"catalog={len(cat)} figure points missing={missing} iocs={len(reps)} "
                         f"tangency={max(r.tangency_residual for r in reps):.1e} "
                         f"dh={hdiff:.1e} loc={loc_err:.1e} {dt:.1f}s")


def _corpus_orbits():
    out = []
    for k in (0.5, 1.0, 2.0):
        E = TiltedEnergy(StandardFK(k), 0.0)
        for g in (0.0, 0.5):
            out.append(twistmap.find_periodic_orbit(0, 1, E, g))
        for p, q in ((1, 2), (1, 3), (2, 5)):
            for m in flow.minimizers(p, q, E):
                out.append(twistmap.find_periodic_orbit(p, q, E, m.config))
    E = TiltedEnergy(DoubleWell(0.03, 2.0), 0.0)
    for e in ioc.find_all_equilibria(1, 2, E):
        out.append(twistmap.find_periodic_orbit(1, 2, E, e.config))
    E = TiltedEnergy(Mane(), 0.0)
    for g in (0.0, Mane().fixed_b):
        out.append(twistmap.find_periodic_orbit(0, 1, E, g))
    return out


def test_criterion_5_residue_consistency():
    orbits = _corpus_orbits()
    worst = max(abs(o.tau_det - o.tau_mono) / max(1.0, abs(o.tau_det)) for o in orbits)
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    ok_an = True
    for k in (0.5, 1.0, 2.0):
        E = TiltedEnergy(StandardFK(k), 0.0)
        t0 = twistmap.find_periodic_orbit(0, 1, E, 0.0).tau
        th = twistmap.find_periodic_orbit(0, 1, E, 0.5).tau
        ok_an &= abs(t0 + k) < 1e-8 and abs(th - k) < 1e-8
    assert report(5, worst < 1e-8 and ok_an, f"orbits={len(orbits)} worst={worst:.1e}")


def test_criterion_6_lobe_area():
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    o = twistmap.find_periodic_orbit(0, 1, E, 0.5)
    U = twistmap.grow_manifold(o, "unstable-right", 2.0)
    S = twistmap.grow_manifold(twistmap.translate_orbit(o, 0, 1), "stable-left", 2.0)
    pts = twistmap.find_intersections(U, S, avoid=(U.base, S.base), avoid_radius=0.1,
                                      limit=2, order="sum")
    aa = twistmap.action_area(U, S, pts[0], pts[1])
    diff = abs(aa.area - aa.dW)
    ok = diff < 1e-6 and abs(aa.area) > 1e-5
    assert report(6, ok, f"area={aa.area:.8e} dW={aa.dW:.8e} diff={diff:.1e}")


def test_criterion_7_mane():
    h = Mane()
    v = twistmap.circle_verdict(0, 1, h)
    E = TiltedEnergy(h, 0.0)
    # invariant set y = 0: the map sends (x, 0) to (g(x), 0)
    x = np.linspace(0, 1, 1001)
    img = twistmap.apply(E, np.stack([x, np.zeros_like(x)], axis=-1))
    inv_err = float(max(np.max(np.abs(img[:, 1])), np.max(np.abs(img[:, 0] - h.g(x)[0]))))
    tau_err = 0.0
    for x0 in (0.0, h.fixed_b):
        o = twistmap.find_periodic_orbit(0, 1, E, x0)
        gp = 1 + float(h.f(x0)[1])
        tau_err = max(tau_err, abs(o.tau - (1 - gp) ** 2 / gp))
    ok = v.kind == "MixedCircle" and inv_err < 1e-9 and tau_err < 1e-8
    assert report(7, ok, f"verdict={v.kind} invariant={inv_err:.1e} tau={tau_err:.1e}")


def test_criterion_8_band_seam():
    h = StandardFK(1.0)
    M, N = -1, 2
    ht = modify_band(h, M, N)
    x = np.linspace(-0.5, 1.5, 41)
    s = 1e-5
    worst, jump = 0.0, 0.0
    for S in (M, N):
        xp = x + S
        for side in (-1, 1):
            # one-sided finite differences on either side of the seam
            a, b = ht.eval(x, xp + side * s), ht.eval(x, xp + side * 2 * s)
            d0 = h.eval(x, xp)
            ext_h = 2 * a.h - b.h
            ext_h1 = 2 * a.h1 - b.h1
            ext_h2 = 2 * a.h2 - b.h2
            worst = max(worst, float(np.max(np.abs(ext_h - d0.h))),
                        float(np.max(np.abs(ext_h1 - d0.h1))), float(np.max(np.abs(ext_h2 - d0.h2))))
        lo, hi = ht.eval(x, xp - 1e-9), ht.eval(x, xp + 1e-9)
        jump = max(jump, float(np.max(np.abs(hi.h12 - lo.h12))))
    rng = np.random.default_rng(8)
    u = rng.uniform(-2, 2, 10000)
    up = u + rng.uniform(M - 4, N + 4, 10000)
    twist = float(np.max(ht.eval(u, up).h12))
    ok = worst < 1e-6 and jump < 1e-6 and twist <= -ht.c
    assert report(8, ok, f"edge match={worst:.1e} h12 jump={jump:.1e} max h12={twist:.4f}")


def test_criterion_9_coexistence():
    h = Bistable()
    F, a, b = h.level_force()
    E = TiltedEnergy(h, F)
    ea = flow.find_equilibrium(PeriodicConfiguration(0, 1, np.array([a])), E).config
    eb = flow.find_equilibrium(PeriodicConfiguration(0, 1, np.array([b])), E).config
    front = find_sliding_disc(ea, eb, "advancing", E)
    disc = find_equilibrium_disc(eb, ea.shifted(1.0), "advancing", E)
    ok = (getattr(front, "status", "") == "sliding" and front.T > 0
          and disc.residual < 1e-10)
    assert report(9, ok, f"k={h.k} F={F:.6g} front T={getattr(front, 'T', float('nan')):.4g} "
                         f"disc residual={disc.residual:.1e}")


def test_criterion_10_properties():
    h = StandardFK(1.0)
    s = flow.FlowSettings()
    tol = s.tol
    rng = np.random.default_rng(10)
    E = TiltedEnergy(h, 0.1)

    # order preservation
    viol = 0
    for _ in range(100):
        x = np.sort(rng.uniform(0, 1, 5))
        d = rng.uniform(0, 0.2, 5) * (rng.uniform(size=5) < 0.7)
        X = PeriodicConfiguration(1, 5, x)
        Y = PeriodicConfiguration(1, 5, x + d)
        tx = flow.integrate(X, E, s, t_end=3.0, sample_dt=3.0).x[-1]
        ty = flow.integrate(Y, E, s, t_end=3.0, sample_dt=3.0).x[-1]
        viol += int(np.min(ty - tx) < -10 * tol)

    # translation equivariance
    eq_err = 0.0
    for a, b in ((1, 0), (0, 1), (2, -1)):
        x = PeriodicConfiguration(1, 5, np.sort(rng.uniform(0, 1, 5)))
        t1 = flow.integrate(translate(x, a, b), E, s, t_end=3.0, sample_dt=3.0)
        t2 = flow.integrate(x, E, s, t_end=3.0, sample_dt=3.0)
        moved = translate(PeriodicConfiguration(1, 5, t2.x[-1]), a, b).x
        eq_err = max(eq_err, float(np.max(np.abs(t1.x[-1] - moved))))

    # average velocity monotone in F
    Fs = np.linspace(0.0, 0.3, 30)
    vs = [flow.average_velocity(PeriodicConfiguration(0, 1, np.array([0.0])), TiltedEnergy(h, F))
          for F in Fs]
    finite = np.all(np.isfinite(vs))
    inversions = int(np.sum(np.diff(vs) < 0))

    # gluing residual against C delta over a sweep of cut positions
    E0 = TiltedEnergy(h, 0.0)
    y = min(flow.minimizers(0, 1, E0), key=lambda m: flow.energy(m.config, E0)).config
    z = find_equilibrium_disc(y, translate(y, 1, 1), "advancing", E0)
    deltas, res, bounds = [], [], []
    for cut in range(-14, -5):
        _, rep = glue(GluingPlan([y, z.window], [cut], E0))
        deltas.append(rep.delta)
        res.append(rep.junction_residual)
        bounds.append(rep.C * rep.delta + rep.piece_residual)
    deltas, res = np.array(deltas), np.array(res)
    within = bool(np.all(res <= np.array(bounds) + 1e-13))
    slope = float(np.polyfit(np.log(deltas), np.log(res), 1)[0])
    ok_glue = within and 0.5 <= slope <= 2.0

    ok = viol == 0 and eq_err < 10 * tol and finite and inversions == 0 and ok_glue
    assert report(10, ok, f"order violations={viol} equivariance={eq_err:.1e} "
                          f"v inversions={inversions} glue slope={slope:.2f} bound_ok={within}")
