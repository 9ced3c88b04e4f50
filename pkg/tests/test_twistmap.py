import math

import numpy as np
import pytest

from depinn import Mane, PeriodicConfiguration, StandardFK
from depinn import flow, twistmap
from depinn.errors import NotAnEquilibrium
from depinn.model import TiltedEnergy


def _standard_map(k, x, y):
    # closed form for h = (x'-x)^2/2 + k cos(2 pi x)/(4 pi^2)
    yp = y - k / (2 * math.pi) * math.sin(2 * math.pi * x)
    return x + yp, yp


def test_apply_matches_closed_form():
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (20, 2))
    img = twistmap.apply(E, pts)
    ref = np.array([_standard_map(1.0, *p) for p in pts])
    np.testing.assert_allclose(img, ref, atol=1e-13)
    back = twistmap.inverse(E, img)
    np.testing.assert_allclose(back, pts, atol=1e-13)


def test_step_jacobian_area_preserving():
    E = TiltedEnergy(StandardFK(0.7), 0.0)
    J = twistmap.step_jacobian(E, 0.3, 0.8)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-12)


def test_orbit_of_config_rejects_non_equilibrium():
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    with pytest.raises(NotAnEquilibrium):
        twistmap.orbit_of_config(PeriodicConfiguration(0, 1, [0.3]), E)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_residues_fixed_points(k):
    E = TiltedEnergy(StandardFK(k), 0.0)
    top = twistmap.find_periodic_orbit(0, 1, E, 0.0)
    bottom = twistmap.find_periodic_orbit(0, 1, E, 0.5)
    assert top.tau == pytest.approx(-k, abs=1e-10)
    assert bottom.tau == pytest.approx(k, abs=1e-10)
    assert bottom.hyperbolic and not top.hyperbolic


def test_residue_consistency_period_three():
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    m = flow.minimizers(1, 3, E)[0]
    o = twistmap.find_periodic_orbit(1, 3, E, m.config)
    assert abs(o.tau_det - o.tau_mono) < 1e-10
    assert o.tau > 0  # minimizers are hyperbolic for k > 0


def test_manifold_lies_on_invariant_curve():
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    o = twistmap.find_periodic_orbit(0, 1, E, 0.5)
    arc = twistmap.grow_manifold(o, "unstable-right", 0.3)
    assert arc.s[-1] >= 0.3
    # mapping the arc forward stays on the arc (parameter shift by 1)
    u = arc.u[5:50]
    u = u[np.isfinite(u)]
    fwd = twistmap.apply(E, arc.point_at(u))
    np.testing.assert_allclose(fwd, arc.point_at(u + 1), atol=1e-9)
    with pytest.raises(ValueError):
        twistmap.grow_manifold(o, "sideways", 0.3)


def test_action_area_primary_lobe():
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    o = twistmap.find_periodic_orbit(0, 1, E, 0.5)
    U = twistmap.grow_manifold(o, "unstable-right", 2.0)
    S = twistmap.grow_manifold(twistmap.translate_orbit(o, 0, 1), "stable-left", 2.0)
    pts = twistmap.find_intersections(U, S, avoid=(U.base, S.base), avoid_radius=0.1, limit=2,
                                      order="sum")
    # the symmetric homoclinic point sits on x = 1
    assert min(abs(p.point[0] - 1.0) for p in pts) < 1e-8
    aa = twistmap.action_area(U, S, pts[0], pts[1])
    assert abs(aa.area - aa.dW) < 1e-6
    # frozen lobe area for k = 1
    assert abs(aa.dW) == pytest.approx(6.4248157e-4, rel=1e-6)


def test_circle_verdicts():
    assert twistmap.circle_verdict(0, 1, StandardFK(0.0)).kind == "CircleOfPeriodic"
    v = twistmap.circle_verdict(0, 1, StandardFK(1.0))
    assert v.kind == "NoCircle"


def test_mane_invariant_line():
    h = Mane()
    E = TiltedEnergy(h, 0.0)
    x = np.linspace(0, 1, 101)
    img = twistmap.apply(E, np.stack([x, np.zeros_like(x)], axis=-1))
    np.testing.assert_allclose(img[:, 1], 0.0, atol=1e-12)
    for x0 in (0.0, h.fixed_b):
        o = twistmap.find_periodic_orbit(0, 1, E, x0)
        gp = 1 + float(h.f(x0)[1])
        assert o.tau == pytest.approx((1 - gp) ** 2 / gp, abs=1e-10)
