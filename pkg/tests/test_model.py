import math

import numpy as np
import pytest

from depinn import (Bistable, DoubleWell, FunctionH, Mane, ModelError, StandardFK, make_builtin,
                    modify_band, reversed_h, verify_properties)
from depinn.model import BuiltinSpec, TiltedEnergy, as_tilted


def test_standard_fk_closed_form():
    h = StandardFK(1.3)
    x, xp = np.array([0.1, 0.7]), np.array([0.4, 2.2])
    d = h.eval(x, xp)
    k = 1.3
    np.testing.assert_allclose(d.h, 0.5 * (xp - x) ** 2 + k / (4 * math.pi**2) * np.cos(2 * math.pi * x))
    np.testing.assert_allclose(d.h1, -(xp - x) - k / (2 * math.pi) * np.sin(2 * math.pi * x))
    np.testing.assert_allclose(d.h12, -1.0)


@pytest.mark.parametrize("h", [StandardFK(1.0), DoubleWell(0.03, 2.0), Bistable(), Mane(),
                               modify_band(StandardFK(0.5), -1, 2)])
def test_verify_properties_catalog(h):
    rep = verify_properties(h, samples=500)
    assert rep["twist_ok"]
    assert rep["periodicity_violation"] < 1e-12
    assert rep["max_first_derivative_error"] < 1e-6


def test_function_h_matches_analytic():
    k = 0.8
    user = FunctionH(lambda x, xp: 0.5 * (xp - x) ** 2 + k / (4 * math.pi**2) * np.cos(2 * math.pi * x))
    ref = StandardFK(k)
    x, xp = np.linspace(0, 1, 9), np.linspace(0, 1, 9) + 0.3
    a, b = user.eval(x, xp), ref.eval(x, xp)
    np.testing.assert_allclose(a.h1, b.h1, atol=1e-7)
    np.testing.assert_allclose(a.h12, b.h12, atol=1e-4)
    assert verify_properties(user, 200)["finite_difference_derivatives"]


def test_make_builtin_and_errors():
    h = make_builtin({"kind": "double_well", "k": 0.03, "b": 2})
    assert isinstance(h, DoubleWell) and h.b == 2.0
    assert isinstance(make_builtin(BuiltinSpec("standard_fk", {"k": 2.0})), StandardFK)
    with pytest.raises(ModelError):
        make_builtin({"kind": "nope"})
    with pytest.raises(ModelError):
        make_builtin({"kind": "standard_fk", "bogus": 1})
    with pytest.raises(ModelError):
        StandardFK(-1)
    with pytest.raises(ModelError):
        DoubleWell(0.03, 0.5)
    with pytest.raises(ModelError):
        Mane(a1=0.8, a2=0.2)


def test_tilted_energy():
    E = as_tilted(StandardFK(1.0), 0.2)
    d0 = StandardFK(1.0).eval(0.3, 0.9)
    d = E.eval(0.3, 0.9)
    assert d.h == pytest.approx(d0.h - 0.2 * 0.3)
    assert d.h1 == pytest.approx(d0.h1 - 0.2)
    assert E.with_F(0.0).F == 0.0
    with pytest.raises(ModelError):
        TiltedEnergy(StandardFK(), float("nan"))


def test_reversed_is_involution():
    h = DoubleWell()
    r = reversed_h(h)
    assert reversed_h(r) is h
    a, b = r.eval(0.2, 0.9), h.eval(0.9, 0.2)
    assert a.h == b.h and a.h1 == b.h2 and a.h11 == b.h22


def test_bistable_level_force():
    h = Bistable()
    F, a, b = h.level_force()
    assert F > 0 and a < b < a + 1
    V = lambda s: float(h.potential(s)[0]) - F * s  # noqa: E731
    assert V(b) == pytest.approx(V(a + 1), abs=1e-14)
    assert V(a) > V(b)


def test_mane_fixed_points():
    h = Mane()
    assert float(h.f(0.0)[0]) == 0.0
    assert abs(float(h.f(h.fixed_b)[0])) < 1e-14
    assert 1 + float(h.f(0.0)[1]) == pytest.approx(0.5)
    # f is periodic
    np.testing.assert_allclose(h.f(np.array([0.3, 1.3]))[0][0], h.f(np.array([0.3, 1.3]))[0][1])


def test_modify_band_inside_unchanged_and_twist():
    h = StandardFK(1.0)
    ht = modify_band(h, -1, 2)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(ht.eval(x, x + 0.5).h, h.eval(x, x + 0.5).h)
    far = ht.eval(x, x + 9.0)
    assert np.all(far.h12 <= -ht.c + 1e-12)
    assert np.all(np.isfinite(far.h))
