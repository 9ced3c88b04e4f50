from fractions import Fraction

import numpy as np
import pytest

from depinn import PeriodicConfiguration, RotationSymbol, WindowConfiguration
from depinn.configs import (Order, compare, export_aubry, is_birkhoff, mean_spacing, reflect,
                            translate, width)
from depinn.errors import InconsistentWindow


def test_periodic_extension():
    x = PeriodicConfiguration(1, 3, [0.1, 0.4, 0.7])
    np.testing.assert_allclose(x.at(np.array([-1, 3, 5])), [-0.3, 1.1, 1.7])
    assert x.omega == Fraction(1, 3)
    with pytest.raises(ValueError):
        PeriodicConfiguration(1, 2, [0.0])


def test_translate_and_compare():
    x = PeriodicConfiguration.uniform(1, 3, 0.05)
    y = translate(x, 0, 1)
    assert compare(x, y) is Order.STRICTLY_LESS
    assert compare(y, x) is Order.STRICTLY_GREATER
    assert compare(x, x) is Order.EQUAL
    z = PeriodicConfiguration(1, 3, x.x + np.array([0.1, -0.1, 0.0]))
    assert compare(x, z) is Order.INCOMPARABLE
    # T_{q,p} leaves a type-(p,q) state unchanged
    np.testing.assert_allclose(translate(x, 3, 1).x, x.x)


def test_width_and_birkhoff():
    x = PeriodicConfiguration.uniform(2, 5, 0.0)
    assert is_birkhoff(x)
    assert width(x) <= 2
    bad = PeriodicConfiguration(0, 2, [0.0, 0.9])
    rep = is_birkhoff(bad)
    assert not rep and rep.witness is not None


def test_window_and_mean_spacing():
    a = PeriodicConfiguration(0, 1, [0.5])
    w = WindowConfiguration(-2, [0.5, 0.6, 0.9, 1.3, 1.5], a, a.shifted(1.0))
    assert w.r == 2
    assert w.at(-10) == 0.5 and w.at(10) == 1.5
    assert mean_spacing(w) == 0.0
    with pytest.raises(InconsistentWindow):
        mean_spacing(WindowConfiguration(0, [0.0], a, PeriodicConfiguration(1, 1, [0.0])))


def test_reflect_involution():
    x = PeriodicConfiguration(1, 3, [0.1, 0.5, 0.6])
    np.testing.assert_allclose(reflect(reflect(x)).x, x.x)


def test_rotation_symbol_order():
    a = RotationSymbol.rational(1, 2, -1)
    b = RotationSymbol.rational(1, 2)
    c = RotationSymbol.rational(1, 2, 1)
    assert a < b < c < RotationSymbol.real(0.6)
    assert str(c) == "1/2+"


def test_export_aubry(tmp_path):
    x = PeriodicConfiguration(1, 2, [0.0, 0.5])
    p = export_aubry(x, tmp_path / "a.csv", periods=2, svg=True)
    lines = p.read_text().splitlines()
    assert lines[0] == "n,x" and len(lines) == 5
    assert (tmp_path / "a.svg").exists()
