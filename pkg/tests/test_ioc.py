import numpy as np
import pytest

from depinn import DoubleWell, PeriodicConfiguration, StandardFK
from depinn import ioc
from depinn.errors import PreconditionError
from depinn.model import TiltedEnergy

DW = TiltedEnergy(DoubleWell(0.03, 2.0), 0.0)


@pytest.fixture(scope="module")
def dw_catalog():
    return ioc.find_all_equilibria(1, 2, DW)


def test_catalog_standard_fk():
    cat = ioc.find_all_equilibria(0, 1, TiltedEnergy(StandardFK(1.0), 0.0))
    assert len(cat) == 2
    xs = {round(float(e.config.x[0]), 10): e.index for e in cat}
    assert xs == {0.5: 0, 0.0: 1}
    with pytest.raises(PreconditionError):
        ioc.find_all_equilibria(0, 1, TiltedEnergy(StandardFK(1.0), 0.0), grid_density=2)


def test_catalog_double_well_frozen(dw_catalog):
    mins = dw_catalog.by_index(0)
    assert mins[0].energy == pytest.approx(-0.029723, abs=1e-6)
    np.testing.assert_allclose(mins[0].config.x, [0.17266, 0.82734], atol=1e-5)
    saddles = [e for e in dw_catalog.by_index(1) if abs(e.energy - 0.0273139) < 1e-6]
    assert len(saddles) == 4
    tops = dw_catalog.by_index(2)
    got = {tuple(np.round(e.config.x, 6)) for e in tops}
    assert (0.0, 0.5) in got and (0.5, 1.0) in got


def test_build_and_verify_ioc(dw_catalog):
    res = ioc.build_ioc(1, 2, DW, dw_catalog)
    assert len(res.circles) >= 2
    for smp in res.circles:
        rep = ioc.verify_ioc(smp, DW)
        assert rep.passed, rep
        assert np.all(np.diff(smp.configs[:, 0]) >= 0)


def test_verify_ioc_integrable_line():
    # k = 0 standard chain: x_n = n w + s is an exact ordered circle
    E0 = TiltedEnergy(StandardFK(0.0), 0.0)
    smp = ioc.OrderedCircleSample.from_function(1, 2, lambda s: np.array([s, s + 0.5]), n=200)
    rep = ioc.verify_ioc(smp, E0)
    assert rep.passed and rep.tangency_residual < 1e-12


def test_verify_ioc_negative_control():
    E0 = TiltedEnergy(StandardFK(0.0), 0.0)
    smp = ioc.OrderedCircleSample.from_function(
        1, 2, lambda s: np.array([s, s + 0.5 + 0.01 * np.sin(2 * np.pi * s)]), n=200)
    rep = ioc.verify_ioc(smp, E0)
    assert not rep.passed


def test_sample_csv(tmp_path):
    smp = ioc.OrderedCircleSample.from_function(1, 2, lambda s: np.array([s, s + 0.5]), n=10)
    text = smp.write_csv(tmp_path / "c.csv").read_text().splitlines()
    assert text[0] == "s,x_0,x_1"
    assert smp.site(3)[0] == pytest.approx(smp.configs[0, 1] + 1)


def test_minimax_standard_fk():
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    a = PeriodicConfiguration(0, 1, [0.5])
    b = PeriodicConfiguration(0, 1, [1.5])
    r = ioc.minimax(a, b, E)
    assert r.saddle.x[0] == pytest.approx(1.0, abs=1e-8)
    assert r.barrier == pytest.approx(1 / (2 * np.pi**2), abs=1e-10)
    assert r.index == 1
    with pytest.raises(PreconditionError):
        ioc.minimax(a, a, E)


def test_minimax_double_well_symmetric_pair(dw_catalog):
    mins = sorted(dw_catalog.by_index(0), key=lambda e: (e.energy, e.config.x[0]))
    A, B = mins[0].config, mins[1].config
    d = B.x - A.x
    perp = np.array([-d[1], d[0]]) / np.linalg.norm(d)
    mid = 0.5 * (A.x + B.x)
    r1 = ioc.minimax(A, B, DW, via=mid + 0.15 * perp)
    r2 = ioc.minimax(A, B, DW, via=mid - 0.15 * perp)
    assert abs(r1.height - r2.height) < 1e-8
    assert r1.height == pytest.approx(0.0273139, abs=1e-6)
    assert np.max(np.abs(r1.saddle.x - r2.saddle.x)) > 1e-3
