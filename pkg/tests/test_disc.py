import numpy as np
import pytest

from depinn import PeriodicConfiguration, StandardFK
from depinn import flow
from depinn.configs import translate
from depinn.disc import (GluingPlan, SlidingFront, build_mediant_config, find_equilibrium_disc,
                         find_sliding_disc, glue, hessian_spectrum_periodic,
                         morse_index_truncated, window_residual)
from depinn.errors import GluingError, PreconditionError
from depinn.model import TiltedEnergy

H = StandardFK(1.0)


def _pair(E):
    y = flow.find_equilibrium(PeriodicConfiguration(0, 1, [0.5]), E).config
    return y, translate(y, 1, 1)


@pytest.fixture(scope="module")
def disc0():
    E = TiltedEnergy(H, 0.0)
    y, z = _pair(E)
    return E, y, z, find_equilibrium_disc(y, z, "advancing", E)


def test_equilibrium_disc_advancing(disc0):
    E, y, z, d = disc0
    assert d.residual < 1e-12
    assert np.max(np.abs(window_residual(d.window, E))) < 1e-12
    assert d.tails_monotone and max(d.tail_gaps) < 1e-8
    assert np.all(np.diff(d.window.values) > 0)
    assert d.morse_index == 0


def test_retreating_disc_is_reflection():
    E = TiltedEnergy(H, 0.0)
    y, z = _pair(E)
    d = find_equilibrium_disc(y, z, "retreating", E)
    assert d.kind == "retreating" and d.residual < 1e-12
    # right asymptote below the left one
    assert d.window.at(-100) > d.window.at(100)


def test_disc_requires_ordered_pair():
    E = TiltedEnergy(H, 0.0)
    y, z = _pair(E)
    with pytest.raises(PreconditionError):
        find_equilibrium_disc(z, y, "advancing", E)
    with pytest.raises(PreconditionError):
        find_equilibrium_disc(y, PeriodicConfiguration(1, 2, [0.5, 1.0]), "advancing", E)


def test_sliding_front_above_depinning():
    E = TiltedEnergy(H, 0.12)
    y, z = _pair(E)
    s = find_sliding_disc(y, z, "advancing", E)
    assert isinstance(s, SlidingFront)
    assert s.T > 0 and s.v == pytest.approx(-1 / s.T)
    assert s.recurrence_error < 1e-6


def test_glue_bound(disc0):
    E, y, z, d = disc0
    win, rep = glue(GluingPlan([y, d.window], [-8], E))
    assert rep.bound_ok
    assert rep.delta > 0
    with pytest.raises(GluingError):
        glue(GluingPlan([y, d.window], [-8], E, delta=1e-12))
    with pytest.raises(PreconditionError):
        glue(GluingPlan([y, d.window], [], E))


def test_mediant_config_polishes(disc0):
    E, y, z, d = disc0
    cfg, resid, tail = build_mediant_config(y, d, 1, 1, 20, E=E)
    assert (cfg.p, cfg.q) == (1, 21)
    assert resid < 1e-3
    eq = flow.find_equilibrium(cfg, E)
    assert np.max(np.abs(eq.config.x - cfg.x)) < 1e-3


def test_morse_index_and_spectrum():
    E = TiltedEnergy(H, 0.0)
    top = PeriodicConfiguration(0, 1, [0.0])
    assert hessian_spectrum_periodic(top, E).morse_index == 1
    bottom = PeriodicConfiguration(0, 1, [0.5])
    assert hessian_spectrum_periodic(bottom, E).morse_index == 0
    # truncation of the maximum to 5 sites: all five modes unstable for k > 4
    rep = morse_index_truncated(PeriodicConfiguration(0, 1, [0.0]), 0, 6, TiltedEnergy(StandardFK(5.0), 0.0))
    assert rep.index == 5 and rep.size == 5
