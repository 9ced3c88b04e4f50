import numpy as np

from depinn import PeriodicConfiguration, StandardFK
from depinn import plotting, twistmap
from depinn.ioc import OrderedCircleSample
from depinn.model import TiltedEnergy


def test_aubry_and_velocity(tmp_path):
    x = PeriodicConfiguration(1, 3, [0.1, 0.4, 0.7])
    p = plotting.aubry_figure([x], tmp_path / "a.svg", labels=["x"])
    assert p.exists() and p.stat().st_size > 0
    q = plotting.velocity_figure([0, 0.1, 0.2], [0, 0, 0.1], tmp_path / "v.png", failed=[0.3])
    assert q.read_bytes()[:4] == b"\x89PNG"


def test_svg_is_reproducible(tmp_path):
    a = plotting.fd_figure([0.5, 0.33], [0.02, 0.006], tmp_path / "a.svg", limit=0.002)
    b = plotting.fd_figure([0.5, 0.33], [0.02, 0.006], tmp_path / "b.svg", limit=0.002)
    assert a.read_bytes() == b.read_bytes()


def test_manifold_and_ioc_figures(tmp_path):
    E = TiltedEnergy(StandardFK(1.0), 0.0)
    o = twistmap.find_periodic_orbit(0, 1, E, 0.5)
    arc = twistmap.grow_manifold(o, "unstable-right", 0.2)
    assert plotting.manifold_figure([arc], tmp_path / "m.svg", orbits=[o]).exists()
    smp = OrderedCircleSample.from_function(1, 2, lambda s: np.array([s, s + 0.5]), n=20, label="line")
    assert plotting.ioc_figure([smp], tmp_path / "i.svg").exists()
    assert plotting.path_figure([0, 1, 0], tmp_path / "p.svg").exists()
    t = np.linspace(0, 1, 5)
    assert plotting.front_figure(t, np.outer(t, np.ones(3)), tmp_path / "f.svg").exists()
