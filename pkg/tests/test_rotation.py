import math
from fractions import Fraction

import pytest

from depinn import StandardFK
from depinn.errors import PreconditionError
from depinn.rotation import aitken, farey_neighbours, fd_limit, mediant_sequence


@pytest.mark.parametrize("p,q", [(0, 1), (1, 2), (2, 5), (3, 7), (5, 8)])
def test_farey_neighbours_unimodular(p, q):
    f = farey_neighbours(p, q)
    pu, qu = f.upper
    pl, ql = f.lower
    assert pu * q - p * qu == 1
    assert p * ql - pl * q == 1
    assert 1 <= qu <= q and 1 <= ql <= q


def test_farey_zero():
    f = farey_neighbours(0, 1)
    assert f.upper == (1, 1) and f.lower == (-1, 1)
    with pytest.raises(PreconditionError):
        farey_neighbours(2, 4)


def test_mediant_sequence():
    seq = mediant_sequence(0, 1, "plus", 4)
    assert seq == [Fraction(1, n) for n in range(2, 6)]
    assert mediant_sequence(1, 2, "minus", 2) == [Fraction(1, 3), Fraction(2, 5)]
    with pytest.raises(PreconditionError):
        mediant_sequence(0, 1, "plus", 3, neighbour=(2, 1))


def test_aitken_geometric():
    # s_n = 1 + 0.5^n has limit 1
    assert aitken(1.5, 1.25, 1.125) == pytest.approx(1.0)


def test_fd_limit_short_tail():
    est = fd_limit(0, 1, "plus", StandardFK(1.0), n_max=4, tol_F=1e-7)
    vals = [F for *_, F in est.samples]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert 0 <= est.estimate <= min(vals)
    assert est.F_d_center == pytest.approx(1 / (2 * math.pi))
    with pytest.raises(ValueError):
        fd_limit(0, 1, "plus", StandardFK(1.0), n_max=2)
