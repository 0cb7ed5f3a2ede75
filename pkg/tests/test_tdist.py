import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedfollow.tdist import betainc, paired_t, t_cdf, t_two_tailed_p

# two-tailed tails from numerical integration of the t density, frozen
QUAD = [
    (4.242640687119285, 4, 0.013235599563682698),
    (4.604, 4, 0.010000714436015678),
    (2.0, 10, 0.07338803477074037),
    (1.0, 1, 0.5),
]


@pytest.mark.parametrize("t,df,p", QUAD)
def test_tail_matches_quadrature(t, df, p):
    assert t_two_tailed_p(t, df) == pytest.approx(p, abs=1e-12)


def test_calibration_point():
    assert abs(t_two_tailed_p(4.604, 4) - 0.010) <= 2e-4


def test_cauchy_closed_form():
    for t in (0.3, 1.7, 12.0):
        assert t_two_tailed_p(t, 1) == pytest.approx(1 - 2 * math.atan(t) / math.pi, abs=1e-13)


def test_betainc_edges_and_symmetry():
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0
    assert betainc(1, 1, 0.37) == pytest.approx(0.37, abs=1e-14)
    assert betainc(2.5, 4, 0.3) == pytest.approx(1 - betainc(4, 2.5, 0.7), abs=1e-14)
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)


def test_cdf_monotone_and_centred():
    assert t_cdf(0.0, 7) == 0.5
    xs = np.linspace(-6, 6, 121)
    vals = [t_cdf(x, 7) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_worked_example():
    res = paired_t([1, 2, 3, 4, 5], [0] * 5)
    assert res.t_statistic == pytest.approx(math.sqrt(18), abs=1e-12)
    assert res.df == 4
    assert res.p_value == pytest.approx(0.013235599563682698, abs=1e-12)


def test_degenerate_cases():
    same = paired_t([0.1, 0.5, 0.2], [0.1, 0.5, 0.2])
    assert (same.t_statistic, same.p_value, same.degenerate) == (0.0, 1.0, False)
    const = paired_t([2, 3, 4, 5], [1, 2, 3, 4])
    assert const.degenerate and const.p_value == 0.0 and const.mean_difference == 1.0
    with pytest.raises(ValueError):
        paired_t([1], [2])
    with pytest.raises(ValueError):
        paired_t([1, 2], [2])


def test_antisymmetry_on_random_samples():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        a, b = rng.random(n), rng.random(n)
        ab, ba = paired_t(a, b), paired_t(b, a)
        assert ab.t_statistic == pytest.approx(-ba.t_statistic, abs=1e-12)
        assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.integers(1, 200))
def test_p_in_unit_interval(t, df):
    p = t_two_tailed_p(t, df)
    assert 0.0 <= p <= 1.0
