import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from erwlab.rng import standard_normals, uniforms
from erwlab.stats import (Ecdf, EmptySample, OutOfRange, first_passage_survival, half_normal_cdf,
                          inverse_gaussian_square_quantile, ks_one_sample, ks_two_sample,
                          loglog_slope, normal_cdf, normal_quantile, quantile, read_values,
                          write_ks, write_values)


def bisect_quantile(p):
    # independent oracle: invert the erfc-based CDF by bisection
    lo, hi = -10.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(-mid / math.sqrt(2)) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_ks_identical_and_disjoint():
    a = np.array([3.0, 1.0, 2.0])
    assert ks_two_sample(a, a).statistic == 0
    assert ks_two_sample(a, a + 10).statistic == 1


def test_ks_hand_example():
    assert ks_two_sample([1, 2, 3, 4], [1, 2, 3, 5]).statistic == 0.25


def test_ks_empty():
    with pytest.raises(EmptySample):
        ks_two_sample([], [1.0])
    with pytest.raises(EmptySample):
        ks_one_sample([])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
def test_ks_symmetric_and_transform_invariant(a, b):
    a, b = np.array(a), np.array(b)
    d = ks_two_sample(a, b).statistic
    assert d == ks_two_sample(b, a).statistic
    assert 0 <= d <= 1
    assert d == ks_two_sample(np.arctan(a / 100), np.arctan(b / 100)).statistic


def test_ks_one_sample_grid_construction():
    n = 1000
    x = normal_quantile((np.arange(n) + 0.5) / n)
    assert ks_one_sample(x).statistic <= 1 / n


def test_ks_half_normal_negative_value():
    # reference CDF is 0 below zero, so the ECDF mass there is the distance
    r = ks_one_sample([-1.0, 5.0, 6.0, 7.0], "half_normal")
    assert r.statistic >= 0.25


def test_ks_normal_draws():
    z = standard_normals(1, 0, 17, 100_000)
    r = ks_one_sample(z)
    assert r.statistic <= 0.006
    assert r.sizes == (100_000,)


def test_ks_one_sample_table_and_callable():
    u = uniforms(2, 0, 17, 20_000)
    a = ks_one_sample(u, lambda v: np.clip(v, 0, 1))
    b = ks_one_sample(u, ([0.0, 1.0], [0.0, 1.0]))
    assert a.statistic == pytest.approx(b.statistic, abs=1e-15)
    assert a.statistic <= 1.63 / math.sqrt(u.size)


def test_quantile_examples():
    assert quantile(np.arange(1, 101), 0.5) == 50.5
    with pytest.raises(OutOfRange):
        quantile([1, 2], 1.0)
    with pytest.raises(EmptySample):
        quantile([], 0.5)


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50), st.floats(0.01, 0.98))
def test_quantile_monotone(xs, q):
    assert quantile(xs, q) <= quantile(xs, q + 0.01)


def test_normal_quantile_examples():
    assert normal_quantile(0.5) == 0
    assert normal_quantile(0.875) == pytest.approx(bisect_quantile(0.875), abs=1e-9)
    assert normal_quantile(0.875) == pytest.approx(1.1503, abs=1e-4)
    assert normal_quantile(0.625) == pytest.approx(bisect_quantile(0.625), abs=1e-9)
    with pytest.raises(OutOfRange):
        normal_quantile(0.0)


def test_normal_quantile_inverts_cdf():
    x = np.linspace(-6, 6, 2001)
    assert np.max(np.abs(normal_quantile(normal_cdf(x)) - x)) <= 1e-8


def test_normal_cdf_against_erf():
    x = np.linspace(-8, 8, 101)
    ref = np.array([0.5 * math.erfc(-v / math.sqrt(2)) for v in x])
    assert np.max(np.abs(normal_cdf(x) - ref)) <= 1e-10


def test_half_normal_and_ratio_oracle():
    assert half_normal_cdf(-1.0) == 0
    assert half_normal_cdf(normal_quantile(0.875)) == pytest.approx(0.75)
    ratio = normal_quantile(0.875) / normal_quantile(0.625)
    assert ratio == pytest.approx(3.61, abs=0.01)


def test_inverse_gaussian_square_quantile():
    q = inverse_gaussian_square_quantile(np.array([0.25, 0.75]))
    assert q[1] / q[0] == pytest.approx((1.1503 / 0.3186) ** 2, rel=1e-3)
    # survival at the quantile is 1 - p
    assert first_passage_survival(q[0]) == pytest.approx(0.75)


def test_ecdf_right_continuous():
    f = Ecdf([1, 2, 2, 3])
    assert f(0.5) == 0 and f(1) == 0.25 and f(2) == 0.75 and f(3) == 1
    x, y = f.points()
    assert x.tolist() == [1, 2, 3] and y.tolist() == [0.25, 0.75, 1.0]


def test_loglog_slope():
    x = np.array([1e2, 1e3, 1e4])
    assert loglog_slope(x, 3 * x**0.5) == pytest.approx(0.5)


def test_dump_roundtrip(tmp_path):
    v = np.array([0.1, -2.5, 1e-300])
    write_values(tmp_path / "v.txt", v)
    assert np.array_equal(read_values(tmp_path / "v.txt"), v)
    write_ks(tmp_path / "ks.json", ks_two_sample([1, 2], [2, 3]))
    d = json.loads((tmp_path / "ks.json").read_text())
    assert d["statistic"] == 0.5 and d["sizes"] == [2, 2]
