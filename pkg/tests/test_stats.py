import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from mpu.errors import DomainError
from mpu.stats import dkw_halfwidth, ecdf, one_sample_ks, quantile7, standard_error, two_sample_ks

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40)


def test_two_sample_ks_trivial():
    assert two_sample_ks([1, 2, 3], [1, 2, 3]) == 0.0
    assert two_sample_ks([0], [1]) == 1.0
    with pytest.raises(DomainError):
        two_sample_ks([], [1])


def test_two_sample_ks_matches_scipy():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=137), rng.normal(0.3, 1.0, size=91)
    assert two_sample_ks(a, b) == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-15)


def test_one_sample_ks_matches_scipy():
    x = np.random.default_rng(1).normal(size=200)
    assert one_sample_ks(x, sps.norm.cdf) == pytest.approx(sps.kstest(x, "norm").statistic, abs=1e-15)
    with pytest.raises(DomainError):
        one_sample_ks([], sps.norm.cdf)


def test_quantile7():
    assert quantile7(np.arange(1, 101), 0.5) == 50.5
    assert quantile7([3.0], 0.9) == 3.0
    assert quantile7([1, 2, 3, 4], 0.25) == 1.75
    with pytest.raises(DomainError):
        quantile7([], 0.5)


def test_misc():
    assert ecdf([1, 2, 3], 2) == pytest.approx(2 / 3)
    assert dkw_halfwidth(100, 0.05) == pytest.approx(np.sqrt(np.log(40) / 200))
    assert standard_error([1.0]) == float("inf")
    assert standard_error([1.0, 3.0]) == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(a=samples, b=samples)
def test_ks_symmetric_and_bounded(a, b):
    k = two_sample_ks(a, b)
    assert k == two_sample_ks(b, a)
    assert 0.0 <= k <= 1.0


@settings(max_examples=40, deadline=None)
@given(a=samples, data=st.data())
def test_quantile_permutation_invariant(a, data):
    perm = data.draw(st.permutations(a))
    q = (0.1, 0.5, 0.9)
    np.testing.assert_array_equal(quantile7(a, q), quantile7(perm, q))
