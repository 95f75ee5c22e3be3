import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from shadowscatter.errors import DomainError, MomentDivergence
from shadowscatter.model import (
    DoubleShadowParams,
    SampleBatch,
    SingleShadowParams,
    log_moment,
    make_rng,
    mean_snr,
    moment,
    moment_ds,
    sample,
    sample_ds,
    sample_inverse_gamma,
    sample_nakagami_sq,
    sample_ss,
    validate,
)

shape = st.floats(0.6, 6.0)
alpha = st.floats(1.05, 6.0)


def test_canonical_ordering():
    p = DoubleShadowParams(1.8, 1.5, 2.5, 2.0, 1.0)
    assert (p.m1, p.m2, p.alpha1, p.alpha2) == (1.5, 1.8, 2.0, 2.5)


def test_reference_set_accepted_unchanged():
    p = validate(DoubleShadowParams(1.5, 1.8, 2.0, 2.5))
    assert p == DoubleShadowParams(1.5, 1.8, 2.0, 2.5)


@pytest.mark.parametrize("bad", [
    dict(m1=1.5, m2=1.8, alpha1=1.0, alpha2=2.0),
    dict(m1=0.0, m2=1.8, alpha1=2.0, alpha2=2.0),
    dict(m1=1.5, m2=1.8, alpha1=2.0, alpha2=2.0, gamma_bar=-1.0),
    dict(m1=1.5, m2=float("nan"), alpha1=2.0, alpha2=2.0),
])
def test_invalid_params_rejected(bad):
    with pytest.raises(DomainError):
        DoubleShadowParams(**bad)


def test_validate_from_mapping():
    p = validate({"model": "SS", "m1": 2.0, "m2": 1.0, "alpha": 3.0})
    assert isinstance(p, SingleShadowParams) and p.m1 == 1.0
    assert validate(p.to_dict()) == p
    with pytest.raises(DomainError):
        validate({"model": "XX", "m1": 1.0})


def test_nakagami_rayleigh_mean():
    n = 200_000
    b = sample_nakagami_sq(1.0, 1.0, n, seed=3)
    assert abs(b.mean() - 1.0) < 3.0 / math.sqrt(n)
    assert stats.kstest(b.values, "expon").statistic < 0.005


def test_nakagami_variance():
    b = sample_nakagami_sq(2.5, 3.0, 1_000_000, seed=4)
    assert np.var(b.values) == pytest.approx(3.6, rel=0.01)


def test_empty_batch():
    assert len(sample_nakagami_sq(1.0, 1.0, 0)) == 0


@pytest.mark.parametrize("a, gb, expected", [(2.0, 1.0, 1.0), (3.0, 6.0, 3.0)])
def test_inverse_gamma_mean(a, gb, expected):
    b = sample_inverse_gamma(a, gb, 1_000_000, seed=5)
    # a=2 has infinite variance, so only a loose check there
    assert b.mean() == pytest.approx(expected, rel=0.03 if a == 2.0 else 0.01)


def test_inverse_gamma_routes_agree():
    a = sample_inverse_gamma(2.5, 1.0, 1_000_000, seed=6, method="reciprocal").values
    b = sample_inverse_gamma(2.5, 1.0, 1_000_000, seed=7, method="inversion").values
    assert stats.ks_2samp(a, b).statistic < 0.005


@pytest.mark.parametrize("p, expected", [
    (DoubleShadowParams(1.0, 1.0, 2.0, 2.0, 1.0), 1.0),
    (DoubleShadowParams(1.5, 1.8, 3.0, 2.0, 6.0), 3.0),
    (SingleShadowParams(1.5, 1.8, 2.0, 1.0), 1.0),
])
def test_sample_mean_matches_closed_form(p, expected):
    assert mean_snr(p) == pytest.approx(expected, rel=1e-14)
    b = sample(p, 2_000_000, seed=8)
    assert b.mean() == pytest.approx(expected, rel=0.05)


def test_ss_dominates_ds():
    ds = np.sort(sample_ds(DoubleShadowParams(1.5, 1.8, 2.5, 2.5), 200_000, seed=9).values)
    ss = np.sort(sample_ss(SingleShadowParams(1.5, 1.8, 2.5), 200_000, seed=10).values)
    grid = np.quantile(ds, np.linspace(0.02, 0.98, 49))
    assert np.all(np.searchsorted(ss, grid) / ss.size < np.searchsorted(ds, grid) / ds.size)


def test_single_draw():
    b = sample_ss(SingleShadowParams(1.5, 1.8, 2.5), 1, seed=1)
    assert len(b) == 1 and b.values[0] >= 0


def test_wrong_model_for_sampler():
    with pytest.raises(DomainError):
        sample_ds(SingleShadowParams(1.5, 1.8, 2.5), 10)


def test_moment_reference_value():
    assert moment_ds(DoubleShadowParams(1.5, 1.8, 3.0, 2.0, 6.0), 1) == pytest.approx(3.0)


def test_moment_divergence():
    with pytest.raises(MomentDivergence):
        moment_ds(DoubleShadowParams(1.5, 1.8, 2.0, 3.0), 2)


def test_second_moment_monte_carlo():
    p = DoubleShadowParams(1.0, 1.0, 4.0, 4.0, 1.0)
    # E[N^4] = 2 per unit-m factor, E[I^2] = 1/((a-1)(a-2)) per shadow factor
    exact = 2.0 * 2.0 / (3.0 * 2.0) ** 2
    assert moment_ds(p, 2) == pytest.approx(exact, rel=1e-13)
    b = sample(p, 10_000_000, seed=11)
    assert np.mean(b.values ** 2) == pytest.approx(exact, rel=0.01)


@settings(max_examples=60, deadline=None)
@given(m1=shape, m2=shape, a1=alpha, a2=alpha, k=st.floats(-0.5, 0.9), omega=st.floats(0.2, 3.0))
def test_log_moment_matches_gamma_products(m1, m2, a1, a2, k, omega):
    p = DoubleShadowParams(m1, m2, a1, a2, 2.0, omega)
    if k >= min(a1, a2) or k <= -min(m1, m2):
        return
    expected = k * math.log(2.0) + 2 * k * math.log(omega)
    for m in (m1, m2):
        expected += math.lgamma(m + k) - math.lgamma(m) - k * math.log(m)
    for a in (a1, a2):
        expected += math.lgamma(a - k) - math.lgamma(a)
    assert log_moment(p, k) == pytest.approx(expected, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(m1=shape, m2=shape, a1=alpha, a2=alpha)
def test_swap_symmetry_of_moments(m1, m2, a1, a2):
    k = 0.5 * min(a1, a2, 2.0) - 0.01
    assert moment(DoubleShadowParams(m1, m2, a1, a2), k) == pytest.approx(
        moment(DoubleShadowParams(m2, m1, a2, a1), k), rel=1e-13)


def test_streams_reproducible_and_thread_independent():
    p = DoubleShadowParams(1.5, 1.8, 2.0, 2.5)
    n = (1 << 18) * 2 + 17
    a = sample(p, n, seed=1, threads=1).values
    b = sample(p, n, seed=1, threads=3).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a[:100], sample(p, 100, seed=1, stream=1).values)
    assert make_rng(1, 2, 3).random() == make_rng(1, 2, 3).random()


def test_batch_round_trips():
    b = sample(SingleShadowParams(1.5, 1.8, 3.0), 50, seed=2)
    again = SampleBatch.from_json(b.to_json())
    assert np.array_equal(again.values, b.values) and again.seed == 2
    assert np.array_equal(SampleBatch.from_csv(b.to_csv(["x=1"])).values, b.values)
