import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

import mp_oracle
from shadowscatter.analytics import (
    EvalOptions,
    bep_bpsk,
    capacity,
    cdf,
    cdf_ds,
    cdf_table,
    evaluate_metric,
    grid_rows,
    outage,
    pdf,
    pdf_ds,
    pdf_ss,
    pdf_with_method,
    sf,
)
from shadowscatter.errors import DomainError, EvalError
from shadowscatter.model import DoubleShadowParams, SingleShadowParams, sample

DS = DoubleShadowParams(1.5, 1.8, 2.0, 2.5, 1.0)
SS = SingleShadowParams(1.5, 1.8, 2.5, 1.0)
QUAD = EvalOptions(method="quadrature")
SERIES = EvalOptions(method="series")

# Frozen from mp_oracle at 30 digits: Meijer-G densities, mpmath.quad for the
# CDF, E[erfc(sqrt(g))/2] for the BEP and E[log2(1+g)] for the capacity.
ORACLE_PDF_DS = {0.1: 2.29542800231141385543, 1.0: 0.135490869880865970401, 10.0: 0.00104212607503600992094}
ORACLE_CDF_DS = {0.1: 0.369187943204812919250, 1.0: 0.864974336258153234264, 10.0: 0.993341705567429796073}
ORACLE_CDF_SS = {0.1: 0.246939914170414757068, 1.0: 0.831340253178548292824, 10.0: 0.996568686473244945890}
ORACLE_BEP_DS = 0.258331075960591264435
ORACLE_BEP_SS = 0.223616055185698391080
ORACLE_CAP_DS = 1.17843864708136900607  # m=(1.5,1.8), alpha=(3,3.1), gamma_bar=10
ORACLE_CAP_SS = 1.88984793269203434006  # m=(1.5,1.8), alpha=3, gamma_bar=10

ORACLE_TOL = 1e-7

shape = st.floats(0.6, 5.0)
alpha = st.floats(1.2, 5.0)
gbar = st.floats(0.1, 10.0)


def integrate_log(fn, p):
    """``int fn(g) dg`` over (0, inf) as an integral over log g."""
    val, _ = integrate.quad(lambda t: fn(math.exp(t)) * math.exp(t), -60, 60, limit=400,
                            epsabs=1e-13, epsrel=1e-10, points=[math.log(p.gamma_bar)])
    return val


@pytest.mark.parametrize("g", sorted(ORACLE_PDF_DS))
def test_pdf_against_meijer_oracle(g):
    assert pdf(DS, g) == pytest.approx(ORACLE_PDF_DS[g], rel=ORACLE_TOL)
    assert pdf(DS, g, QUAD) == pytest.approx(ORACLE_PDF_DS[g], rel=ORACLE_TOL)


@pytest.mark.parametrize("g", [0.03, 0.7, 4.0, 40.0])
def test_pdf_live_oracle(g):
    assert pdf(SS, g) == pytest.approx(float(mp_oracle.pdf_ss(g, 1.5, 1.8, 2.5)), rel=ORACLE_TOL)
    p = DoubleShadowParams(0.8, 2.3, 1.7, 3.5, 2.0, 1.3)
    ref = float(mp_oracle.pdf_ds(g, 0.8, 2.3, 1.7, 3.5, 2.0, 1.3))
    assert pdf(p, g) == pytest.approx(ref, rel=ORACLE_TOL)


@pytest.mark.parametrize("g", sorted(ORACLE_CDF_DS))
def test_cdf_against_oracle(g):
    assert cdf(DS, g) == pytest.approx(ORACLE_CDF_DS[g], rel=ORACLE_TOL)
    assert cdf(SS, g) == pytest.approx(ORACLE_CDF_SS[g], rel=ORACLE_TOL)
    assert sf(DS, g) == pytest.approx(1.0 - ORACLE_CDF_DS[g], rel=1e-6)


def test_bep_against_oracle():
    assert bep_bpsk(DS) == pytest.approx(ORACLE_BEP_DS, rel=ORACLE_TOL)
    assert bep_bpsk(SS) == pytest.approx(ORACLE_BEP_SS, rel=ORACLE_TOL)


def test_capacity_against_oracle():
    assert capacity(DoubleShadowParams(1.5, 1.8, 3.0, 3.1, 10.0)) == pytest.approx(ORACLE_CAP_DS, rel=ORACLE_TOL)
    assert capacity(SingleShadowParams(1.5, 1.8, 3.0, 10.0)) == pytest.approx(ORACLE_CAP_SS, rel=ORACLE_TOL)


@pytest.mark.parametrize("p", [DS, SS, DoubleShadowParams(0.7, 4.0, 1.3, 4.5, 3.0, 0.5),
                               SingleShadowParams(3.0, 5.0, 1.2, 0.2)])
def test_normalisation(p):
    assert integrate_log(lambda g: pdf(p, g), p) == pytest.approx(1.0, abs=1e-6)


def _route_agreement(p, g):
    values, tags = pdf_with_method(p, g)
    series = tags == "series"
    np.testing.assert_allclose(values[series], pdf(p, g[series], QUAD), rtol=1e-6)
    return series


@settings(max_examples=25, deadline=None)
@given(m1=shape, m2=shape, a1=alpha, a2=alpha, gb=gbar)
def test_series_and_quadrature_agree(m1, m2, a1, a2, gb):
    p = DoubleShadowParams(m1, m2, a1, a2, gb)
    series = _route_agreement(p, gb * np.logspace(-2, 2, 17) / p.m1 / p.m2)
    assert series.any()


@settings(max_examples=25, deadline=None)
@given(m1=shape, m2=shape, a=alpha, gb=gbar)
def test_ss_series_and_quadrature_agree(m1, m2, a, gb):
    _route_agreement(SingleShadowParams(m1, m2, a, gb), gb * np.logspace(-2, 2, 9))


def test_near_integer_tricomi_parameter_handled():
    # 1 + m1 - m2 evaluates to 1 + 2e-16 here
    p = SingleShadowParams(1.2, 1.2, 2.0, 1.0)
    g = np.array([0.01, 0.1, 1.0])
    ref = [float(mp_oracle.pdf_ss(x, 1.2, 1.2, 2.0)) for x in g]
    np.testing.assert_allclose(pdf(p, g), ref, rtol=ORACLE_TOL)
    np.testing.assert_allclose(pdf(SingleShadowParams(1.2, 1.2 + 1e-6, 2.0), g, QUAD),
                               pdf(p, g), rtol=1e-4)


def test_forced_series_outside_window_raises():
    assert pdf(DS, 1.0, SERIES) == pytest.approx(ORACLE_PDF_DS[1.0], rel=ORACLE_TOL)
    with pytest.raises(EvalError):
        pdf(DS, 1e4, SERIES)


@settings(max_examples=20, deadline=None)
@given(m1=shape, m2=shape, a1=alpha, a2=alpha)
def test_swap_symmetry(m1, m2, a1, a2):
    g = np.array([0.05, 0.5, 5.0])
    np.testing.assert_allclose(pdf(DoubleShadowParams(m1, m2, a1, a2), g),
                               pdf(DoubleShadowParams(m2, m1, a2, a1), g), rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(m1=shape, m2=shape, a1=alpha, a2=alpha, c=st.floats(0.05, 20.0))
def test_scale_equivariance(m1, m2, a1, a2, c):
    p = DoubleShadowParams(m1, m2, a1, a2, 1.0)
    q = p.replace(gamma_bar=c)
    g = np.array([0.1, 1.0, 10.0])
    np.testing.assert_allclose(pdf(q, c * g), pdf(p, g) / c, rtol=1e-7)
    np.testing.assert_allclose(cdf(q, c * g), cdf(p, g), rtol=1e-7, atol=1e-12)


@pytest.mark.parametrize("p", [DS, SS])
def test_cdf_derivative_is_pdf(p):
    g = np.logspace(-1.5, 1.5, 7)
    h = 1e-4 * g
    deriv = (np.asarray(cdf(p, g + h)) - np.asarray(cdf(p, g - h))) / (2 * h)
    np.testing.assert_allclose(deriv, pdf(p, g), rtol=1e-4)


@pytest.mark.parametrize("p", [DS, SS, DoubleShadowParams(0.6, 0.7, 1.1, 1.2, 1.0)])
def test_pdf_nonnegative_and_cdf_monotone(p):
    g = p.gamma_bar * np.logspace(-6, 6, 121)
    assert np.all(np.asarray(pdf(p, g)) >= 0)
    F = np.asarray(cdf(p, g))
    assert np.all(np.diff(F) >= -1e-12) and np.all((F >= 0) & (F <= 1))


def test_cdf_limits():
    assert cdf(DS, 0.0) == 0.0
    assert cdf(DS, np.inf) == 1.0
    assert cdf(DS, 1e12) > 1 - 1e-9
    assert outage(DS, 0.0) == 0.0


def test_monte_carlo_median():
    x = sample(DS, 10_000_000, seed=21).values
    assert cdf(DS, np.median(x)) == pytest.approx(0.5, abs=0.002)


def test_outage_matches_monte_carlo_at_threshold_equal_gamma_bar():
    x = sample(DS, 2_000_000, seed=22).values
    assert outage(DS, DS.gamma_bar, "DS") == pytest.approx(np.mean(x <= DS.gamma_bar), abs=0.003)


def test_ecdf_sup_distance_within_ks_bound():
    n = 1_000_000
    x = np.sort(sample(DS, n, seed=23).values)
    F = cdf_table(DS)(x)
    d = max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))
    assert d < 1.5 * 1.36 / math.sqrt(n)


def test_density_against_histogram():
    p = DoubleShadowParams(1.0, 1.0, 2.0, 2.0, 1.0)
    x = sample(p, 10_000_000, seed=24).values
    lo, hi = 0.95, 1.05
    est = np.mean((x > lo) & (x <= hi)) / (hi - lo)
    assert est == pytest.approx(pdf_ds(p, 1.0), rel=0.02)


@pytest.mark.parametrize("m1, a", [(1.0, 2.0), (1.5, 2.5), (3.0, 4.0)])
def test_ds_outage_exceeds_ss(m1, a):
    g = np.logspace(-3, 0, 13)
    ds = cdf(DoubleShadowParams(m1, m1 + 0.3, a, a, 1.0), g)
    ss = cdf(SingleShadowParams(m1, m1 + 0.3, a, 1.0), g)
    assert np.all(ds > ss)


def test_ds_upper_tail_is_heavier():
    # the ordering above reverses far above gamma_bar: two inverse-gamma factors
    g = np.array([30.0, 100.0])
    assert np.all(sf(DoubleShadowParams(1.0, 1.3, 2.0, 2.0), g) > sf(SingleShadowParams(1.0, 1.3, 2.0), g))


def test_bep_limits_and_monotonicity():
    assert bep_bpsk(DS.replace(gamma_bar=1e-8)) == pytest.approx(0.5, abs=1e-3)
    vals = [bep_bpsk(DS.replace(gamma_bar=10 ** (d / 10))) for d in range(-5, 26, 5)]
    assert np.all(np.diff(vals) < 0) and all(0 < v <= 0.5 for v in vals)


def test_capacity_limits_and_bandwidth():
    assert capacity(SS.replace(gamma_bar=1e-9)) < 1e-8
    c = capacity(SS)
    assert capacity(SS, bandwidth=2e6) == pytest.approx(2e6 * c, rel=1e-12)
    with pytest.raises(DomainError):
        capacity(SS, bandwidth=0.0)


def test_model_mismatch_rejected():
    with pytest.raises(DomainError):
        bep_bpsk(DS, model="SS")
    with pytest.raises(DomainError):
        cdf_ds(SS, 1.0)
    with pytest.raises(DomainError):
        pdf_ss(DS, 1.0)


def test_metric_report_and_rows():
    rep = evaluate_metric("bep", DS)
    assert rep.value == pytest.approx(ORACLE_BEP_DS, rel=ORACLE_TOL)
    rows = grid_rows("pdf", DS, [0.0, 1.0])
    assert rows[0][1] == 0.0 and rows[1][2] in ("series", "quadrature")
    with pytest.raises(DomainError):
        evaluate_metric("snr", DS)
