import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from shadowscatter import analytics
from shadowscatter.analytics import EvalOptions
from shadowscatter.errors import ClosedFormPole, DomainError, SeriesInapplicable
from shadowscatter.model import DoubleShadowParams, SingleShadowParams, draw_components, make_rng, mean_snr
from shadowscatter.selection import (
    SelectionParams,
    asnr,
    asnr_ds,
    asnr_ds_closed,
    asnr_quadrature,
    asnr_ss,
    asnr_table,
    cdf_imax,
    cdf_out,
    cdf_out_ds,
    expansion_terms,
    op_table,
    pdf_imax,
    pdf_imax_ds,
    pdf_out,
    series_applicable,
    sf_out,
    shadow_cdf,
    shadow_cdf_series,
    shadow_pdf,
    simulate_selection,
)

REF = DoubleShadowParams(1.5, 1.8, 2.0, 2.5, 1.0)
QUAD = EvalOptions(method="quadrature")
SERIES = EvalOptions(method="series")

# Frozen mpmath order-statistics values (Bessel-K density of G1 G2, tail by
# mpmath.quad, 30 digits) for L=3, alpha=(2, 2.5), gamma_bar=1.
ORACLE_IMAX_L3 = {0.1: 0.111102646775966319086, 0.5: 0.889057532739532460670, 2.0: 0.108476281257896158372}
ORACLE_ASNR_L3 = 1.42264898643499466545


def ds(a1, L, gb=1.0, m=(1.5, 1.8)):
    return SelectionParams(DoubleShadowParams(m[0], m[1], a1, a1 + 0.5, gb), L)


def ss(a, L, gb=1.0, m=(1.5, 1.8)):
    return SelectionParams(SingleShadowParams(m[0], m[1], a, gb), L)


def test_selection_params_validation():
    with pytest.raises(DomainError):
        SelectionParams(REF, 0)
    sel = SelectionParams(REF, 3)
    assert sel.model == "DS" and sel.with_L(5).L == 5


@pytest.mark.parametrize("y", sorted(ORACLE_IMAX_L3))
def test_imax_against_oracle(y):
    sel = SelectionParams(REF, 3)
    assert pdf_imax(sel, y, SERIES) == pytest.approx(ORACLE_IMAX_L3[y], rel=1e-9)
    assert pdf_imax(sel, y, QUAD) == pytest.approx(ORACLE_IMAX_L3[y], rel=1e-7)


def test_asnr_against_oracle():
    sel = SelectionParams(REF, 3)
    assert asnr_ds_closed(sel) == pytest.approx(ORACLE_ASNR_L3, rel=1e-12)
    assert asnr_quadrature(sel) == pytest.approx(ORACLE_ASNR_L3, rel=1e-7)


@pytest.mark.parametrize("sel", [ds(1.5, 2), ds(2.0, 3), ds(3.0, 5), ds(2.5, 4), ss(2, 3), ss(3, 5), ss(4, 2)])
def test_imax_routes_agree(sel):
    y = np.logspace(-1.5, 1.5, 25) * sel.base.gamma_bar
    np.testing.assert_allclose(pdf_imax(sel, y, SERIES), pdf_imax(sel, y, QUAD), rtol=1e-6)


@pytest.mark.parametrize("sel", [ds(2.0, 3), ss(3, 2), SelectionParams(DoubleShadowParams(1, 2, 1.7, 2.9), 4)])
def test_imax_normalised(sel):
    val, _ = integrate.quad(lambda t: pdf_imax(sel, math.exp(t)) * math.exp(t), -30, 30, limit=300)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_imax_l1_is_shadow_density():
    y = np.logspace(-2, 2, 11)
    np.testing.assert_allclose(pdf_imax(ds(2.0, 1), y), shadow_pdf(ds(2.0, 1).base, y), rtol=1e-12)
    np.testing.assert_allclose(pdf_imax(SelectionParams(DoubleShadowParams(1, 1, 1.7, 2.2), 1), y, QUAD),
                               shadow_pdf(DoubleShadowParams(1, 1, 1.7, 2.2), y), rtol=1e-7)


def test_shadow_cdf_routes_agree():
    y = np.logspace(-2, 2, 15)
    for a1 in (1.5, 2.0, 3.5):
        base = DoubleShadowParams(1, 1, a1, a1 + 0.5, 0.7)
        np.testing.assert_allclose(shadow_cdf_series(base, y), shadow_cdf(base, y, QUAD), rtol=1e-8, atol=1e-15)


def test_imax_matches_max_of_draws():
    sel = SelectionParams(REF, 3)
    _, shadow = draw_components(REF, make_rng(31), (1_000_000, 3))
    imax = shadow.max(axis=1)
    edges = np.quantile(imax, np.linspace(0.05, 0.95, 10))
    est = np.diff(np.searchsorted(np.sort(imax), edges) / imax.size)
    exact = np.diff(cdf_imax(sel, edges))
    np.testing.assert_allclose(est, exact, rtol=0.02)
    mids = np.sqrt(edges[1:] * edges[:-1])
    assert np.all(np.abs(exact / np.diff(edges) / pdf_imax_ds(sel, mids) - 1) < 0.05)


def test_series_applicability():
    assert series_applicable(ds(2.0, 3)) is None
    assert "integer" in series_applicable(ds(2.3, 3))
    assert "alpha2" in series_applicable(SelectionParams(DoubleShadowParams(1, 1, 2.5, 2.5), 2))
    assert series_applicable(ds(2.0, 9)) is not None
    assert series_applicable(ss(2.5, 2)) is not None
    with pytest.raises(SeriesInapplicable):
        pdf_imax(SelectionParams(DoubleShadowParams(1, 1, 2.5, 2.5), 2), 1.0, SERIES)
    # auto falls back to quadrature
    assert pdf_imax(SelectionParams(DoubleShadowParams(1, 1, 2.5, 2.5), 2), 1.0) > 0


def test_expansion_terms_reproduce_density():
    sel = ds(2.0, 3)
    terms = expansion_terms(sel)
    assert len(terms) > 1
    y = np.array([0.3, 1.0, 3.0])
    total = sum(t.weight * shadow_pdf(t.component, y) for t in terms)
    np.testing.assert_allclose(total, pdf_imax(sel, y, QUAD), rtol=1e-7)


def test_l1_output_is_single_link():
    g = np.logspace(-2, 2, 9)
    for sel in (ds(2.0, 1), ss(3, 1), SelectionParams(DoubleShadowParams(1, 1, 1.7, 2.9), 1)):
        np.testing.assert_allclose(cdf_out(sel, g), analytics.cdf(sel.base, g), rtol=1e-7, atol=1e-14)
        np.testing.assert_allclose(pdf_out(sel, g), analytics.pdf(sel.base, g), rtol=1e-7)


@pytest.mark.parametrize("L", [2, 3, 5])
def test_output_routes_agree(L):
    sel = SelectionParams(REF, L)
    g = np.logspace(-2, 2, 13)
    np.testing.assert_allclose(cdf_out(sel, g, SERIES), cdf_out(sel, g, QUAD), rtol=1e-7, atol=1e-13)
    np.testing.assert_allclose(pdf_out(sel, g, SERIES), pdf_out(sel, g, QUAD), rtol=1e-6)
    np.testing.assert_allclose(sf_out(sel, g) + cdf_out(sel, g), 1.0, atol=1e-9)


def test_cdf_decreasing_in_l():
    g = np.logspace(-2, 1, 7)
    cols = np.array([cdf_out_ds(SelectionParams(REF, L), g) for L in (1, 2, 3, 5)])
    assert np.all(np.diff(cols, axis=0) < 0)


def test_l2_against_simulation():
    sel = SelectionParams(REF, 2)
    x = np.sort(simulate_selection(sel, 1_000_000, seed=32).values)
    g = np.quantile(x, np.linspace(0.02, 0.98, 25))
    np.testing.assert_allclose(cdf_out(sel, g), np.searchsorted(x, g, side="right") / x.size, atol=0.003)


def test_asnr_l1_is_mean():
    for sel in (ds(2.0, 1, 3.0), ss(3, 1, 0.5)):
        assert asnr(sel)[0] == pytest.approx(mean_snr(sel.base), rel=1e-12)


def test_asnr_independent_of_fading():
    ref = asnr_ds(ds(2.0, 3))
    for m in [(0.6, 0.9), (1.0, 4.0), (3.0, 3.0)]:
        assert asnr_ds(ds(2.0, 3, m=m)) == ref
        assert asnr_ss(ss(3, 3, m=m)) == asnr_ss(ss(3, 3))


@pytest.mark.parametrize("make", [lambda L: ds(1.5, L), lambda L: ds(3.0, L), lambda L: ss(2, L), lambda L: ss(4, L)])
def test_asnr_increasing_with_diminishing_gain(make):
    vals = np.array([asnr(make(L))[0] for L in range(1, 7)])
    assert np.all(np.diff(vals) > 0) and np.all(np.diff(vals, 2) < 0)


@pytest.mark.parametrize("sel", [ds(2.0, 3), ds(1.5, 5), ss(2, 4), ss(5, 2)])
def test_asnr_closed_form_matches_quadrature(sel):
    assert asnr(sel)[1] == "closed-form"
    assert asnr(sel)[0] == pytest.approx(asnr_quadrature(sel), rel=1e-8)


def test_asnr_falls_back_off_grid():
    sel = SelectionParams(DoubleShadowParams(1, 1, 1.7, 2.9), 3)
    val, route = asnr(sel)
    assert route == "quadrature" and val > mean_snr(sel.base)
    with pytest.raises((SeriesInapplicable, ClosedFormPole)):
        asnr(sel, SERIES)


def test_asnr_against_simulation():
    sel = SelectionParams(REF, 3)
    mc = simulate_selection(sel, 10_000_000, seed=33).mean()
    assert mc == pytest.approx(asnr_ds(sel), rel=0.01)
    sel = ss(3, 2)
    assert simulate_selection(sel, 2_000_000, seed=34).mean() == pytest.approx(asnr_ss(sel), rel=0.01)


def test_policies():
    base = SelectionParams(REF, 1)
    a = simulate_selection(base, 1000, seed=1, policy="shadow_max").values
    for policy in ("snr_max", "random"):
        np.testing.assert_array_equal(simulate_selection(base, 1000, seed=1, policy=policy).values, a)
    sel = SelectionParams(DoubleShadowParams(1.5, 1.8, 3.0, 3.5), 3)
    means = {p: simulate_selection(sel, 400_000, seed=2, policy=p).mean() for p in ("shadow_max", "snr_max", "random")}
    assert means["random"] < means["shadow_max"] < means["snr_max"]
    with pytest.raises(DomainError):
        simulate_selection(sel, 10, policy="best")


@settings(max_examples=15, deadline=None)
@given(a1=st.sampled_from([1.5, 2.0, 2.5, 3.0]), L=st.integers(1, 5), c=st.floats(0.1, 10.0))
def test_scale_equivariance(a1, L, c):
    sel, scaled = ds(a1, L), ds(a1, L, gb=c)
    g = np.array([0.1, 1.0, 10.0])
    np.testing.assert_allclose(cdf_out(scaled, c * g), cdf_out(sel, g), rtol=1e-7, atol=1e-13)
    assert asnr(scaled)[0] == pytest.approx(c * asnr(sel)[0], rel=1e-12)


def test_tables():
    header, rows = op_table(REF, [1, 2, 3, 5], [-10.0, 0.0, 10.0])
    assert header == ["threshold_db", "op_L1", "op_L2", "op_L3", "op_L5"]
    assert all(np.all(np.diff(r[1:]) < 0) for r in rows)
    header, rows = asnr_table(REF, [1, 2], [0.0, 10.0])
    assert header == ["gamma_bar_db", "asnr_db_L1", "asnr_db_L2"]
    assert rows[1][1] - rows[0][1] == pytest.approx(10.0)
