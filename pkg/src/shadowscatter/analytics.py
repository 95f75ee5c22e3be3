"""Densities, distribution functions and link metrics of the DS and SS models.

Two evaluation routes are provided for the densities:

* ``series`` -- the hypergeometric reductions of the Meijer-G densities
  (regularised Gauss 2F1 for DS, Tricomi U for SS);
* ``quadrature`` -- a 1-D mixing integral over the log of the shadowing
  variable, ``f(g) = int f_N(g/x) f_I(x) / x dx``, with both factor densities
  written through modified Bessel functions of the second kind.

Distribution functions use the conditional route
``F(g) = E[F_A(g / B)]`` where ``A = N1^2 I1`` is a scaled beta-prime variable
with a regularised incomplete-beta CDF, and ``B`` is the remaining factor.
BEP and capacity are outer integrals of these.

All functions accept scalars or arrays and are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import special, stats

from .errors import DomainError, EvalError
from .model import ChannelParams, DoubleShadowParams, SingleShadowParams, validate
from .quadrature import trapezoid

# tail mass dropped on each side of every factor when choosing integration ranges
TAIL_EPS = 1e-17
# the 2F1 route is used only when |1 - 1/(gt * g)| stays below this
HYP2F1_ARG_LIMIT = 0.8
# the Tricomi-U route is used for gt * g inside this window
HYPERU_WINDOW = (1e-2, 50.0)
# scipy's hyperu cancels badly when b sits just off an integer: snap inside the
# first gap, send points in the second band to quadrature
HYPERU_SNAP = 1e-12
HYPERU_NEAR_INTEGER = 1e-3
LOG2 = math.log(2.0)


@dataclass(frozen=True)
class EvalOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_quad_nodes: int = 1 << 16
    method: str = "auto"

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("tolerances must be positive")
        if self.max_quad_nodes < 64:
            raise DomainError("max_quad_nodes must be at least 64")
        if self.method not in ("auto", "series", "quadrature"):
            raise DomainError(f"unknown method {self.method!r}")


DEFAULT_OPTIONS = EvalOptions()


@dataclass(frozen=True)
class ModelConstants:
    s1: float
    s2: float
    gamma_tilde: float


def model_constants(params: ChannelParams) -> ModelConstants:
    p = validate(params)
    lg = special.gammaln(p.m1) + special.gammaln(p.m2)
    if isinstance(p, DoubleShadowParams):
        s1 = math.exp(-(lg + special.gammaln(p.alpha1) + special.gammaln(p.alpha2)))
        s2 = math.nan
    else:
        s1 = math.nan
        s2 = math.exp(-(lg + special.gammaln(p.alpha)))
    return ModelConstants(s1, s2, p.m1 * p.m2 / (p.omega**2 * p.gamma_bar))


@dataclass
class MetricReport:
    name: str
    value: float
    method: str
    params: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# log-variable kernels
# ---------------------------------------------------------------------------


def log_bessel_k(nu: float, z):
    """``log K_nu(z)`` without overflow for large or tiny ``z``."""
    nu = abs(float(nu))
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.log(special.kve(nu, z)) - z
    bad = ~np.isfinite(out) & (z > 0) & (z < 1.0)
    if np.any(bad):
        zb = z[bad]
        if nu > 0:
            out[bad] = special.gammaln(nu) - LOG2 + nu * (LOG2 - np.log(zb))
        else:
            out[bad] = np.log(-np.log(zb / 2.0) - np.euler_gamma)
    return out


def log_gamma_kernel(y, a: float):
    """Density of ``log G`` at ``y`` for ``G ~ Gamma(a, 1)``, in logs."""
    with np.errstate(over="ignore"):
        return a * y - np.exp(y) - special.gammaln(a)


def log_gamma_product_kernel(y, a: float, b: float):
    """Density of ``log(G_a G_b)`` at ``y`` for independent unit-scale gammas."""
    with np.errstate(over="ignore"):
        z = 2.0 * np.exp(0.5 * np.asarray(y, dtype=float))
    return (
        LOG2 + 0.5 * (a + b) * y + log_bessel_k(a - b, z)
        - special.gammaln(a) - special.gammaln(b)
    )


def _log_gamma_range(a: float) -> tuple[float, float]:
    lo = stats.gamma.ppf(TAIL_EPS, a)
    hi = stats.gamma.isf(TAIL_EPS, a)
    lo = math.log(lo) if lo > 0 else (math.log(TAIL_EPS) + special.gammaln(a + 1.0)) / a
    return lo, math.log(hi)


@dataclass(frozen=True)
class LogFactor:
    """``log X = offset + sign * sum_i log G_{a_i}`` with one or two shapes."""

    shapes: tuple
    offset: float
    sign: int = 1

    def logpdf(self, x):
        y = self.sign * (np.asarray(x, dtype=float) - self.offset)
        if len(self.shapes) == 1:
            return log_gamma_kernel(y, self.shapes[0])
        return log_gamma_product_kernel(y, *self.shapes)

    def support(self) -> tuple[float, float]:
        ranges = [_log_gamma_range(a) for a in self.shapes]
        lo = sum(r[0] for r in ranges)
        hi = sum(r[1] for r in ranges)
        if self.sign > 0:
            return self.offset + lo, self.offset + hi
        return self.offset - hi, self.offset - lo

    def width(self) -> float:
        return math.sqrt(sum(special.polygamma(1, a) for a in self.shapes))


@dataclass(frozen=True)
class BetaPrimeFactor:
    """``log X`` for ``X = scale * G_m / G_a`` (a scaled beta-prime variable)."""

    m: float
    a: float
    log_scale: float

    def logpdf(self, x):
        r = np.asarray(x, dtype=float) - self.log_scale
        return self.m * r - (self.m + self.a) * np.logaddexp(0.0, r) - special.betaln(self.m, self.a)

    def cdf(self, x):
        r = np.asarray(x, dtype=float) - self.log_scale
        return special.betainc(self.m, self.a, special.expit(r))

    def sf(self, x):
        r = np.asarray(x, dtype=float) - self.log_scale
        return special.betainc(self.a, self.m, special.expit(-r))

    def support(self) -> tuple[float, float]:
        lo_x, hi_x = _log_gamma_range(self.m)
        lo_g, hi_g = _log_gamma_range(self.a)
        return self.log_scale + lo_x - hi_g, self.log_scale + hi_x - lo_g

    def width(self) -> float:
        return math.sqrt(special.polygamma(1, self.m) + special.polygamma(1, self.a))


def fading_factor(p: ChannelParams) -> LogFactor:
    """``N = N1^2 N2^2``, the squared double-Nakagami product."""
    return LogFactor((p.m1, p.m2), 2.0 * math.log(p.omega) - math.log(p.m1 * p.m2), 1)


def shadow_factor(p: ChannelParams) -> LogFactor:
    """Inverse-gamma (SS) or double inverse-gamma (DS) shadowing."""
    return LogFactor(tuple(p.alphas), math.log(p.gamma_bar), -1)


def _cdf_factors(p: ChannelParams):
    """Split the SNR as ``A * B`` with ``A`` beta-prime (for its CDF) and ``B`` by density."""
    a = BetaPrimeFactor(p.m1, p.alphas[0], math.log(p.omega * p.gamma_bar / p.m1))
    if isinstance(p, DoubleShadowParams):
        b = BetaPrimeFactor(p.m2, p.alpha2, math.log(p.omega / p.m2))
    else:
        b = LogFactor((p.m2,), math.log(p.omega / p.m2), 1)
    return a, b


def log_snr_support(p: ChannelParams) -> tuple[float, float]:
    lo_n, hi_n = fading_factor(p).support()
    lo_i, hi_i = shadow_factor(p).support()
    return lo_n + lo_i, hi_n + hi_i


def _hull(x, inner, outer):
    """Integration range in ``t`` for ``int inner(x - t) outer(t) dt``."""
    a_lo, a_hi = inner.support()
    b_lo, b_hi = outer.support()
    return np.minimum(b_lo, x - a_hi), np.maximum(b_hi, x - a_lo)


def _step(*factors) -> float:
    return 0.25 * min(f.width() for f in factors)


# ---------------------------------------------------------------------------
# generic evaluators shared with the selection module
# ---------------------------------------------------------------------------


def mix_pdf(log_gamma, inner, outer_logpdf, outer_support, opts: EvalOptions, step: float):
    """``g * f(g)`` for ``g = inner * outer`` by integrating over ``t = log(outer)``.

    ``outer_logpdf`` is the log-density of ``log(outer)``.
    """
    x = np.asarray(log_gamma, dtype=float)
    a_lo, a_hi = inner.support()
    b_lo, b_hi = outer_support
    lo = np.minimum(b_lo, x - a_hi)
    hi = np.maximum(b_hi, x - a_lo)

    def integrand(t):
        with np.errstate(invalid="ignore"):
            v = np.exp(inner.logpdf(x[:, None] - t) + outer_logpdf(t))
        return np.nan_to_num(v, nan=0.0)

    return trapezoid(integrand, lo, hi, opts.rel_tol, opts.abs_tol, opts.max_quad_nodes, step)


def mix_cdf(log_gamma, inner_cdf, inner_support, outer_logpdf, outer_support, opts: EvalOptions,
            step: float):
    """``E[F_inner(g / outer)]`` by integrating over ``t = log(outer)``."""
    x = np.asarray(log_gamma, dtype=float)
    a_lo, a_hi = inner_support
    b_lo, b_hi = outer_support
    lo = np.minimum(b_lo, x - a_hi)
    hi = np.maximum(b_hi, x - a_lo)

    def integrand(t):
        return np.exp(outer_logpdf(t)) * inner_cdf(x[:, None] - t)

    return trapezoid(integrand, lo, hi, opts.rel_tol, opts.abs_tol, opts.max_quad_nodes, step)


def _split_positive(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(np.isnan(g)):
        raise DomainError("SNR argument is NaN")
    if np.any(g < 0):
        raise DomainError("SNR argument must be non-negative")
    flat = g.ravel()
    mask = (flat > 0) & np.isfinite(flat)
    return g, flat, mask


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def _pdf_quadrature(p: ChannelParams, g: np.ndarray, opts: EvalOptions) -> np.ndarray:
    if g.size == 0:
        return np.empty(0)
    fading = fading_factor(p)
    shadow = shadow_factor(p)
    x = np.log(g)
    val = mix_pdf(x, fading, shadow.logpdf, shadow.support(), opts, _step(fading, shadow))
    return val / g


def _pdf_ds_series(p: DoubleShadowParams, g: np.ndarray) -> np.ndarray:
    gt = model_constants(p).gamma_tilde
    m1, m2, a1, a2 = p.m1, p.m2, p.alpha1, p.alpha2
    c = a1 + a2 + m1 + m2
    log_pref = (
        special.gammaln(m1 + a2) + special.gammaln(m2 + a2) + special.gammaln(m1 + a1)
        + special.gammaln(m2 + a1) - special.gammaln(m1) - special.gammaln(m2)
        - special.gammaln(a1) - special.gammaln(a2) - special.gammaln(c)
    )
    z = 1.0 - 1.0 / (gt * g)
    hyp = special.hyp2f1(m1 + a2, m2 + a2, c, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.exp(log_pref - (a2 + 1.0) * np.log(g) - a2 * math.log(gt)) * hyp


def _pdf_ss_series(p: SingleShadowParams, g: np.ndarray) -> np.ndarray:
    gt = model_constants(p).gamma_tilde
    m1, m2, a = p.m1, p.m2, p.alpha
    log_pref = (
        special.gammaln(a + m1) + special.gammaln(a + m2)
        - special.gammaln(m1) - special.gammaln(m2) - special.gammaln(a)
        + m1 * math.log(gt)
    )
    u = special.hyperu(a + m1, _hyperu_b(p), gt * g)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.exp(log_pref + (m1 - 1.0) * np.log(g)) * u


def _hyperu_b(p: SingleShadowParams) -> float:
    b = 1.0 + p.m1 - p.m2
    return float(round(b)) if abs(b - round(b)) < HYPERU_SNAP else b


def _series_mask(p: ChannelParams, g: np.ndarray) -> np.ndarray:
    """Points where the hypergeometric route is accurate to well below rel_tol."""
    gt = model_constants(p).gamma_tilde
    if isinstance(p, DoubleShadowParams):
        return np.abs(1.0 - 1.0 / (gt * g)) <= HYP2F1_ARG_LIMIT
    b = _hyperu_b(p)
    if 0.0 < abs(b - round(b)) < HYPERU_NEAR_INTEGER:
        return np.zeros(g.shape, bool)
    lo, hi = HYPERU_WINDOW
    return (gt * g >= lo) & (gt * g <= hi)


def pdf_with_method(params: ChannelParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    """Density values plus a per-point route tag (``series``/``quadrature``)."""
    p = validate(params)
    g, flat, mask = _split_positive(gamma)
    out = np.zeros(flat.shape)
    tags = np.full(flat.shape, "boundary", dtype=object)
    pos = flat[mask]
    if opts.method == "quadrature":
        use_series = np.zeros(pos.shape, bool)
    elif opts.method == "series":
        use_series = _series_mask(p, pos)
        if not np.all(use_series):
            bad = pos[~use_series]
            raise EvalError(
                f"hypergeometric route is not accurate at gamma={bad[0]:.6g} "
                f"({bad.size} point(s)); use method='auto' or 'quadrature'"
            )
    else:
        use_series = _series_mask(p, pos)
    series_fn = _pdf_ds_series if isinstance(p, DoubleShadowParams) else _pdf_ss_series
    vals = np.empty(pos.shape)
    if np.any(use_series):
        vals[use_series] = series_fn(p, pos[use_series])
        if opts.method == "auto":
            broken = use_series & ~(np.isfinite(vals) & (vals > 0))
            use_series &= ~broken
    if np.any(~use_series):
        vals[~use_series] = _pdf_quadrature(p, pos[~use_series], opts)
    out[mask] = vals
    sub = tags[mask]
    sub[use_series] = "series"
    sub[~use_series] = "quadrature"
    tags[mask] = sub
    return out.reshape(g.shape), tags.reshape(g.shape)


def pdf(params: ChannelParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    values, _ = pdf_with_method(params, gamma, opts)
    return values if values.ndim else float(values)


def pdf_ds(params: DoubleShadowParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    if not isinstance(params, DoubleShadowParams):
        raise DomainError("pdf_ds needs DoubleShadowParams")
    return pdf(params, gamma, opts)


def pdf_ss(params: SingleShadowParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    if not isinstance(params, SingleShadowParams):
        raise DomainError("pdf_ss needs SingleShadowParams")
    return pdf(params, gamma, opts)


# ---------------------------------------------------------------------------
# distribution functions
# ---------------------------------------------------------------------------


def _cdf_or_sf(params: ChannelParams, gamma, opts: EvalOptions, upper: bool):
    p = validate(params)
    g, flat, mask = _split_positive(gamma)
    out = np.where(np.isinf(flat), 0.0 if upper else 1.0, 1.0 if upper else 0.0)
    pos = flat[mask]
    if pos.size:
        a, b = _cdf_factors(p)
        fn = a.sf if upper else a.cdf
        vals = mix_cdf(np.log(pos), fn, a.support(), b.logpdf, b.support(), opts, _step(a, b))
        out[mask] = np.clip(vals, 0.0, 1.0)
    out = out.reshape(g.shape)
    return out if out.ndim else float(out)


def cdf(params: ChannelParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    """``P(snr <= gamma)`` for either model."""
    return _cdf_or_sf(params, gamma, opts, upper=False)


def sf(params: ChannelParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    """``P(snr > gamma)``, evaluated directly rather than as ``1 - cdf``."""
    return _cdf_or_sf(params, gamma, opts, upper=True)


def cdf_ds(params: DoubleShadowParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    if not isinstance(params, DoubleShadowParams):
        raise DomainError("cdf_ds needs DoubleShadowParams")
    return cdf(params, gamma, opts)


def cdf_ss(params: SingleShadowParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    if not isinstance(params, SingleShadowParams):
        raise DomainError("cdf_ss needs SingleShadowParams")
    return cdf(params, gamma, opts)


def outage(params: ChannelParams, gamma_t, model: str | None = None,
           opts: EvalOptions = DEFAULT_OPTIONS):
    """Outage probability at threshold ``gamma_t`` (linear)."""
    p = validate(params)
    if model is not None and model.upper() != p.model:
        raise DomainError(f"model {model!r} does not match {p.model} parameters")
    return cdf(p, gamma_t, opts)


def cdf_table(params: ChannelParams, n_points: int = 4000, opts: EvalOptions = DEFAULT_OPTIONS):
    """Fast CDF interpolant on a log grid, for K-S statistics over large samples.

    Returns a callable ``F(g)``; interpolation is linear in ``log g`` on a grid
    fine enough that the error stays far below sampling noise.
    """
    p = validate(params)
    lo, hi = log_snr_support(p)
    grid = np.linspace(lo, hi, n_points)
    values = np.asarray(cdf(p, np.exp(grid), opts))
    values = np.maximum.accumulate(values)

    def F(g):
        g = np.asarray(g, dtype=float)
        with np.errstate(divide="ignore"):
            x = np.log(g)
        return np.interp(x, grid, values, left=0.0, right=1.0)

    return F


# ---------------------------------------------------------------------------
# link metrics
# ---------------------------------------------------------------------------


def bep_bpsk(params: ChannelParams, model: str | None = None, opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    """Average BPSK bit error probability, CDF-based.

    ``Pb = 1/(2 sqrt(pi)) int F(g) g^(-1/2) exp(-g) dg``; integrated over
    ``u = log g`` so the endpoint behaviour of ``F`` near zero is harmless.
    """
    p = validate(params)
    if model is not None and model.upper() != p.model:
        raise DomainError(f"model {model!r} does not match {p.model} parameters")
    lo, _ = log_snr_support(p)
    u_hi = math.log(60.0)
    u_lo = min(lo, u_hi - 4.0)
    norm = 1.0 / (2.0 * math.sqrt(math.pi))

    def integrand(t):
        w = np.exp(0.5 * t - np.exp(t)) * norm
        return np.asarray(cdf(p, np.exp(t), opts)) * w

    val = trapezoid(integrand, u_lo, u_hi, opts.rel_tol, opts.abs_tol, opts.max_quad_nodes, 0.25)
    return float(val[0])


def capacity(params: ChannelParams, model: str | None = None, bandwidth: float = 1.0,
             opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    """Ergodic capacity in bit/s (bit/s/Hz for ``bandwidth=1``)."""
    p = validate(params)
    if model is not None and model.upper() != p.model:
        raise DomainError(f"model {model!r} does not match {p.model} parameters")
    if not bandwidth > 0:
        raise DomainError("bandwidth must be positive")
    lo, hi = log_snr_support(p)
    quad = EvalOptions(opts.rel_tol, opts.abs_tol, opts.max_quad_nodes, "quadrature")
    fading = fading_factor(p)
    shadow = shadow_factor(p)
    step = _step(fading, shadow)

    def integrand(t):
        shape = t.shape
        flat = t.ravel()
        gf = mix_pdf(flat, fading, shadow.logpdf, shadow.support(), quad, step)
        return (np.logaddexp(0.0, flat) / LOG2 * gf).reshape(shape)

    val = trapezoid(integrand, lo, hi, opts.rel_tol, opts.abs_tol, opts.max_quad_nodes, step)
    return float(bandwidth * val[0])


def evaluate_metric(metric: str, params: ChannelParams, opts: EvalOptions = DEFAULT_OPTIONS,
                    threshold: float | None = None, bandwidth: float = 1.0) -> MetricReport:
    p = validate(params)
    if metric == "op":
        value = float(outage(p, threshold, opts=opts))
    elif metric == "bep":
        value = bep_bpsk(p, opts=opts)
    elif metric == "capacity":
        value = capacity(p, bandwidth=bandwidth, opts=opts)
    else:
        raise DomainError(f"unknown metric {metric!r}")
    return MetricReport(metric, value, "quadrature", p.to_dict())


def grid_rows(kind: str, params: ChannelParams, xs: Iterable[float],
              opts: EvalOptions = DEFAULT_OPTIONS) -> list[tuple[float, float, str]]:
    """``(x, value, method)`` rows of a PDF or CDF sweep."""
    xs = np.asarray(list(xs), dtype=float)
    if kind == "pdf":
        values, tags = pdf_with_method(params, xs, opts)
        return [(float(x), float(v), str(t)) for x, v, t in zip(xs, values, tags)]
    if kind == "cdf":
        values = np.atleast_1d(cdf(params, xs, opts))
        return [(float(x), float(v), "quadrature") for x, v in zip(xs, values)]
    raise DomainError(f"unknown sweep kind {kind!r}")
