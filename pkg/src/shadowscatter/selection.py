"""Shadowing-based UAV selection: the link with the largest shadowing variable
is chosen, and the output SNR is ``N * I_max`` with ``I_max = max_i I_i``.

Two evaluation routes exist for every statistic.

* ``quadrature`` -- order statistics, ``F_Imax = F_I**L``, with ``F_I`` computed
  by a 1-D integral (DS) or the regularised incomplete gamma (SS), and the
  fading product mixed in by one more log-domain integral.
* ``series`` -- the finite expansion of ``F_I**(L-1)``.  Each expansion term
  turns out to be a scaled copy of the single-link shadowing density with
  shifted shapes, so the series is a signed mixture of DIG (DS) or IG (SS)
  components and every output statistic is the same mixture of single-link
  statistics.

DS series: requires the incomplete-gamma finite series for ``F_I``, which holds
exactly when ``2*alpha1`` is an integer *and* ``alpha2 = alpha1 + 1/2``.  Then
``I1*I2`` has the law of ``4*gamma_bar / G_{2 alpha1}**2`` and

    F_I(y) = exp(-x) * sum_{k<2 alpha1} x**k / k!,   x = 2 sqrt(gamma_bar / y).

The binomial pair runs over ``0 <= i2 <= i1 <= L-1``, the multinomial vector
``n_0..n_{2 alpha1 - 1}`` sums to ``i2`` and is weighted by
``prod (2**j / j!)**n_j``; ``q = alpha1 + alpha2 + sum j*n_j``.  A term is the
DIG density with shapes ``((q - 1/2)/2, (q + 1/2)/2)`` and scale
``(i2 + 1)**2 * gamma_bar``.

SS series: requires integer ``alpha``.  The multinomial vector ``n_1..n_alpha``
sums to ``L-1``; ``p = alpha + sum (j-1) n_j``.  A term is the IG density with
shape ``p`` and scale ``L * gamma_bar``; all weights are positive.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from . import analytics
from .analytics import DEFAULT_OPTIONS, EvalOptions, LogFactor, fading_factor, shadow_factor
from .errors import ClosedFormPole, DomainError, SeriesInapplicable
from .model import (
    DEFAULT_SEED,
    ChannelParams,
    DoubleShadowParams,
    SampleBatch,
    SingleShadowParams,
    blocked_draws,
    draw_components,
    validate,
)
from .quadrature import trapezoid

# term-enumeration caps for the series route
MAX_SERIES_ORDER = 12
MAX_SERIES_L = 8
POLICIES = ("shadow_max", "snr_max", "random")


@dataclass(frozen=True)
class SelectionParams:
    base: ChannelParams
    L: int

    def __post_init__(self):
        object.__setattr__(self, "base", validate(self.base))
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"L must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))

    @property
    def model(self) -> str:
        return self.base.model

    def with_L(self, L: int) -> "SelectionParams":
        return SelectionParams(self.base, L)


@dataclass(frozen=True)
class ExpansionTerm:
    """One term of the series for ``f_Imax``.

    DS terms carry ``i1, i2, a_coef, q``; SS terms carry ``b_coef, p``.
    ``weight`` is the mixture weight of the component density ``component``.
    """

    n_vec: tuple
    weight: float
    component: ChannelParams
    i1: int | None = None
    i2: int | None = None
    a_coef: float = math.nan
    q: float = math.nan
    b_coef: float = math.nan
    p: float = math.nan


def _compositions(total: int, parts: int):
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def _is_integer(x: float, tol: float = 1e-12) -> bool:
    return abs(x - round(x)) <= tol


def series_applicable(sel: SelectionParams) -> str | None:
    """``None`` if the series route applies, else the reason it does not."""
    b = sel.base
    if sel.L > MAX_SERIES_L:
        return f"series route is capped at L <= {MAX_SERIES_L}"
    if isinstance(b, DoubleShadowParams):
        order = 2.0 * b.alpha1
        if not _is_integer(order):
            return f"2*alpha1 = {order:g} is not an integer"
        if round(order) > MAX_SERIES_ORDER:
            return f"series route is capped at 2*alpha1 <= {MAX_SERIES_ORDER}"
        if abs(b.alpha2 - b.alpha1 - 0.5) > 1e-12:
            return (
                "the incomplete-gamma series for F_I holds only for alpha2 = alpha1 + 1/2 "
                f"(got alpha1={b.alpha1:g}, alpha2={b.alpha2:g})"
            )
        return None
    if not _is_integer(b.alpha):
        return f"alpha = {b.alpha:g} is not an integer"
    if round(b.alpha) > MAX_SERIES_ORDER:
        return f"series route is capped at alpha <= {MAX_SERIES_ORDER}"
    return None


def _require_series(sel: SelectionParams) -> None:
    reason = series_applicable(sel)
    if reason is not None:
        raise SeriesInapplicable(reason + "; use method='quadrature'")


def _ds_terms(sel: SelectionParams, check: bool = True) -> list[ExpansionTerm]:
    if check:
        _require_series(sel)
    b = sel.base
    L = sel.L
    order = int(round(2.0 * b.alpha1))
    log_j = [j * math.log(2.0) - special.gammaln(j + 1) for j in range(order)]
    base_lg = special.gammaln(b.alpha1) + special.gammaln(b.alpha2)
    terms = []
    for i1 in range(L):
        for i2 in range(i1 + 1):
            outer = L * math.comb(L - 1, i1) * math.comb(i1, i2) * (-1) ** (i1 + i2)
            for n_vec in _compositions(i2, order):
                s = sum(j * n for j, n in enumerate(n_vec))
                log_a = special.gammaln(i2 + 1) + sum(
                    n * log_j[j] - special.gammaln(n + 1) for j, n in enumerate(n_vec)
                )
                a_coef = (-1) ** (i1 + i2) * math.exp(log_a)
                q = b.alpha1 + b.alpha2 + s
                a1n, a2n = 0.5 * (q - 0.5), 0.5 * (q + 0.5)
                log_w = (
                    log_a + (0.5 - q) * math.log(i2 + 1)
                    + special.gammaln(a1n) + special.gammaln(a2n) - base_lg
                )
                weight = outer * math.exp(log_w)
                comp = b.replace(alpha1=a1n, alpha2=a2n, gamma_bar=(i2 + 1) ** 2 * b.gamma_bar)
                terms.append(ExpansionTerm(n_vec, weight, comp, i1=i1, i2=i2, a_coef=a_coef, q=q))
    return terms


def _ss_terms(sel: SelectionParams) -> list[ExpansionTerm]:
    _require_series(sel)
    b = sel.base
    L = sel.L
    alpha = int(round(b.alpha))
    terms = []
    for n_vec in _compositions(L - 1, alpha):
        s = sum(j * n for j, n in enumerate(n_vec))  # n_vec[j] counts x**j / j!
        p = b.alpha + s
        log_b = (
            -p * math.log(L) + special.gammaln(L + 1)
            - sum(special.gammaln(n + 1) + n * special.gammaln(j + 1) for j, n in enumerate(n_vec))
        )
        b_coef = math.exp(log_b)
        weight = math.exp(log_b + special.gammaln(p) - special.gammaln(b.alpha))
        comp = b.replace(alpha=p, gamma_bar=L * b.gamma_bar)
        terms.append(ExpansionTerm(n_vec, weight, comp, b_coef=b_coef, p=p))
    return terms


def expansion_terms(sel: SelectionParams) -> list[ExpansionTerm]:
    """Enumerate the series terms (raises ``SeriesInapplicable`` outside its range)."""
    if isinstance(sel.base, DoubleShadowParams):
        return _ds_terms(sel)
    return _ss_terms(sel)


@lru_cache(maxsize=64)
def _components(sel: SelectionParams) -> tuple[tuple[float, ChannelParams], ...]:
    """Series terms merged by identical component parameters.

    For DS the signed binomial factors are first summed in exact integer
    arithmetic over ``i1``; summing the float weights instead leaves rounding
    residue on terms that cancel exactly, and that residue decays more slowly
    than ``f_Imax`` itself for small ``y``.
    """
    terms = expansion_terms(sel)
    if isinstance(sel.base, DoubleShadowParams):
        exact: dict = {}
        unit: dict = {}
        for t in terms:
            key = (t.i2, t.n_vec)
            coef = sel.L * math.comb(sel.L - 1, t.i1) * math.comb(t.i1, t.i2) * (-1) ** (t.i1 + t.i2)
            exact[key] = exact.get(key, 0) + coef
            unit[key] = (t.weight / coef, t.component)
        pairs = [(exact[k] * unit[k][0], unit[k][1]) for k in exact if exact[k] != 0]
    else:
        pairs = [(t.weight, t.component) for t in terms]
    merged: dict = {}
    for w, c in pairs:
        merged[c] = merged.get(c, 0.0) + w
    return tuple((w, c) for c, w in merged.items() if w != 0.0)


def _use_series(sel: SelectionParams, opts: EvalOptions) -> bool:
    if opts.method == "series":
        _require_series(sel)
        return True
    if opts.method == "quadrature":
        return False
    return series_applicable(sel) is None


# ---------------------------------------------------------------------------
# the shadowing variable of a single link
# ---------------------------------------------------------------------------


def _as_positive(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(np.isnan(y)) or np.any(y < 0):
        raise DomainError("argument must be non-negative")
    return y


def shadow_pdf(base: ChannelParams, y) -> np.ndarray:
    """Density of the single-link shadowing variable ``I`` (IG or product of two IGs)."""
    y = _as_positive(y)
    out = np.zeros(y.shape)
    pos = (y > 0) & np.isfinite(y)
    ly = np.log(y[pos])
    out[pos] = np.exp(shadow_factor(base).logpdf(ly) - ly)
    return out


def _shadow_cdf_sf(base: ChannelParams, y: np.ndarray, opts: EvalOptions) -> tuple[np.ndarray, np.ndarray]:
    """``(F_I(y), 1 - F_I(y))`` with both tails kept accurate."""
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    F = np.zeros(flat.shape)
    S = np.ones_like(F)
    inf = np.isinf(flat)
    F[inf], S[inf] = 1.0, 0.0
    pos = (flat > 0) & ~inf
    if np.any(pos):
        if isinstance(base, SingleShadowParams):
            z = base.gamma_bar / flat[pos]
            F[pos] = special.gammaincc(base.alpha, z)
            S[pos] = special.gammainc(base.alpha, z)
        else:
            F[pos], S[pos] = _ds_shadow_cdf_sf(base, np.log(flat[pos]), opts)
    return F.reshape(y.shape), S.reshape(y.shape)


def _ds_shadow_cdf_sf(b: DoubleShadowParams, log_y: np.ndarray, opts: EvalOptions):
    # F_I(y) = E[Q(alpha1, gamma_bar / (y G2))], integrated over t = log G2
    g2 = LogFactor((b.alpha2,), 0.0, 1)
    lo, hi = g2.support()
    step = 0.25 * min(g2.width(), math.sqrt(special.polygamma(1, b.alpha1)))
    c = math.log(b.gamma_bar) - log_y

    def integrand_f(t):
        return np.exp(g2.logpdf(t)) * special.gammaincc(b.alpha1, np.exp(c[:, None] - t))

    def integrand_s(t):
        return np.exp(g2.logpdf(t)) * special.gammainc(b.alpha1, np.exp(c[:, None] - t))

    lo_v = np.full(c.shape, lo)
    hi_v = np.full(c.shape, hi)
    args = (opts.rel_tol, opts.abs_tol * 1e-6, opts.max_quad_nodes, step)
    F = trapezoid(integrand_f, lo_v, hi_v, *args)
    S = trapezoid(integrand_s, lo_v, hi_v, *args)
    return np.clip(F, 0.0, 1.0), np.clip(S, 0.0, 1.0)


def shadow_cdf(base: ChannelParams, y, opts: EvalOptions = DEFAULT_OPTIONS, method: str = "auto"):
    """CDF of ``I``; ``method='series'`` uses the finite incomplete-gamma sum."""
    base = validate(base)
    y = _as_positive(y)
    if method == "series":
        return shadow_cdf_series(base, y)
    return _shadow_cdf_sf(base, y, opts)[0]


def shadow_cdf_series(base: ChannelParams, y) -> np.ndarray:
    """Finite-sum CDF of ``I``.

    SS: ``exp(-z) sum_{k<alpha} z**k/k!`` with ``z = gamma_bar/y``, integer alpha.
    DS: ``exp(-x) sum_{k<2 alpha1} x**k/k!`` with ``x = 2 sqrt(gamma_bar/y)``,
    valid only for ``alpha2 = alpha1 + 1/2``.
    """
    y = _as_positive(y)
    if isinstance(base, DoubleShadowParams):
        _require_series(SelectionParams(base, 1))
        order = int(round(2 * base.alpha1))
        with np.errstate(divide="ignore"):
            x = 2.0 * np.sqrt(base.gamma_bar / y)
    else:
        _require_series(SelectionParams(base, 1))
        order = int(round(base.alpha))
        with np.errstate(divide="ignore"):
            x = base.gamma_bar / y
    k = np.arange(order)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = k * np.log(x[..., None]) - special.gammaln(k + 1) - x[..., None]
    out = np.exp(logs).sum(axis=-1)
    return np.where(y > 0, out, 0.0)


# ---------------------------------------------------------------------------
# I_max
# ---------------------------------------------------------------------------


def _imax_logpdf_quadrature(sel: SelectionParams, log_y: np.ndarray, opts: EvalOptions) -> np.ndarray:
    """Log-density of ``log I_max`` at ``log_y`` (order-statistics route)."""
    b = sel.base
    lf = shadow_factor(b).logpdf(log_y)
    if sel.L == 1:
        return lf
    F, _ = _shadow_cdf_sf(b, np.exp(log_y), opts)
    with np.errstate(divide="ignore"):
        return math.log(sel.L) + lf + (sel.L - 1) * np.log(F)


def pdf_imax(sel: SelectionParams, y, opts: EvalOptions = DEFAULT_OPTIONS) -> np.ndarray:
    y = _as_positive(y)
    flat = y.ravel()
    out = np.zeros(flat.shape)
    pos = (flat > 0) & np.isfinite(flat)
    if np.any(pos):
        if _use_series(sel, opts):
            out[pos] = sum(w * shadow_pdf(c, flat[pos]) for w, c in _components(sel))
        else:
            ly = np.log(flat[pos])
            out[pos] = np.exp(_imax_logpdf_quadrature(sel, ly, opts) - ly)
    return out.reshape(y.shape)


def pdf_imax_ds(sel: SelectionParams, y, opts: EvalOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Density of ``I_max`` for DS shadowing.

    ``opts.method='series'`` sums the expansion terms and raises
    ``SeriesInapplicable`` when that expansion does not hold;
    ``'quadrature'`` evaluates ``L f_I F_I**(L-1)``.
    """
    if not isinstance(sel.base, DoubleShadowParams):
        raise DomainError("pdf_imax_ds needs a DS base")
    return pdf_imax(sel, y, opts)


def cdf_imax(sel: SelectionParams, y, opts: EvalOptions = DEFAULT_OPTIONS) -> np.ndarray:
    y = _as_positive(y)
    return _shadow_cdf_sf(sel.base, y, opts)[0] ** sel.L


# ---------------------------------------------------------------------------
# output SNR
# ---------------------------------------------------------------------------


class _ImaxFactor:
    """``log I_max`` as an inner factor for the generic mixing integrals."""

    def __init__(self, sel: SelectionParams, opts: EvalOptions):
        self.sel = sel
        self.opts = opts
        self.shadow = shadow_factor(sel.base)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = _imax_logpdf_quadrature(self.sel, x.ravel(), self.opts)
        return out.reshape(x.shape)

    def support(self):
        lo, hi = self.shadow.support()
        # the upper tail of a max of L heavy-tailed terms is about L times heavier
        return lo, hi + math.log(self.sel.L) / min(self.sel.base.alphas)

    def width(self):
        return self.shadow.width()


def _out_pdf_quadrature(sel: SelectionParams, g: np.ndarray, opts: EvalOptions) -> np.ndarray:
    fading = fading_factor(sel.base)
    inner = _ImaxFactor(sel, opts)
    step = 0.25 * min(fading.width(), inner.width())
    return analytics.mix_pdf(np.log(g), inner, fading.logpdf, fading.support(), opts, step) / g


def _out_cdf_quadrature(sel: SelectionParams, g: np.ndarray, opts: EvalOptions, upper: bool) -> np.ndarray:
    # F_out(g) = E_N[F_I(g / N)**L], integrated over s = log N
    fading = fading_factor(sel.base)
    inner = _ImaxFactor(sel, opts)
    lo_i, hi_i = inner.support()
    step = 0.25 * min(fading.width(), inner.width())
    L = sel.L

    def inner_cdf(u):
        F, S = _shadow_cdf_sf(sel.base, np.exp(u), opts)
        if upper:
            with np.errstate(divide="ignore"):
                return -np.expm1(L * np.log1p(-S)) if L > 1 else S
        return F**L

    return analytics.mix_cdf(np.log(g), inner_cdf, (lo_i, hi_i), fading.logpdf, fading.support(), opts, step)


def _out_dist(sel: SelectionParams, gamma, opts: EvalOptions, kind: str) -> tuple[np.ndarray, str]:
    g = _as_positive(gamma)
    flat = g.ravel()
    if kind == "pdf":
        out = np.zeros(flat.shape)
    else:
        out = np.where(np.isinf(flat), 1.0, 0.0) if kind == "cdf" else np.where(flat == 0, 1.0, 0.0)
    pos = (flat > 0) & np.isfinite(flat)
    series = _use_series(sel, opts)
    if np.any(pos):
        x = flat[pos]
        if series:
            inner_opts = EvalOptions(opts.rel_tol, opts.abs_tol, opts.max_quad_nodes, "auto")
            fn = {"pdf": analytics.pdf, "cdf": analytics.cdf, "sf": analytics.sf}[kind]
            val = sum(w * fn(c, x, inner_opts) for w, c in _components(sel))
        elif kind == "pdf":
            val = _out_pdf_quadrature(sel, x, opts)
        else:
            val = _out_cdf_quadrature(sel, x, opts, upper=(kind == "sf"))
        if kind != "pdf":
            val = np.clip(val, 0.0, 1.0)
        out[pos] = val
    return out.reshape(g.shape), ("series" if series else "quadrature")


def pdf_out(sel: SelectionParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS) -> np.ndarray:
    return _out_dist(sel, gamma, opts, "pdf")[0]


def cdf_out(sel: SelectionParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS) -> np.ndarray:
    return _out_dist(sel, gamma, opts, "cdf")[0]


def sf_out(sel: SelectionParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS) -> np.ndarray:
    return _out_dist(sel, gamma, opts, "sf")[0]


def _check_base(sel: SelectionParams, cls, name: str) -> None:
    if not isinstance(sel.base, cls):
        raise DomainError(f"{name} needs a {cls.model} base")


def pdf_out_ds(sel: SelectionParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    _check_base(sel, DoubleShadowParams, "pdf_out_ds")
    return pdf_out(sel, gamma, opts)


def cdf_out_ds(sel: SelectionParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    _check_base(sel, DoubleShadowParams, "cdf_out_ds")
    return cdf_out(sel, gamma, opts)


def pdf_out_ss(sel: SelectionParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    _check_base(sel, SingleShadowParams, "pdf_out_ss")
    return pdf_out(sel, gamma, opts)


def cdf_out_ss(sel: SelectionParams, gamma, opts: EvalOptions = DEFAULT_OPTIONS):
    _check_base(sel, SingleShadowParams, "cdf_out_ss")
    return cdf_out(sel, gamma, opts)


# ---------------------------------------------------------------------------
# average output SNR
# ---------------------------------------------------------------------------


def asnr_ds_closed(sel: SelectionParams) -> float:
    """Closed-form ASNR of DS selection; raises ``ClosedFormPole`` if any ``q <= 5/2``.

    Each term contributes ``C(L-1,i1) C(i1,i2) A 2**(7/2-q) Gamma(q-5/2) / (i2+1)**(q-5/2)``.
    """
    _check_base(sel, DoubleShadowParams, "asnr_ds")
    b = sel.base
    terms = _ds_terms(sel)
    total = 0.0
    for t in terms:
        if t.q - 2.5 <= 0:
            raise ClosedFormPole(f"term with q={t.q:g} hits the Gamma(q - 5/2) pole")
        binom = math.comb(sel.L - 1, t.i1) * math.comb(t.i1, t.i2)
        total += binom * t.a_coef * math.exp(
            (3.5 - t.q) * math.log(2.0) + special.gammaln(t.q - 2.5) - (t.q - 2.5) * math.log(t.i2 + 1)
        )
    scale = sel.L * b.gamma_bar * math.sqrt(math.pi) / math.exp(
        special.gammaln(b.alpha1) + special.gammaln(b.alpha2)
    )
    return b.omega**2 * scale * total


def asnr_ss_closed(sel: SelectionParams) -> float:
    """Closed-form ASNR of SS selection: ``Omega**2 L gamma_bar / Gamma(alpha) sum B Gamma(p-1)``."""
    _check_base(sel, SingleShadowParams, "asnr_ss")
    b = sel.base
    total = 0.0
    for t in _ss_terms(sel):
        if t.p - 1.0 <= 0:
            raise ClosedFormPole(f"term with p={t.p:g} hits the Gamma(p - 1) pole")
        total += t.b_coef * math.exp(special.gammaln(t.p - 1.0))
    return b.omega**2 * sel.L * b.gamma_bar * total / math.exp(special.gammaln(b.alpha))


def asnr_quadrature(sel: SelectionParams, opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    """``Omega**2 * E[I_max]``, integrating ``y f_Imax(y)`` over ``t = log y``.

    The integrand vanishes at both ends (super-exponentially below, like
    ``y**(1 - alpha1)`` above), which keeps the trapezoid rule geometric.
    """
    b = sel.base
    lo, hi = _ImaxFactor(sel, opts).support()
    hi = hi + 40.0 / (min(b.alphas) - 1.0)

    def integrand(t):
        flat = t.ravel()
        with np.errstate(over="ignore"):
            v = np.exp(flat + _imax_logpdf_quadrature(sel, flat, opts))
        return np.nan_to_num(v, nan=0.0).reshape(t.shape)

    step = 0.25 * shadow_factor(b).width()
    val = trapezoid(integrand, lo, hi, opts.rel_tol, opts.abs_tol, opts.max_quad_nodes, step)
    return float(b.omega**2 * val[0])


def asnr(sel: SelectionParams, opts: EvalOptions = DEFAULT_OPTIONS) -> tuple[float, str]:
    """ASNR and the route used; the closed form falls back to quadrature."""
    if opts.method != "quadrature":
        try:
            if isinstance(sel.base, DoubleShadowParams):
                return asnr_ds_closed(sel), "closed-form"
            return asnr_ss_closed(sel), "closed-form"
        except (SeriesInapplicable, ClosedFormPole):
            if opts.method == "series":
                raise
    return asnr_quadrature(sel, opts), "quadrature"


def asnr_ds(sel: SelectionParams, opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    _check_base(sel, DoubleShadowParams, "asnr_ds")
    return asnr(sel, opts)[0]


def asnr_ss(sel: SelectionParams, opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    _check_base(sel, SingleShadowParams, "asnr_ss")
    return asnr(sel, opts)[0]


# ---------------------------------------------------------------------------
# Monte Carlo selection
# ---------------------------------------------------------------------------


def select_links(fading: np.ndarray, shadow: np.ndarray, policy: str, rng: np.random.Generator) -> np.ndarray:
    """Output SNR per row of ``(trials, L)`` link draws under ``policy``."""
    snr = fading * shadow
    rows = np.arange(snr.shape[0])
    if policy == "shadow_max":
        return snr[rows, np.argmax(shadow, axis=1)]
    if policy == "snr_max":
        return snr.max(axis=1)
    if policy == "random":
        return snr[rows, rng.integers(0, snr.shape[1], snr.shape[0])]
    raise DomainError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def simulate_selection(sel: SelectionParams, n_trials: int, seed: int = DEFAULT_SEED,
                       policy: str = "shadow_max", stream: int = 0, threads: int = 1) -> SampleBatch:
    """Draw ``L`` independent links per trial and apply ``policy``."""
    if policy not in POLICIES:
        raise DomainError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    if int(n_trials) < 1:
        raise DomainError("n_trials must be at least 1")

    def draw(rng, k):
        fading, shadow = draw_components(sel.base, rng, (k, sel.L))
        return select_links(fading, shadow, policy, rng)

    values = blocked_draws(n_trials, seed, stream, draw, threads)
    meta = {**sel.base.to_dict(), "L": sel.L, "policy": policy}
    return SampleBatch(values, seed, stream, meta)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def op_table(base: ChannelParams, Ls, threshold_db, opts: EvalOptions = DEFAULT_OPTIONS):
    """Outage vs threshold for several ``L``: header and rows ``threshold_db, op_L1, ...``."""
    base = validate(base)
    thr = 10.0 ** (np.asarray(threshold_db, dtype=float) / 10.0)
    cols = [cdf_out(SelectionParams(base, L), thr, opts) for L in Ls]
    header = ["threshold_db"] + [f"op_L{L}" for L in Ls]
    rows = [[float(t)] + [float(c[i]) for c in cols] for i, t in enumerate(np.asarray(threshold_db, float))]
    return header, rows


def asnr_table(base: ChannelParams, Ls, gamma_bar_db, opts: EvalOptions = DEFAULT_OPTIONS):
    """ASNR in dB vs average SNR in dB for several ``L``.

    The ASNR is linear in ``gamma_bar``, so it is evaluated once per ``L``.
    """
    base = validate(base)
    unit = [asnr(SelectionParams(base.replace(gamma_bar=1.0), L), opts)[0] for L in Ls]
    header = ["gamma_bar_db"] + [f"asnr_db_L{L}" for L in Ls]
    rows = []
    for gdb in np.asarray(gamma_bar_db, dtype=float):
        rows.append([float(gdb)] + [float(gdb + 10.0 * math.log10(u)) for u in unit])
    return header, rows
