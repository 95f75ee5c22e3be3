"""Method-of-moments fitting and goodness-of-fit scoring.

Fitting matches fractional moments ``E[x**k]``.  Integer moments are avoided
because under inverse-gamma shadowing the k-th moment exists only for
``k < alpha``, and the sample moment has finite variance only for
``k < alpha/2``.  The default estimator is two-step GMM:

1. a fixed grid of small orders, relative-residual least squares;
2. orders spread over ``(-0.4 m1, 0.4 min(alpha))`` from the stage-1 fit,
   weighted by the inverse sample covariance of the moment functions.

Passing explicit ``orders`` instead fits log-moments at exactly those orders.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, stats

from . import analytics
from .analytics import DEFAULT_OPTIONS, EvalOptions
from .errors import BinningError, DomainError, FitDiverged, MomentOutOfRange
from .model import ChannelParams, DoubleShadowParams, SingleShadowParams, log_moment, validate

MODEL_TAGS = ("DIG", "SIG")
KS_C95 = 1.358
KL_EPS = 1e-12
STAGE1_ORDERS = np.linspace(-0.25, 0.45, 8)
STAGE2_COUNT = 10
STAGE2_FRACTION = 0.4
# fits whose alpha lands this close to 1 are read as tails too heavy for the model
ALPHA_FLOOR_MARGIN = 1e-3


@dataclass
class EmpiricalSample:
    values: np.ndarray
    weight: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise DomainError("sample is empty")
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise DomainError("sample values must be finite and positive")
        if self.weight is not None:
            self.weight = np.asarray(self.weight, dtype=float).ravel()
            if self.weight.shape != self.values.shape or np.any(self.weight < 0) or self.weight.sum() <= 0:
                raise DomainError("weights must be non-negative, same length as values, not all zero")

    def __len__(self) -> int:
        return int(self.values.size)

    def digest(self) -> str:
        h = hashlib.sha256(self.values.tobytes())
        if self.weight is not None:
            h.update(self.weight.tobytes())
        return h.hexdigest()


def _as_sample(sample) -> EmpiricalSample:
    return sample if isinstance(sample, EmpiricalSample) else EmpiricalSample(np.asarray(sample))


def _tag_of(params: ChannelParams) -> str:
    return "DIG" if isinstance(params, DoubleShadowParams) else "SIG"


@dataclass
class FitResult:
    params: ChannelParams
    model_tag: str
    converged: bool
    residuals: np.ndarray
    orders: np.ndarray
    iterations: int
    objective: float
    sample_hash: str = ""
    method: str = "gmm"

    def to_dict(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "params": self.params.to_dict(),
            "converged": self.converged,
            "residuals": [float(r) for r in self.residuals],
            "orders": [float(k) for k in self.orders],
            "iterations": int(self.iterations),
            "objective": float(self.objective),
            "sample_hash": self.sample_hash,
            "method": self.method,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# parameter packing: unconstrained vector <-> canonically ordered params
# ---------------------------------------------------------------------------


def _unpack(p: np.ndarray, tag: str) -> ChannelParams:
    m1 = math.exp(p[0])
    m2 = m1 + math.exp(p[1])
    if tag == "DIG":
        a1 = 1.0 + math.exp(p[2])
        a2 = a1 + math.exp(p[3])
        return DoubleShadowParams(m1, m2, a1, a2, math.exp(p[4]))
    return SingleShadowParams(m1, m2, 1.0 + math.exp(p[2]), math.exp(p[3]))


def _starts(tag: str) -> list[np.ndarray]:
    if tag == "DIG":
        return [np.zeros(5), np.array([-0.5, 0.5, -0.5, 0.5, 0.0]), np.array([0.5, 0.5, 0.5, 0.5, 1.0])]
    return [np.zeros(4), np.array([-0.5, 0.5, -0.5, 0.0]), np.array([0.5, 0.5, 0.5, 1.0])]


def _safe_params(p: np.ndarray, tag: str) -> ChannelParams | None:
    try:
        with np.errstate(over="raise"):
            return _unpack(p, tag)
    except (OverflowError, FloatingPointError, DomainError):
        return None


class _MomentProblem:
    """Fractional moments of ``x / e^c`` (``c`` = median of ``log x``) for a set of orders.

    Parameters inside the problem carry ``gamma_bar`` relative to ``e^c``, so
    the solver sees the same problem for ``x`` and ``a * x``.
    """

    def __init__(self, log_x: np.ndarray, weight: np.ndarray | None, orders: np.ndarray):
        self.c = float(np.median(log_x))
        self.y = log_x - self.c
        self.w = weight
        self.orders = np.asarray(orders, dtype=float)
        with np.errstate(over="raise"):
            try:
                self.h = np.exp(np.outer(self.orders, self.y))
            except FloatingPointError:
                raise MomentOutOfRange("sample moments overflow; the data range is too wide") from None
        self.emp = np.average(self.h, axis=1, weights=self.w)

    def model(self, params: ChannelParams) -> np.ndarray:
        return np.exp(log_moment(params, self.orders))

    def absolute(self, params: ChannelParams) -> ChannelParams:
        return params.replace(gamma_bar=params.gamma_bar * math.exp(self.c))

    def feasible(self, params: ChannelParams) -> bool:
        return min(params.alphas) > self.orders.max() and params.m1 > -self.orders.min()

    def covariance(self) -> np.ndarray:
        return np.atleast_2d(np.cov(self.h, aweights=self.w))


def _solve(problem: _MomentProblem, tag: str, weight_matrix: np.ndarray, starts: list[np.ndarray]):
    n_res = weight_matrix.shape[0]

    def residual(p):
        params = _safe_params(p, tag)
        if params is None or not problem.feasible(params):
            return np.full(n_res, 1e3)
        r = weight_matrix @ (problem.model(params) - problem.emp)
        return r if np.all(np.isfinite(r)) else np.full(n_res, 1e3)

    best = None
    for p0 in starts:
        res = optimize.least_squares(residual, p0, method="trf", xtol=1e-12, ftol=1e-12, gtol=1e-12)
        if best is None or res.cost < best.cost:
            best = res
    return best


def _whitening(cov: np.ndarray, n: float) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    keep = w > 1e-10 * w.max()
    return (V[:, keep] / np.sqrt(w[keep])).T * math.sqrt(n)


def fit_moments(sample, model_tag: str = "DIG", orders=None) -> FitResult:
    """Fit DIG (5 parameters) or SIG (4 parameters) to a positive sample."""
    s = _as_sample(sample)
    tag = str(model_tag).upper()
    if tag not in MODEL_TAGS:
        raise DomainError(f"model_tag must be one of {MODEL_TAGS}, got {model_tag!r}")
    n_params = 5 if tag == "DIG" else 4
    log_x = np.log(s.values)
    n_eff = float(len(s)) if s.weight is None else float(s.weight.sum() ** 2 / np.sum(s.weight**2))
    if orders is not None:
        return _fit_fixed_orders(s, tag, np.asarray(orders, dtype=float), n_params)
    if len(s) < 2 * n_params:
        raise DomainError(f"need at least {2 * n_params} values to fit {tag}")

    stage1 = _MomentProblem(log_x, s.weight, STAGE1_ORDERS)
    w1 = np.diag(1.0 / stage1.emp)
    r1 = _solve(stage1, tag, w1, _starts(tag))
    p1 = _safe_params(r1.x, tag)
    if p1 is None or not np.isfinite(r1.cost):
        raise FitDiverged("stage-1 moment fit did not produce finite parameters")

    hi = STAGE2_FRACTION * min(p1.alphas)
    lo = -STAGE2_FRACTION * p1.m1
    stage2 = _MomentProblem(log_x, s.weight, np.linspace(lo, hi, STAGE2_COUNT))
    w2 = _whitening(stage2.covariance(), n_eff)
    r2 = _solve(stage2, tag, w2, [r1.x] + _starts(tag))
    params = _safe_params(r2.x, tag)
    if params is None or not np.isfinite(r2.cost):
        raise FitDiverged("stage-2 moment fit did not produce finite parameters")
    if min(params.alphas) - 1.0 < ALPHA_FLOOR_MARGIN:
        raise MomentOutOfRange(
            f"fitted alpha {min(params.alphas):.6g} sits on the alpha > 1 boundary; "
            "the sample tail is too heavy for a finite-mean model"
        )
    residuals = stage2.model(params) / stage2.emp - 1.0
    converged = bool(r2.status > 0)
    return FitResult(stage2.absolute(params), tag, converged, residuals, stage2.orders, int(r1.nfev + r2.nfev),
                     float(2.0 * r2.cost), s.digest(), "gmm")


def _fit_fixed_orders(s: EmpiricalSample, tag: str, orders: np.ndarray, n_params: int) -> FitResult:
    if orders.size < n_params:
        raise DomainError(f"{tag} needs at least {n_params} moment orders, got {orders.size}")
    problem = _MomentProblem(np.log(s.values), s.weight, orders)
    log_emp = np.log(problem.emp)

    def residual(p):
        params = _safe_params(p, tag)
        if params is None or not problem.feasible(params):
            return np.full(orders.size, 1e3)
        return log_moment(params, orders) - log_emp

    best = None
    for p0 in _starts(tag):
        p0 = p0.copy()
        # start with alpha above the largest order so every moment exists
        p0[2] = max(p0[2], math.log(max(orders.max(), 0.0) + 0.5))
        res = optimize.least_squares(residual, p0, method="trf", xtol=1e-12, ftol=1e-12, gtol=1e-12)
        if best is None or res.cost < best.cost:
            best = res
    params = _safe_params(best.x, tag)
    if params is None or not problem.feasible(params):
        raise FitDiverged("log-moment fit left the region where all requested moments exist")
    r = residual(best.x)
    return FitResult(problem.absolute(params), tag, bool(best.status > 0), r, orders, int(best.nfev),
                     float(np.sum(r**2)), s.digest(), "log-moments")


# ---------------------------------------------------------------------------
# goodness of fit
# ---------------------------------------------------------------------------


CdfLike = Callable[[np.ndarray], np.ndarray]


def _model_cdf(params, opts: EvalOptions = DEFAULT_OPTIONS, fast: bool = True) -> CdfLike:
    if callable(params) and not isinstance(params, (DoubleShadowParams, SingleShadowParams)):
        return params
    p = validate(params)
    if fast:
        return analytics.cdf_table(p, opts=opts)
    return lambda x: analytics.cdf(p, x, opts)


def equal_probability_edges(values: np.ndarray, bins: int) -> np.ndarray:
    """Quantile bin edges with open outer bins (``0`` and ``inf``)."""
    if bins < 1:
        raise BinningError("need at least one bin")
    inner = np.quantile(values, np.arange(1, bins) / bins)
    edges = np.concatenate([[0.0], inner, [np.inf]])
    edges = np.unique(edges)
    if edges.size < 2:
        raise BinningError("sample has no spread to bin")
    return edges


def binned_kl(p: np.ndarray, q: np.ndarray, eps: float = KL_EPS) -> float:
    """Symmetrised K-L: ``(sum p log(p/q) + sum q log(q/p)) / 2`` with a probability floor."""
    p = np.maximum(np.asarray(p, dtype=float), eps)
    q = np.maximum(np.asarray(q, dtype=float), eps)
    if p.shape != q.shape or p.size == 0:
        raise BinningError("binned vectors must be nonempty and the same length")
    return float(0.5 * np.sum((p - q) * np.log(p / q)))


def kl_divergence(sample, params, model_tag: str | None = None, bins: int | np.ndarray = 100,
                  eps: float = KL_EPS, opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    """Symmetrised K-L between the binned sample and the model's bin probabilities.

    ``bins`` is a count (equal-probability bins from sample quantiles) or an
    explicit edge array.  ``params`` may also be a CDF callable.
    """
    s = _as_sample(sample)
    _check_tag(params, model_tag)
    if np.ndim(bins) == 0:
        edges = equal_probability_edges(s.values, int(bins))
    else:
        edges = np.asarray(bins, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise BinningError("bin edges must be strictly increasing")
    counts, _ = np.histogram(s.values, bins=edges, weights=s.weight)
    total = counts.sum()
    if total <= 0:
        raise BinningError("no sample values fall inside the bins")
    p_emp = counts / total
    F = _model_cdf(params, opts, fast=False)
    finite = np.isfinite(edges) & (edges > 0)
    cdf_edges = np.where(edges <= 0, 0.0, 1.0)
    if np.any(finite):
        cdf_edges[finite] = F(edges[finite])
    q_mod = np.diff(cdf_edges)
    if q_mod.sum() <= 0:
        raise BinningError("model assigns no probability to the binned range")
    q_mod = q_mod / q_mod.sum()
    # p holds model bin masses and q empirical ones; the form is symmetric
    return binned_kl(q_mod, p_emp, eps)


def _check_tag(params, model_tag):
    if model_tag is None or callable(params) and not isinstance(params, (DoubleShadowParams, SingleShadowParams)):
        return
    tag = str(model_tag).upper()
    if tag not in MODEL_TAGS:
        raise DomainError(f"model_tag must be one of {MODEL_TAGS}")
    if _tag_of(validate(params)) != tag:
        raise DomainError(f"params do not match model tag {tag}")


def ks_statistic(values: np.ndarray, cdf_values_sorted: np.ndarray, cdf_left_sorted: np.ndarray | None = None) -> float:
    """``sup |F_e - F_t|`` given theoretical CDF values at the sorted sample.

    ``cdf_left_sorted`` holds the left limits ``F_t(x-)``; it only matters when
    ``F_t`` has jumps and defaults to ``cdf_values_sorted``.
    """
    n = cdf_values_sorted.size
    i = np.arange(1, n + 1)
    left = cdf_values_sorted if cdf_left_sorted is None else cdf_left_sorted
    return float(max(np.max(i / n - cdf_values_sorted), np.max(left - (i - 1) / n), 0.0))


def ks_critical(n: int, confidence: float = 0.95) -> float:
    """Asymptotic critical value ``c/sqrt(n)``; ``c = 1.358`` at 95%."""
    if not 0.0 < confidence < 1.0:
        raise DomainError("confidence must lie in (0, 1)")
    c = KS_C95 if abs(confidence - 0.95) < 1e-12 else float(stats.kstwobign.isf(1.0 - confidence))
    return c / math.sqrt(n)


@dataclass
class GofReport:
    label: str
    kl: float
    ks: float
    ks_pass: bool
    bins: dict = field(default_factory=dict)
    ks_pass_rate: float | None = None
    n: int = 0

    def to_dict(self) -> dict:
        d = {
            "model": self.label,
            "kl": self.kl,
            "kl_percent": 100.0 * self.kl,
            "ks": self.ks,
            "ks_pass": self.ks_pass,
            "n": self.n,
            "bins": self.bins,
        }
        if self.ks_pass_rate is not None:
            d["ks_pass_percent"] = 100.0 * self.ks_pass_rate
        return d


def ks_test(sample, params, model_tag: str | None = None, confidence: float = 0.95,
            fast: bool = True, opts: EvalOptions = DEFAULT_OPTIONS) -> GofReport:
    """K-S distance at the sample points and a pass flag at ``confidence``.

    ``fast`` evaluates the model CDF through a dense log-grid interpolant.
    With fitted parameters the naive critical value is optimistic (the test is
    no longer distribution free); it is reported as is.
    """
    s = _as_sample(sample)
    if len(s) < 30:
        raise DomainError("K-S test needs at least 30 values")
    _check_tag(params, model_tag)
    x = np.sort(s.values)
    F = np.clip(_model_cdf(params, opts, fast)(x), 0.0, 1.0)
    d = ks_statistic(x, F)
    crit = ks_critical(len(s), confidence)
    label = model_tag or (_tag_of(params) if not callable(params) else "custom")
    return GofReport(str(label), math.nan, d, bool(d < crit), {}, None, len(s))


def ks_pass_rate(sample, params, segments: int, confidence: float = 0.95,
                 opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    """Fraction of contiguous equal segments of the sample that pass the K-S test."""
    s = _as_sample(sample)
    if segments < 1 or len(s) // segments < 30:
        raise DomainError("each segment needs at least 30 values")
    F = _model_cdf(params, opts, fast=True)
    size = len(s) // segments
    passes = 0
    for i in range(segments):
        x = np.sort(s.values[i * size:(i + 1) * size])
        d = ks_statistic(x, np.clip(F(x), 0.0, 1.0))
        passes += d < ks_critical(size, confidence)
    return passes / segments


def gof_table(sample, candidates: list, bins: int = 100, segments: int = 1,
              confidence: float = 0.95, opts: EvalOptions = DEFAULT_OPTIONS) -> list[GofReport]:
    """Score candidates and sort by K-L ascending.

    Each candidate is a ``FitResult``, a ``(label, FitResult)`` pair, a
    ``(label, params)`` pair or a ``(label, cdf_callable)`` pair.
    """
    if not candidates:
        raise DomainError("gof_table needs at least one candidate")
    s = _as_sample(sample)
    reports = []
    for cand in candidates:
        if isinstance(cand, FitResult):
            label, model = cand.model_tag, cand.params
        else:
            label, model = cand
            if isinstance(model, FitResult):
                model = model.params
        kl = kl_divergence(s, model, None, bins, opts=opts)
        ks = ks_test(s, model, None, confidence, opts=opts)
        rate = ks_pass_rate(s, model, segments, confidence, opts) if segments > 1 else float(ks.ks_pass)
        reports.append(GofReport(str(label), kl, ks.ks, ks.ks_pass, {"count": bins, "scheme": "equal-probability"},
                                 rate, len(s)))
    reports.sort(key=lambda r: r.kl)
    return reports


def gof_table_csv(reports: list[GofReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "kl_percent", "ks_pass_percent", "ks"])
    for r in reports:
        rate = r.ks_pass_rate if r.ks_pass_rate is not None else float(r.ks_pass)
        w.writerow([r.label, f"{100.0 * r.kl:.6g}", f"{100.0 * rate:.6g}", f"{r.ks:.6g}"])
    return buf.getvalue()


def gof_table_json(reports: list[GofReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)
