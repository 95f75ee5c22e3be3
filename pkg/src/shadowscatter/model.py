"""Parameter types, exact samplers and analytic moments of the shadowed
double-scattering channel.

The instantaneous SNR of one link is

    DS:  gamma = N1^2 * I1 * N2^2 * I2
    SS:  gamma = N1^2 * N2^2 * I

with ``N_j^2 ~ Gamma(m_j, Omega/m_j)`` (squared Nakagami-m envelopes) and
``I`` inverse-gamma shadowing.  For the DS model only the product of the two
inverse-gamma scales is identifiable, so the whole scale ``gamma_bar`` is put
on the first factor and the second factor has unit scale.

Random numbers come from numpy's PCG64 seeded through ``SeedSequence(seed,
spawn_key=(stream, block))``.  Draws are produced in fixed-size blocks, each
block on its own child stream, so a batch is a pure function of
``(params, seed, stream, count)`` no matter how many threads produced it.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import special

from .errors import DomainError, MomentDivergence

BLOCK_SIZE = 1 << 18
DEFAULT_SEED = 20200412


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _check_shadow_shape(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 1.0:
        raise DomainError(
            f"{name} must exceed 1 (the inverse-gamma mean diverges otherwise), got {value!r}"
        )
    return value


@dataclass(frozen=True)
class DoubleShadowParams:
    """Shadowing in both scattering regions (DIG shadowing)."""

    m1: float
    m2: float
    alpha1: float
    alpha2: float
    gamma_bar: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        m1 = _check_positive("m1", self.m1)
        m2 = _check_positive("m2", self.m2)
        a1 = _check_shadow_shape("alpha1", self.alpha1)
        a2 = _check_shadow_shape("alpha2", self.alpha2)
        # the model is symmetric under m1<->m2 and alpha1<->alpha2
        object.__setattr__(self, "m1", min(m1, m2))
        object.__setattr__(self, "m2", max(m1, m2))
        object.__setattr__(self, "alpha1", min(a1, a2))
        object.__setattr__(self, "alpha2", max(a1, a2))
        object.__setattr__(self, "gamma_bar", _check_positive("gamma_bar", self.gamma_bar))
        object.__setattr__(self, "omega", _check_positive("omega", self.omega))

    model = "DS"

    @property
    def alphas(self) -> tuple[float, float]:
        return (self.alpha1, self.alpha2)

    def replace(self, **changes) -> "DoubleShadowParams":
        return DoubleShadowParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return {"model": self.model, **asdict(self)}


@dataclass(frozen=True)
class SingleShadowParams:
    """Shadowing in one scattering region only (SIG shadowing)."""

    m1: float
    m2: float
    alpha: float
    gamma_bar: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        m1 = _check_positive("m1", self.m1)
        m2 = _check_positive("m2", self.m2)
        object.__setattr__(self, "m1", min(m1, m2))
        object.__setattr__(self, "m2", max(m1, m2))
        object.__setattr__(self, "alpha", _check_shadow_shape("alpha", self.alpha))
        object.__setattr__(self, "gamma_bar", _check_positive("gamma_bar", self.gamma_bar))
        object.__setattr__(self, "omega", _check_positive("omega", self.omega))

    model = "SS"

    @property
    def alphas(self) -> tuple[float]:
        return (self.alpha,)

    def replace(self, **changes) -> "SingleShadowParams":
        return SingleShadowParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return {"model": self.model, **asdict(self)}


ChannelParams = Union[DoubleShadowParams, SingleShadowParams]


def validate(params) -> ChannelParams:
    """Return a validated, canonically ordered copy of ``params``.

    Accepts either params object or a mapping with a ``model`` key
    (``"DS"``/``"SS"``); a mapping without it is taken as DS when it carries
    ``alpha1``.
    """
    if isinstance(params, (DoubleShadowParams, SingleShadowParams)):
        return params.replace()
    if isinstance(params, dict):
        fields = dict(params)
        model = str(fields.pop("model", "DS" if "alpha1" in fields else "SS")).upper()
        try:
            if model == "DS":
                return DoubleShadowParams(**fields)
            if model == "SS":
                return SingleShadowParams(**fields)
        except TypeError as exc:
            raise DomainError(str(exc)) from None
        raise DomainError(f"unknown model {model!r}")
    raise DomainError(f"cannot interpret {type(params).__name__} as channel parameters")


def params_from_dict(d: dict) -> ChannelParams:
    return validate(d)


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def make_rng(seed: int, stream: int = 0, block: int | None = None) -> np.random.Generator:
    key = (int(stream),) if block is None else (int(stream), int(block))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def blocked_draws(
    n: int,
    seed: int,
    stream: int,
    draw: Callable[[np.random.Generator, int], np.ndarray],
    threads: int = 1,
) -> np.ndarray:
    """Run ``draw(rng, size)`` over fixed-size blocks and concatenate.

    Block ``b`` always uses child stream ``(stream, b)``, so the result does
    not depend on ``threads``.
    """
    n = int(n)
    if n < 0:
        raise DomainError(f"sample count must be non-negative, got {n}")
    if n == 0:
        return np.empty(0)
    sizes = [BLOCK_SIZE] * (n // BLOCK_SIZE)
    if n % BLOCK_SIZE:
        sizes.append(n % BLOCK_SIZE)

    def run(b: int) -> np.ndarray:
        return draw(make_rng(seed, stream, b), sizes[b])

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    return np.concatenate(parts)


@dataclass
class SampleBatch:
    """i.i.d. draws plus the stream metadata that produced them."""

    values: np.ndarray
    seed: int
    stream_id: int = 0
    params: dict | None = None
    count: int = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.count = int(self.values.size)
        if self.count and not np.all(self.values >= 0):
            raise DomainError("sample values must be non-negative")

    def __len__(self) -> int:
        return self.count

    def mean(self) -> float:
        return float(np.mean(self.values))

    def to_csv(self, header_lines: list[str] | None = None) -> str:
        buf = io.StringIO()
        for line in header_lines or []:
            buf.write(f"# {line}\n")
        buf.write("snr_linear\n")
        for v in self.values:
            buf.write(f"{v:.17g}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "params": self.params,
                "seed": self.seed,
                "stream": self.stream_id,
                "count": self.count,
                "values": self.values.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SampleBatch":
        d = json.loads(text)
        batch = cls(np.asarray(d["values"], float), d["seed"], d.get("stream", 0), d.get("params"))
        if batch.count != d["count"]:
            raise DomainError("count field does not match number of values")
        return batch

    @classmethod
    def from_csv(cls, text: str, seed: int = -1) -> "SampleBatch":
        rows = [r for r in csv.reader(line for line in text.splitlines() if not line.startswith("#"))]
        if not rows or rows[0] != ["snr_linear"]:
            raise DomainError("expected a 'snr_linear' header")
        return cls(np.array([float(r[0]) for r in rows[1:] if r]), seed)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def sample_nakagami_sq(m: float, omega: float, n: int, seed: int = DEFAULT_SEED, stream: int = 0,
                       threads: int = 1) -> SampleBatch:
    """Squared Nakagami-m envelope: gamma with shape ``m`` and mean ``omega``."""
    m = _check_positive("m", m)
    omega = _check_positive("omega", omega)
    values = blocked_draws(n, seed, stream, lambda g, k: g.gamma(m, omega / m, k), threads)
    return SampleBatch(values, seed, stream, {"m": m, "omega": omega})


def sample_inverse_gamma(alpha: float, gamma_bar: float, n: int, seed: int = DEFAULT_SEED,
                         stream: int = 0, method: str = "reciprocal", threads: int = 1) -> SampleBatch:
    """Inverse-gamma shadowing with shape ``alpha`` and scale ``gamma_bar``.

    ``method="reciprocal"`` inverts a gamma(alpha, rate=gamma_bar) draw;
    ``method="inversion"`` pushes uniforms through the inverse CDF and exists
    as an independent route for self-checks.
    """
    alpha = _check_shadow_shape("alpha", alpha)
    gamma_bar = _check_positive("gamma_bar", gamma_bar)
    if method == "reciprocal":
        def draw(g, k):
            return gamma_bar / g.gamma(alpha, 1.0, k)
    elif method == "inversion":
        def draw(g, k):
            # F(y) = Q(alpha, gamma_bar / y)
            return gamma_bar / special.gammainccinv(alpha, g.random(k))
    else:
        raise ValueError(f"unknown method {method!r}")
    values = blocked_draws(n, seed, stream, draw, threads)
    return SampleBatch(values, seed, stream, {"alpha": alpha, "gamma_bar": gamma_bar})


def draw_components(params: ChannelParams, rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
    """One block of ``(N, I)`` pairs: the fading and shadowing products."""
    p = params
    n = rng.gamma(p.m1, p.omega / p.m1, size) * rng.gamma(p.m2, p.omega / p.m2, size)
    if isinstance(p, DoubleShadowParams):
        shadow = p.gamma_bar / (rng.gamma(p.alpha1, 1.0, size) * rng.gamma(p.alpha2, 1.0, size))
    else:
        shadow = p.gamma_bar / rng.gamma(p.alpha, 1.0, size)
    return n, shadow


def _sample(params: ChannelParams, n: int, seed: int, stream: int, threads: int) -> SampleBatch:
    def draw(g, k):
        fading, shadow = draw_components(params, g, k)
        return fading * shadow

    values = blocked_draws(n, seed, stream, draw, threads)
    return SampleBatch(values, seed, stream, params.to_dict())


def sample_ds(params: DoubleShadowParams, n: int, seed: int = DEFAULT_SEED, stream: int = 0,
              threads: int = 1) -> SampleBatch:
    if not isinstance(params, DoubleShadowParams):
        raise DomainError("sample_ds needs DoubleShadowParams")
    return _sample(params, n, seed, stream, threads)


def sample_ss(params: SingleShadowParams, n: int, seed: int = DEFAULT_SEED, stream: int = 0,
              threads: int = 1) -> SampleBatch:
    if not isinstance(params, SingleShadowParams):
        raise DomainError("sample_ss needs SingleShadowParams")
    return _sample(params, n, seed, stream, threads)


def sample(params: ChannelParams, n: int, seed: int = DEFAULT_SEED, stream: int = 0,
           threads: int = 1) -> SampleBatch:
    return _sample(validate(params), n, seed, stream, threads)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def log_moment(params: ChannelParams, k) -> np.ndarray | float:
    """``log E[gamma**k]`` for real order ``k`` (negative orders allowed).

    Exists for ``-min(m) < k < min(alpha)``.
    """
    p = params
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr >= min(p.alphas)):
        raise MomentDivergence(
            f"moment of order {np.max(k_arr)} needs every alpha > order; alphas are {p.alphas}"
        )
    if np.any(k_arr <= -p.m1):
        raise MomentDivergence(f"negative moment of order {np.min(k_arr)} needs m > {-np.min(k_arr)}")
    out = k_arr * (math.log(p.gamma_bar) + 2.0 * math.log(p.omega))
    for m in (p.m1, p.m2):
        out = out + special.gammaln(m + k_arr) - special.gammaln(m) - k_arr * math.log(m)
    for a in p.alphas:
        out = out + special.gammaln(a - k_arr) - special.gammaln(a)
    return out if out.ndim else float(out)


def moment(params: ChannelParams, k) -> np.ndarray | float:
    return np.exp(log_moment(params, k))


def moment_ds(params: DoubleShadowParams, k) -> float:
    """k-th moment of the DS SNR; ``k=1`` gives gamma_bar/((a1-1)(a2-1))."""
    if not isinstance(params, DoubleShadowParams):
        raise DomainError("moment_ds needs DoubleShadowParams")
    return moment(params, k)


def moment_ss(params: SingleShadowParams, k) -> float:
    if not isinstance(params, SingleShadowParams):
        raise DomainError("moment_ss needs SingleShadowParams")
    return moment(params, k)


def mean_snr(params: ChannelParams) -> float:
    return moment(params, 1.0)
