"""Received-power traces: loading, virtual-UAV splitting, strategy replay and
ECDF comparison.

A replay takes ``L`` time-aligned traces and at each decision instant picks one
of them.  Decisions are made every ``window_samples`` (shadowing window),
every ``ct_samples`` (coherence-time cadence) or at every sample.  Averages are
taken in linear power.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientLength, LengthMismatch, ParseError, UnitError
from .model import DEFAULT_SEED, ChannelParams, DoubleShadowParams, make_rng, validate

UNITS = ("dB", "linear")
STRATEGIES = ("shadow_window", "coherence_time", "per_sample")
DEFAULT_WINDOW_SAMPLES = 242
DEFAULT_CT_SAMPLES = 170


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def _norm_unit(unit) -> str:
    if unit is None:
        raise UnitError("trace unit is missing; declare 'dB' or 'linear'")
    u = str(unit).strip().lower()
    if u == "db":
        return "dB"
    if u == "linear":
        return "linear"
    raise UnitError(f"unknown unit {unit!r}; expected 'dB' or 'linear'")


@dataclass
class PowerTrace:
    samples: np.ndarray
    unit: str
    sample_spacing_m: float
    wavelength_m: float
    label: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        self.unit = _norm_unit(self.unit)
        if self.samples.size == 0:
            raise DomainError("trace is empty")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("trace contains non-finite samples")
        if self.unit == "linear" and np.any(self.samples < 0):
            raise DomainError("linear power must be non-negative")
        for name in ("sample_spacing_m", "wavelength_m"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise DomainError(f"{name} must be positive, got {v!r}")
            setattr(self, name, v)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def linear(self) -> np.ndarray:
        return self.samples if self.unit == "linear" else db_to_linear(self.samples)

    @property
    def db(self) -> np.ndarray:
        return self.samples if self.unit == "dB" else linear_to_db(self.samples)

    @property
    def samples_per_wavelength(self) -> float:
        return self.wavelength_m / self.sample_spacing_m

    def to_unit(self, unit: str) -> "PowerTrace":
        unit = _norm_unit(unit)
        values = self.linear if unit == "linear" else self.db
        return PowerTrace(values, unit, self.sample_spacing_m, self.wavelength_m, self.label)

    def metadata(self) -> dict:
        return {
            "unit": self.unit,
            "sample_spacing_m": self.sample_spacing_m,
            "wavelength_m": self.wavelength_m,
        }


def cadence_samples(span_wavelengths: float, trace: PowerTrace) -> int:
    """Number of samples spanning ``span_wavelengths`` wavelengths (at least 1)."""
    return max(1, int(round(span_wavelengths * trace.samples_per_wavelength)))


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def _sidecar_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".json"


def _parse_header_line(line: str, meta: dict) -> None:
    body = line.lstrip("#").strip()
    for sep in ("=", ":"):
        if sep in body:
            k, v = body.split(sep, 1)
            meta[k.strip()] = v.strip()
            return


def parse_trace_csv(text: str, sidecar: dict | None = None) -> PowerTrace:
    meta: dict = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            _parse_header_line(line, meta)
        elif line.strip():
            body.append(line)
    meta.update(sidecar or {})
    rows = list(csv.reader(body))
    if not rows:
        raise ParseError("trace file has no header row")
    header = [h.strip() for h in rows[0]]
    if "power" not in header:
        raise ParseError(f"trace header must contain a 'power' column, got {header}")
    col = header.index("power")
    try:
        values = [float(r[col]) for r in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed power value: {exc}") from None
    unit = _norm_unit(meta.get("unit"))
    try:
        spacing = float(meta["sample_spacing_m"])
        wavelength = float(meta["wavelength_m"])
    except KeyError as exc:
        raise ParseError(f"trace metadata lacks {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ParseError(f"bad metadata value: {exc}") from None
    try:
        return PowerTrace(np.array(values), unit, spacing, wavelength, str(meta.get("label", "")))
    except UnitError:
        raise
    except DomainError as exc:
        raise ParseError(str(exc)) from None


def load_trace(path: str, format: str = "csv") -> PowerTrace:
    """Read a ``power`` CSV; metadata comes from ``# key=value`` lines and/or a
    JSON sidecar with the same stem (sidecar wins on conflicts)."""
    if format != "csv":
        raise ParseError(f"unsupported trace format {format!r}")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    sidecar = None
    side = _sidecar_path(path)
    if side != path and os.path.exists(side):
        try:
            with open(side, encoding="utf-8") as fh:
                sidecar = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad sidecar {side}: {exc}") from None
    return parse_trace_csv(text, sidecar)


def trace_to_csv(trace: PowerTrace) -> str:
    buf = io.StringIO()
    for k, v in trace.metadata().items():
        buf.write(f"# {k}={v}\n")
    buf.write("power\n")
    for v in trace.samples:
        buf.write(f"{v:.17g}\n")
    return buf.getvalue()


def save_trace(trace: PowerTrace, path: str, sidecar: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trace_to_csv(trace))
    if sidecar:
        with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump(trace.metadata(), fh, indent=2)


# ---------------------------------------------------------------------------
# virtual UAVs and replay
# ---------------------------------------------------------------------------


def split_virtual_uavs(trace: PowerTrace, L: int) -> list[PowerTrace]:
    """``L`` contiguous equal segments; the remainder at the end is dropped."""
    L = int(L)
    if L < 1:
        raise DomainError("L must be at least 1")
    n = len(trace) // L
    if n < 1:
        raise InsufficientLength(f"trace of length {len(trace)} cannot feed {L} virtual UAVs")
    return [
        PowerTrace(trace.samples[i * n:(i + 1) * n], trace.unit, trace.sample_spacing_m,
                   trace.wavelength_m, f"uav{i + 1}")
        for i in range(L)
    ]


@dataclass(frozen=True)
class StrategyConfig:
    """Replay settings.

    ``ct_estimator`` is ``'block_mean'`` (mean over the CT block) or
    ``'instantaneous'`` (the sample at the block start).  With ``causal=True``
    a window/CT decision uses the previous block's statistic (the first block
    uses its own), otherwise the block's own statistic.
    """

    policy: str
    L: int
    window_samples: int = DEFAULT_WINDOW_SAMPLES
    ct_samples: int = DEFAULT_CT_SAMPLES
    ct_estimator: str = "block_mean"
    causal: bool = False

    def __post_init__(self):
        if self.policy not in STRATEGIES:
            raise DomainError(f"unknown policy {self.policy!r}; expected one of {STRATEGIES}")
        if int(self.L) < 1:
            raise DomainError("L must be at least 1")
        if int(self.window_samples) < 1 or int(self.ct_samples) < 1:
            raise DomainError("window_samples and ct_samples must be at least 1")
        if self.ct_estimator not in ("block_mean", "instantaneous"):
            raise DomainError(f"unknown ct_estimator {self.ct_estimator!r}")

    @property
    def cadence(self) -> int:
        if self.policy == "shadow_window":
            return int(self.window_samples)
        if self.policy == "coherence_time":
            return int(self.ct_samples)
        return 1


@dataclass
class ReplayResult:
    selected_power: np.ndarray
    selected_index: np.ndarray
    comparisons: int
    switches: int
    decisions: int
    unit: str
    label: str = ""
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        lin = self.selected_power if self.unit == "linear" else db_to_linear(self.selected_power)
        db = linear_to_db(lin)
        self.summary = {
            "comparisons": int(self.comparisons),
            "switches": int(self.switches),
            "decisions": int(self.decisions),
            "mean_dB": float(linear_to_db(np.mean(lin))),
            "p10_dB": float(np.percentile(db, 10)),
        }

    def to_json(self) -> str:
        return json.dumps({"label": self.label, **self.summary})


def _block_stat(block: np.ndarray, cfg: StrategyConfig) -> np.ndarray:
    """Per-trace decision statistic for one block of shape ``(L, k)``."""
    if cfg.policy == "coherence_time" and cfg.ct_estimator == "instantaneous":
        return block[:, 0]
    return block.mean(axis=1)


def replay(traces: list, cfg: StrategyConfig) -> ReplayResult:
    if len(traces) != cfg.L:
        raise LengthMismatch(f"config expects L={cfg.L} traces, got {len(traces)}")
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise LengthMismatch(f"traces differ in length: {sorted(lengths)}")
    unit = traces[0].unit
    power = np.vstack([t.linear for t in traces])  # (L, n), linear domain
    L, n = power.shape
    step = cfg.cadence
    idx = np.empty(n, dtype=int)
    if cfg.policy == "per_sample":
        idx[:] = np.argmax(power, axis=0)
        decisions = n
    else:
        starts = range(0, n, step)
        decisions = 0
        prev_stat = None
        for s in starts:
            block = power[:, s:s + step]
            stat = _block_stat(block, cfg)
            use = prev_stat if (cfg.causal and prev_stat is not None) else stat
            idx[s:s + step] = int(np.argmax(use))
            prev_stat = stat
            decisions += 1
    # output in the first trace's unit, taken from the stored samples (no dB round trip)
    raw = np.vstack([t.to_unit(unit).samples for t in traces])
    out = raw[idx, np.arange(n)]
    comparisons = decisions * (L - 1)
    switches = int(np.count_nonzero(np.diff(idx))) if n > 1 else 0
    return ReplayResult(out, idx, comparisons, switches, decisions, unit, cfg.policy)


def replay_trace(traces: list, cfg: StrategyConfig) -> tuple[PowerTrace, ReplayResult]:
    res = replay(traces, cfg)
    t0 = traces[0]
    return PowerTrace(res.selected_power, res.unit, t0.sample_spacing_m, t0.wavelength_m, cfg.policy), res


# ---------------------------------------------------------------------------
# ECDF comparison
# ---------------------------------------------------------------------------


@dataclass
class EcdfTable:
    header: list
    rows: list
    summary: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        for label, stats_ in self.summary.items():
            buf.write(f"# {label}: mean_dB={stats_['mean_dB']:.6f} p10_dB={stats_['p10_dB']:.6f}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([f"{v:.10g}" for v in r])
        return buf.getvalue()


def _as_db(item) -> tuple[np.ndarray, str]:
    if isinstance(item, ReplayResult):
        vals = item.selected_power if item.unit == "dB" else linear_to_db(item.selected_power)
        return np.asarray(vals, float), item.label
    if isinstance(item, PowerTrace):
        return item.db, item.label
    raise DomainError(f"cannot compare object of type {type(item).__name__}")


def ecdf(values_db: np.ndarray, grid_db: np.ndarray) -> np.ndarray:
    v = np.sort(np.asarray(values_db, dtype=float))
    return np.searchsorted(v, grid_db, side="right") / v.size


def ecdf_compare(results: list, labels: list | None = None, n_grid: int = 200) -> EcdfTable:
    """ECDFs of replay outputs (or raw traces) on a shared dB grid."""
    if not results:
        raise DomainError("nothing to compare")
    series = [_as_db(r) for r in results]
    if labels is None:
        labels = [s[1] or f"series{i + 1}" for i, s in enumerate(series)]
    if len(labels) != len(series):
        raise DomainError("labels and results differ in length")
    finite = np.concatenate([s[0][np.isfinite(s[0])] for s in series])
    grid = np.linspace(finite.min(), finite.max(), n_grid)
    cols = [ecdf(s[0], grid) for s in series]
    if len(series) == 1:
        header = ["power_db", "ecdf"]
    else:
        header = ["power_db"] + [f"ecdf_{lab}" for lab in labels]
    rows = [[float(g)] + [float(c[i]) for c in cols] for i, g in enumerate(grid)]
    summary = {}
    for lab, (db, _) in zip(labels, series):
        summary[lab] = {
            "mean_dB": float(linear_to_db(np.mean(db_to_linear(db)))),
            "p10_dB": float(np.percentile(db, 10)),
        }
    return EcdfTable(header, rows, summary)


def ecdf_distance(a, b) -> float:
    """Sup distance between the ECDFs of two series (dB or linear alike)."""
    x = np.sort(_as_db(a)[0])
    y = np.sort(_as_db(b)[0])
    grid = np.concatenate([x, y])
    return float(np.max(np.abs(ecdf(x, grid) - ecdf(y, grid))))


# ---------------------------------------------------------------------------
# synthetic traces
# ---------------------------------------------------------------------------


def synthesize_trace(params: ChannelParams, n: int, shadow_block: int = 484, fading_block: int = 1,
                     seed: int = DEFAULT_SEED, stream: int = 0, sample_spacing_m: float = 0.15 / 6.05,
                     wavelength_m: float = 0.15, unit: str = "dB", label: str = "") -> PowerTrace:
    """Model-driven trace: shadowing held over ``shadow_block`` samples, fading
    over ``fading_block`` samples, both drawn from the channel model."""
    p = validate(params)
    n = int(n)
    if n < 1 or shadow_block < 1 or fading_block < 1:
        raise DomainError("n, shadow_block and fading_block must be positive")
    rng = make_rng(seed, stream)
    n_sh = -(-n // shadow_block)
    n_fd = -(-n // fading_block)
    if isinstance(p, DoubleShadowParams):
        shadow = p.gamma_bar / (rng.gamma(p.alpha1, 1.0, n_sh) * rng.gamma(p.alpha2, 1.0, n_sh))
    else:
        shadow = p.gamma_bar / rng.gamma(p.alpha, 1.0, n_sh)
    fading = rng.gamma(p.m1, p.omega / p.m1, n_fd) * rng.gamma(p.m2, p.omega / p.m2, n_fd)
    power = np.repeat(shadow, shadow_block)[:n] * np.repeat(fading, fading_block)[:n]
    trace = PowerTrace(power, "linear", sample_spacing_m, wavelength_m, label)
    return trace.to_unit(unit)
