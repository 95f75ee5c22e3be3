"""Command-line front end: ``shadowscatter {sample,eval,select,fit,gof,trace}``.

Average SNRs and thresholds are given in dB; outputs are CSV with ``#``
metadata lines unless ``--format json`` is chosen.  Errors exit with the
``exit_code`` of their class; usage errors exit with 64, I/O errors with 74.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, analytics, fitgof, selection, traces
from .analytics import EvalOptions
from .errors import SeriesInapplicable, ShadowScatterError
from .model import DEFAULT_SEED, DoubleShadowParams, SampleBatch, SingleShadowParams, sample, validate

EXIT_USAGE = 64
EXIT_IO = 74
SEED_ENV = "SHADOWSCATTER_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else DEFAULT_SEED


def db(x) -> np.ndarray:
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def _grid(values, rng):
    if values is not None:
        return np.asarray(values, dtype=float)
    if rng is not None:
        start, stop, count = rng
        return np.linspace(start, stop, int(count))
    return None


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel parameters")
    g.add_argument("--model", choices=["ds", "ss"], default="ds")
    g.add_argument("--m1", type=float, required=True)
    g.add_argument("--m2", type=float, required=True)
    g.add_argument("--omega", type=float, default=1.0)
    g.add_argument("--a1", type=float, help="alpha1 (DS)")
    g.add_argument("--a2", type=float, help="alpha2 (DS)")
    g.add_argument("--alpha", type=float, help="alpha (SS)")
    g.add_argument("--gbar", type=float, default=0.0, help="average SNR scale in dB (default 0 dB)")


def _params(args, gamma_bar_linear: float | None = None):
    gb = float(db(args.gbar)) if gamma_bar_linear is None else gamma_bar_linear
    if args.model == "ds":
        if args.a1 is None or args.a2 is None:
            raise SystemExit(_usage("--model ds needs --a1 and --a2"))
        return DoubleShadowParams(args.m1, args.m2, args.a1, args.a2, gb, args.omega)
    a = args.alpha if args.alpha is not None else args.a1
    if a is None:
        raise SystemExit(_usage("--model ss needs --alpha"))
    return SingleShadowParams(args.m1, args.m2, a, gb, args.omega)


def _usage(msg: str) -> int:
    print(f"shadowscatter: error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _opts(args) -> EvalOptions:
    return EvalOptions(rel_tol=args.rel_tol, method=getattr(args, "method", "auto"))


def _header(args, extra: dict | None = None) -> list[str]:
    lines = [f"shadowscatter {__version__}", f"command={args.command}"]
    if hasattr(args, "seed"):
        lines.append(f"seed={args.seed}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}={json.dumps(v, sort_keys=True)}")
    return lines


def _write(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _table(args, header: list[str], rows: list, meta: dict | None = None) -> str:
    if args.format == "json":
        return json.dumps({"meta": meta or {}, "columns": header, "rows": rows}, indent=2) + "\n"
    out = [f"# {line}" for line in _header(args, meta)]
    out.append(",".join(header))
    for r in rows:
        out.append(",".join(v if isinstance(v, str) else f"{v:.12g}" for v in r))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_sample(args) -> int:
    p = _params(args)
    batch = sample(p, args.n, seed=args.seed, stream=args.stream, threads=args.threads)
    if args.format == "json":
        _write(args, batch.to_json() + "\n")
    else:
        _write(args, batch.to_csv(_header(args, {"params": p.to_dict(), "stream": args.stream})))
    return 0


def cmd_eval(args) -> int:
    opts = _opts(args)
    metric = args.metric
    if metric in ("pdf", "cdf", "op"):
        p = _params(args)
        x_db = _grid(args.x_db, args.x_db_range)
        if args.x_linear is not None:
            xs = np.asarray(args.x_linear, dtype=float)
        elif x_db is not None:
            xs = db(x_db)
        else:
            return _usage(f"{metric} needs --x-db, --x-db-range or --x-linear")
        kind = "pdf" if metric == "pdf" else "cdf"
        rows = []
        for x, v, m in analytics.grid_rows(kind, p, xs, opts):
            rows.append([float(10 * np.log10(x)) if x > 0 else "-inf", float(x), float(v), m])
        header = ["x_db", "x_linear", metric, "method"]
        _write(args, _table(args, header, rows, {"params": p.to_dict()}))
        return 0
    gdb = _grid(args.gbar_db, args.gbar_db_range)
    if gdb is None:
        gdb = np.array([args.gbar])
    rows = []
    for g in gdb:
        p = _params(args, float(db(g)))
        rep = analytics.evaluate_metric(metric, p, opts, bandwidth=args.bandwidth)
        rows.append([float(g), rep.value, rep.method])
    header = ["gamma_bar_db", metric, "method"]
    _write(args, _table(args, header, rows, {"params": _params(args).to_dict()}))
    return 0


def cmd_select(args) -> int:
    opts = _opts(args)
    base = _params(args)
    Ls = args.L
    meta = {"params": base.to_dict(), "L": Ls, "mode": args.mode, "policy": args.policy}
    try:
        if args.sweep == "op":
            thr_db = _grid(args.threshold_db, args.threshold_db_range)
            if thr_db is None:
                return _usage("--sweep op needs --threshold-db or --threshold-db-range")
            if args.mode == "analytic":
                header, rows = selection.op_table(base, Ls, thr_db, opts)
            else:
                thr = db(thr_db)
                cols = []
                for i, L in enumerate(Ls):
                    sel = selection.SelectionParams(base, L)
                    x = np.sort(selection.simulate_selection(sel, args.n_trials, args.seed, args.policy,
                                                             stream=i, threads=args.threads).values)
                    cols.append(np.searchsorted(x, thr, side="right") / x.size)
                header = ["threshold_db"] + [f"op_L{L}" for L in Ls]
                rows = [[float(t)] + [float(c[j]) for c in cols] for j, t in enumerate(thr_db)]
        else:
            gdb = _grid(args.gbar_db, args.gbar_db_range)
            if gdb is None:
                return _usage("--sweep asnr needs --gbar-db or --gbar-db-range")
            if args.mode == "analytic":
                header, rows = selection.asnr_table(base, Ls, gdb, opts)
            else:
                unit_base = base.replace(gamma_bar=1.0)
                means = []
                for i, L in enumerate(Ls):
                    sel = selection.SelectionParams(unit_base, L)
                    means.append(selection.simulate_selection(sel, args.n_trials, args.seed, args.policy,
                                                              stream=i, threads=args.threads).mean())
                header = ["gamma_bar_db"] + [f"asnr_db_L{L}" for L in Ls]
                rows = [[float(g)] + [float(g + 10 * np.log10(m)) for m in means] for g in gdb]
    except SeriesInapplicable as exc:
        hint = "" if "quadrature" in str(exc) else "; rerun with --method quadrature"
        print(f"shadowscatter: {exc}{hint}", file=sys.stderr)
        return exc.exit_code
    _write(args, _table(args, header, rows, meta))
    return 0


def _read_values(path: str) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _IOFailure(str(exc)) from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return SampleBatch.from_json(text).values
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if lines and lines[0].strip() == "power":
        return traces.parse_trace_csv(text).linear
    return SampleBatch.from_csv(text).values


class _IOFailure(Exception):
    pass


def cmd_fit(args) -> int:
    values = _read_values(args.input)
    orders = args.orders
    res = fitgof.fit_moments(values, args.model_tag, orders)
    d = res.to_dict()
    d["input"] = os.path.basename(args.input)
    d["n"] = int(values.size)
    _write(args, json.dumps(d, indent=2) + "\n")
    return 0


def cmd_gof(args) -> int:
    values = _read_values(args.input)
    candidates = []
    if args.params_json:
        with open(args.params_json, encoding="utf-8") as fh:
            spec = json.load(fh)
        items = spec if isinstance(spec, list) else [spec]
        for item in items:
            p = validate(item)
            candidates.append(("DIG" if p.model == "DS" else "SIG", p))
    else:
        for tag in args.models:
            candidates.append((tag, fitgof.fit_moments(values, tag)))
    reports = fitgof.gof_table(values, candidates, bins=args.bins, segments=args.segments,
                               confidence=args.confidence)
    if args.format == "json":
        _write(args, fitgof.gof_table_json(reports) + "\n")
    else:
        head = "".join(f"# {line}\n" for line in _header(args, {"n": int(values.size)}))
        _write(args, head + fitgof.gof_table_csv(reports))
    return 0


def cmd_trace(args) -> int:
    if args.trace_command == "synth":
        p = _params(args)
        tr = traces.synthesize_trace(p, args.n, args.shadow_block, args.fading_block, args.seed,
                                     args.stream, args.spacing, args.wavelength, args.unit)
        if args.out in (None, "-"):
            sys.stdout.write(traces.trace_to_csv(tr))
        else:
            traces.save_trace(tr, args.out)
        return 0

    loaded = [traces.load_trace(path) for path in args.input]
    if len(loaded) == 1 and args.L > 1:
        uavs = traces.split_virtual_uavs(loaded[0], args.L)
    else:
        uavs = loaded
    spw = uavs[0].samples_per_wavelength
    window = args.window_samples
    ct = args.ct_samples
    if args.window_lambda is not None:
        window = traces.cadence_samples(args.window_lambda, uavs[0])
    if args.ct_lambda is not None:
        ct = traces.cadence_samples(args.ct_lambda, uavs[0])
    cfg = traces.StrategyConfig(args.policy, len(uavs), window, ct, args.ct_estimator, args.causal)
    out_trace, res = traces.replay_trace(uavs, cfg)
    summary = {**json.loads(res.to_json()), "window_samples": window, "ct_samples": ct,
               "samples_per_wavelength": spw}
    _write(args, json.dumps(summary, indent=2) + "\n")
    if args.ecdf_out:
        table = traces.ecdf_compare([res] + (uavs if len(uavs) > 1 else []),
                                    [args.policy] + ([u.label or f"uav{i + 1}" for i, u in enumerate(uavs)]
                                                     if len(uavs) > 1 else []))
        with open(args.ecdf_out, "w", encoding="utf-8") as fh:
            fh.write(table.to_csv())
    if args.trace_out:
        traces.save_trace(out_trace, args.trace_out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shadowscatter", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True):
        p.add_argument("--out", default="-", help="output file (default stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--rel-tol", type=float, default=1e-8)
        if seed:
            p.add_argument("--seed", type=int, default=default_seed())

    p = sub.add_parser("sample", help="draw composite SNR samples", allow_abbrev=False)
    _add_params(p)
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="evaluate pdf/cdf/op/bep/capacity", allow_abbrev=False)
    _add_params(p)
    common(p, seed=False)
    p.add_argument("--metric", choices=["pdf", "cdf", "op", "bep", "capacity"], required=True)
    p.add_argument("--method", choices=["auto", "series", "quadrature"], default="auto")
    p.add_argument("--x-db", type=float, nargs="+", help="SNR or threshold values in dB")
    p.add_argument("--x-db-range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    p.add_argument("--x-linear", type=float, nargs="+", help="SNR or threshold values, linear")
    p.add_argument("--gbar-db", type=float, nargs="+", help="average SNR sweep in dB (bep/capacity)")
    p.add_argument("--gbar-db-range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    p.add_argument("--bandwidth", type=float, default=1.0, help="Hz; 1 gives C/BW")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("select", help="selection outage or ASNR tables", allow_abbrev=False)
    _add_params(p)
    common(p)
    p.add_argument("--mode", choices=["analytic", "simulate"], default="analytic")
    p.add_argument("--sweep", choices=["op", "asnr"], default="op")
    p.add_argument("--L", type=int, nargs="+", default=[1, 2, 3, 5])
    p.add_argument("--method", choices=["auto", "series", "quadrature"], default="auto")
    p.add_argument("--threshold-db", type=float, nargs="+")
    p.add_argument("--threshold-db-range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    p.add_argument("--gbar-db", type=float, nargs="+")
    p.add_argument("--gbar-db-range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    p.add_argument("--n-trials", type=int, default=10**5)
    p.add_argument("--policy", choices=list(selection.POLICIES), default="shadow_max")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("fit", help="method-of-moments fit", allow_abbrev=False)
    common(p, seed=False)
    p.add_argument("--input", required=True, help="sample CSV/JSON or power trace CSV")
    p.add_argument("--model-tag", choices=list(fitgof.MODEL_TAGS), default="DIG")
    p.add_argument("--orders", type=float, nargs="+", help="fit log-moments at these orders instead")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gof", help="K-L / K-S goodness-of-fit table", allow_abbrev=False)
    common(p, seed=False)
    p.add_argument("--input", required=True)
    p.add_argument("--models", nargs="+", choices=list(fitgof.MODEL_TAGS), default=["DIG", "SIG"])
    p.add_argument("--params-json", help="score fixed parameter sets instead of fitting")
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--segments", type=int, default=1)
    p.add_argument("--confidence", type=float, default=0.95)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("trace", help="synthesise or replay power traces", allow_abbrev=False)
    tsub = p.add_subparsers(dest="trace_command", required=True, parser_class=_Parser)
    r = tsub.add_parser("replay", allow_abbrev=False)
    common(r, seed=False)
    r.add_argument("--input", nargs="+", required=True, help="one trace (split into --L) or L traces")
    r.add_argument("--L", type=int, default=1)
    r.add_argument("--policy", choices=list(traces.STRATEGIES), default="shadow_window")
    r.add_argument("--window-samples", type=int, default=traces.DEFAULT_WINDOW_SAMPLES)
    r.add_argument("--ct-samples", type=int, default=traces.DEFAULT_CT_SAMPLES)
    r.add_argument("--window-lambda", type=float, help="window in wavelengths (overrides samples)")
    r.add_argument("--ct-lambda", type=float, help="CT cadence in wavelengths (overrides samples)")
    r.add_argument("--ct-estimator", choices=["block_mean", "instantaneous"], default="block_mean")
    r.add_argument("--causal", action="store_true")
    r.add_argument("--ecdf-out")
    r.add_argument("--trace-out")
    r.set_defaults(func=cmd_trace)
    s = tsub.add_parser("synth", allow_abbrev=False)
    _add_params(s)
    common(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--shadow-block", type=int, default=484)
    s.add_argument("--fading-block", type=int, default=1)
    s.add_argument("--spacing", type=float, default=0.15 / 6.05, help="sample spacing in metres")
    s.add_argument("--wavelength", type=float, default=0.15, help="metres")
    s.add_argument("--unit", choices=["dB", "linear"], default="dB")
    s.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except ShadowScatterError as exc:
        print(f"shadowscatter: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (_IOFailure, OSError) as exc:
        print(f"shadowscatter: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
