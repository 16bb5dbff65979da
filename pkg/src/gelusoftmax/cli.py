"""Command-line front end.

Exit status: 0 on success, 1 when a configured threshold fails, 2 on usage
or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .analysis import InputError, SweepSpec
from .config import dump_config, load_config
from .fixed_point import FxWord, RoundingMode, quantize_array
from .gelu_unit import gelu_raw
from .pwl import FUNCTIONS, WRAPS, dump_table, eval_pwl_raw, fit_pwl, load_table, quantize_coeffs
from .reference import ref_gelu_erf, ref_gelu_tanh, ref_gelu_via_softmax
from .softmax_core import Mode, UnitConfig, softmax_forward, softmax_raw

EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------------------
# config handling


def _add_unit_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("unit configuration (flags override --config)")
    g.add_argument("--config", help="JSON config file (see dump-config)")
    g.add_argument("--n", type=int, help="vector width, a power of two")
    g.add_argument("--rounding", choices=[m.value for m in RoundingMode])
    g.add_argument("--exp-table", help="coefficient file for the 2**v unit")
    g.add_argument("--log-table", help="coefficient file for the log2(1+m) unit")


def build_config(args) -> UnitConfig:
    cfg = load_config(args.config) if args.config else UnitConfig()
    changes = {}
    if args.n is not None:
        changes["n"] = args.n
    if args.rounding is not None:
        changes["rounding"] = RoundingMode(args.rounding)
    if args.exp_table:
        changes["exp_table"] = load_table(args.exp_table)
    if args.log_table:
        changes["log_table"] = load_table(args.log_table)
    return cfg.with_(**changes) if changes else cfg


def _emit_json(obj, path=None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    sys.stdout.write(text)


def _gate(checks: list[tuple[str, float, float | None]]) -> int:
    """Compare ``(metric, value, limit)`` triples; ``limit=None`` is ungated."""
    status = EXIT_OK
    for name, value, limit in checks:
        if limit is None:
            continue
        if value > limit:
            print(f"FAIL {name}: {value:.6g} > {limit:.6g}", file=sys.stderr)
            status = EXIT_THRESHOLD
        else:
            print(f"pass {name}: {value:.6g} <= {limit:.6g}", file=sys.stderr)
    return status


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    f = FUNCTIONS[args.fn]
    wrap = WRAPS.get(args.fn) if not args.no_wrap else None
    real = fit_pwl(f, args.segments, wrap=wrap)
    table = quantize_coeffs(real, args.fn, mode=RoundingMode(args.coef_rounding),
                            monotone=not args.no_repair,
                            wrap_ratio=2 if args.fn == "exp2" and wrap else None)
    v = np.arange(1 << 16, dtype=np.int64)
    approx = np.ldexp(eval_pwl_raw(table, v).astype(np.float64), -(table.slope_fmt.frac_bits + 16))
    q_err = float(np.max(np.abs(approx - f(v / 65536.0))))
    if args.out:
        dump_table(table, args.out)
    _emit_json({
        "function": args.fn,
        "segments": args.segments,
        "fit_max_error": real.max_error,
        "quantized_max_error": q_err,
        "out": args.out,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _read_rows(fh, name: str, raw: bool, cfg: UnitConfig) -> list[tuple[int, np.ndarray]]:
    rows = []
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals = [int(t) if raw else float(t) for t in line.split(",")]
        except ValueError:
            raise InputError(f"{name}:{lineno}: malformed value in row {line!r}") from None
        if raw:
            codes = np.array(vals, dtype=np.int64)
            fmt = cfg.input_fmt
            if np.any(codes < fmt.min_raw) or np.any(codes > fmt.max_raw):
                raise InputError(f"{name}:{lineno}: raw code out of range for {fmt}")
        else:
            if not np.all(np.isfinite(vals)):
                raise InputError(f"{name}:{lineno}: non-finite value")
            codes = quantize_array(vals, cfg.input_fmt, cfg.rounding)
        rows.append((lineno, codes))
    return rows


def _format_row(raw: np.ndarray, frac: int, fmt: str) -> list[str]:
    cells = []
    if fmt in ("raw", "both"):
        cells += [str(int(r)) for r in raw]
    if fmt in ("decimal", "both"):
        cells += [f"{v:.12g}" for v in np.ldexp(raw.astype(np.float64), -frac)]
    return cells


def cmd_eval(args) -> int:
    cfg = build_config(args)
    if args.input in (None, "-"):
        rows = _read_rows(sys.stdin, "<stdin>", args.input_raw, cfg)
    else:
        try:
            fh = open(args.input)
        except OSError as exc:
            raise InputError(f"{args.input}: {exc}") from exc
        with fh:
            rows = _read_rows(fh, args.input, args.input_raw, cfg)
    name = args.input or "<stdin>"

    out_rows, traces = [], []
    if args.function == "softmax":
        mode = Mode(args.mode)
        for lineno, codes in rows:
            if codes.size != cfg.n:
                raise InputError(f"{name}:{lineno}: expected {cfg.n} values, got {codes.size}")
        if rows:
            x = np.stack([c for _, c in rows])
            y = softmax_raw(x, cfg, mode)
            out_rows = [_format_row(r, cfg.prob_fmt.frac_bits, args.format) for r in y]
            if args.trace:
                for _, c in rows:
                    words = [FxWord(int(r), cfg.input_fmt) for r in c]
                    traces.append(softmax_forward(words, cfg, mode)[1].to_dict())
    else:
        half = cfg.n // 2
        for lineno, codes in rows:
            if codes.size > half:
                raise InputError(
                    f"{name}:{lineno}: at most n/2 = {half} values per row, got {codes.size}")
            padded = np.zeros((1, half), dtype=np.int64)
            padded[0, : codes.size] = codes
            g = gelu_raw(padded, cfg)[0, : codes.size]
            out_rows.append(_format_row(g, cfg.input_fmt.frac_bits, args.format))

    text = "".join(",".join(r) + "\n" for r in out_rows)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    if args.trace:
        Path(args.trace).write_text(json.dumps(traces, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep / compare


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    if args.target == "gelu":
        dist = "trace" if args.trace_file else args.dist
        spec = SweepSpec(lo=args.lo, hi=args.hi, step=args.step, distribution=dist,
                         count=args.count, seed=args.seed, trace_path=args.trace_file)
        res = analysis.sweep_gelu(spec, cfg, args.reference)
        if args.csv:
            Path(args.csv).write_text(res.csv_text())
        _emit_json({
            "target": "gelu", "reference": args.reference, "seed": spec.seed,
            "distribution": dist, "n": cfg.n, "rounding": cfg.rounding.value,
            "report": res.report.to_dict(),
        }, args.json)
        return _gate([
            ("max_abs_err", res.report.max_abs_err, args.max_err),
            ("mae", res.report.mae, args.max_mae),
            ("rmse", res.report.rmse, args.max_rmse),
        ])

    rep = analysis.sweep_softmax(cfg.n, args.vectors, args.seed, cfg)
    _emit_json({"target": "softmax", "rounding": cfg.rounding.value, **rep.to_dict()}, args.json)
    return _gate([
        ("max_abs_err", rep.lanes.max_abs_err, args.max_err),
        ("mae", rep.lanes.mae, args.max_mae),
        ("max_norm_gap", rep.max_norm_gap, args.max_norm_gap),
    ])


def cmd_compare(args) -> int:
    cfg = build_config(args)
    if args.what == "dual-mode":
        rep = analysis.compare_dual_mode(cfg.n, args.vectors, args.seed, cfg)
        _emit_json(rep.to_dict(), args.json)
        return _gate([("mismatched_lanes", rep.mismatched_lanes, 0),
                      ("max_raw_diff", rep.max_raw_diff, 0)])

    z = np.linspace(-8.0, 8.0, args.points)
    identity = analysis.error_stats(ref_gelu_via_softmax(z), ref_gelu_tanh(z), z)
    tanh_vs_erf = analysis.error_stats(ref_gelu_tanh(z), ref_gelu_erf(z), z)
    _emit_json({
        "points": args.points,
        "softmax_form_vs_tanh": identity.to_dict(),
        "tanh_vs_erf": tanh_vs_erf.to_dict(),
    }, args.json)
    return _gate([("softmax_form_vs_tanh.max_abs_err", identity.max_abs_err, args.max_err)])


def cmd_dump_config(args) -> int:
    cfg = build_config(args)
    text = dump_config(cfg)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gelusoftmax",
        description="Bit-accurate simulator of a combined GELU/softmax fixed-point unit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit and quantize a PWL coefficient table")
    p.add_argument("--fn", required=True, choices=["exp2", "log2p1"])
    p.add_argument("--segments", type=int, default=8)
    p.add_argument("--out", help="write the coefficient JSON here")
    p.add_argument("--coef-rounding", default=RoundingMode.NEAREST_EVEN.value,
                   choices=[m.value for m in RoundingMode])
    p.add_argument("--no-wrap", action="store_true",
                   help="fit without tying the end values across octaves")
    p.add_argument("--no-repair", action="store_true",
                   help="quantize coefficients independently (no monotone repair)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate CSV rows through the unit")
    p.add_argument("function", choices=["softmax", "gelu"])
    p.add_argument("--input", "-i", help="input CSV (default stdin)")
    p.add_argument("--output", "-o", help="output CSV (default stdout)")
    p.add_argument("--input-raw", action="store_true",
                   help="input values are raw integer codes of the input format")
    p.add_argument("--format", choices=["both", "raw", "decimal"], default="both",
                   help="per row: raw codes, decimals, or raw codes followed by decimals")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.NORMAL.value,
                   help="softmax mode")
    p.add_argument("--trace", help="write per-row softmax traces (JSON, raw integers)")
    _add_unit_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="error sweep against the float references")
    p.add_argument("target", choices=["gelu", "softmax"])
    p.add_argument("--lo", type=float, default=-8.0)
    p.add_argument("--hi", type=float, default=8.0)
    p.add_argument("--step", type=float, default=2.0**-10)
    p.add_argument("--dist", choices=["grid", "normal"], default="grid")
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--trace-file", help="read GELU inputs from a text/CSV file")
    p.add_argument("--reference", choices=["tanh", "erf", "softmax"], default="tanh")
    p.add_argument("--vectors", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=analysis.DEFAULT_SEED)
    p.add_argument("--max-err", type=float)
    p.add_argument("--max-mae", type=float)
    p.add_argument("--max-rmse", type=float)
    p.add_argument("--max-norm-gap", type=float)
    p.add_argument("--csv", help="write the per-point table (gelu only)")
    p.add_argument("--json", help="also write the report here")
    _add_unit_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="bit-exact and identity checks")
    p.add_argument("what", choices=["dual-mode", "references"])
    p.add_argument("--vectors", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=analysis.DEFAULT_SEED)
    p.add_argument("--points", type=int, default=1 << 20)
    p.add_argument("--max-err", type=float, default=1e-12)
    p.add_argument("--json", help="also write the report here")
    _add_unit_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dump-config", help="print the effective unit configuration")
    p.add_argument("--out", help="also write it here")
    _add_unit_args(p)
    p.set_defaults(func=cmd_dump_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
