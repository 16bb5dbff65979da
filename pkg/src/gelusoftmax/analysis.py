"""Error statistics and sweeps of the fixed-point unit against the references."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .fixed_point import quantize_array
from .gelu_unit import gelu_codes
from .reference import REFERENCES, ref_softmax
from .softmax_core import Mode, UnitConfig, softmax_raw

DEFAULT_SEED = 0


class InputError(ValueError):
    """Bad user-supplied data (unreadable file, malformed row)."""


@dataclass(frozen=True)
class ErrorReport:
    mae: float
    max_abs_err: float
    rmse: float
    argmax_err_input: float
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def error_stats(approx, reference, inputs=None) -> ErrorReport:
    a = np.asarray(approx, dtype=np.float64).ravel()
    r = np.asarray(reference, dtype=np.float64).ravel()
    if a.size != r.size:
        raise ValueError(f"length mismatch: {a.size} approximations vs {r.size} references")
    if a.size == 0:
        raise ValueError("error_stats needs at least one sample")
    err = np.abs(a - r)
    i = int(np.argmax(err))
    where = np.asarray(inputs, dtype=np.float64).ravel()[i] if inputs is not None else float(i)
    # fsum keeps the statistics independent of summation order
    return ErrorReport(
        mae=math.fsum(err) / a.size,
        max_abs_err=float(err[i]),
        rmse=math.sqrt(math.fsum(err * err) / a.size),
        argmax_err_input=float(where),
        n_samples=int(a.size),
    )


@dataclass(frozen=True)
class SweepSpec:
    lo: float = -8.0
    hi: float = 8.0
    step: float = 2.0**-10
    distribution: str = "grid"  # grid | normal | trace
    count: int = 10_000
    seed: int = DEFAULT_SEED
    trace_path: str | None = None

    def __post_init__(self):
        if self.distribution not in ("grid", "normal", "trace"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "grid":
            if self.lo > self.hi:
                raise ValueError("sweep needs lo <= hi")
            if self.step <= 0:
                raise ValueError("sweep step must be positive")
        if self.distribution == "normal" and self.count < 1:
            raise ValueError("count must be positive")
        if self.distribution == "trace" and not self.trace_path:
            raise ValueError("trace sweeps need a trace file")


def read_trace(path) -> np.ndarray:
    """Read real values from a text/CSV file (comma or whitespace separated)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read trace file: {exc}") from exc
    values = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        for tok in line.replace(",", " ").split():
            try:
                v = float(tok)
            except ValueError:
                raise InputError(f"{path}:{lineno}: not a number: {tok!r}") from None
            if not math.isfinite(v):
                raise InputError(f"{path}:{lineno}: non-finite value {tok!r}")
            values.append(v)
    if not values:
        raise InputError(f"{path}: trace file holds no values")
    return np.array(values)


def sweep_points(spec: SweepSpec) -> np.ndarray:
    if spec.distribution == "grid":
        count = int(math.floor((spec.hi - spec.lo) / spec.step + 1e-9)) + 1
        return spec.lo + spec.step * np.arange(count)
    if spec.distribution == "normal":
        return np.random.default_rng(spec.seed).standard_normal(spec.count)
    return read_trace(spec.trace_path)


@dataclass
class SweepResult:
    report: ErrorReport
    z: np.ndarray
    approx: np.ndarray
    reference: np.ndarray

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z", "approx", "reference", "abs_err"])
        for z, a, r in zip(self.z, self.approx, self.reference):
            w.writerow([f"{z:.12g}", f"{a:.12g}", f"{r:.12g}", f"{abs(a - r):.12g}"])

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def sweep_gelu(spec: SweepSpec, cfg: UnitConfig, reference: str = "tanh") -> SweepResult:
    """Evaluate the GELU unit over a sweep and compare with a reference.

    Inputs are quantized first and the reference is evaluated at the
    quantized points, so the error is that of the datapath alone.
    """
    if reference not in REFERENCES:
        raise ValueError(f"unknown reference {reference!r}; choose from {sorted(REFERENCES)}")
    codes = quantize_array(sweep_points(spec), cfg.input_fmt, cfg.rounding)
    frac = cfg.input_fmt.frac_bits
    z = np.ldexp(codes.astype(np.float64), -frac)
    approx = np.ldexp(gelu_codes(codes, cfg).astype(np.float64), -frac)
    ref = REFERENCES[reference](z)
    return SweepResult(error_stats(approx, ref, z), z, approx, ref)


@dataclass(frozen=True)
class SoftmaxReport:
    lanes: ErrorReport
    max_norm_gap: float
    mean_norm_gap: float
    n: int
    vectors: int
    seed: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lanes"] = self.lanes.to_dict()
        return d


def random_inputs(n: int, vectors: int, seed: int, cfg: UnitConfig) -> np.ndarray:
    """Raw codes drawn uniformly from the whole input code space."""
    rng = np.random.default_rng(seed)
    fmt = cfg.input_fmt
    return rng.integers(fmt.min_raw, fmt.max_raw + 1, size=(vectors, n), dtype=np.int64)


def softmax_report(x_raw: np.ndarray, cfg: UnitConfig, seed: int = DEFAULT_SEED) -> SoftmaxReport:
    y = np.ldexp(softmax_raw(x_raw, cfg).astype(np.float64), -cfg.prob_fmt.frac_bits)
    ref = ref_softmax(np.ldexp(x_raw.astype(np.float64), -cfg.input_fmt.frac_bits))
    gaps = np.abs(np.array([math.fsum(row) for row in y]) - 1.0)
    return SoftmaxReport(
        lanes=error_stats(y, ref),
        max_norm_gap=float(gaps.max()),
        mean_norm_gap=math.fsum(gaps) / gaps.size,
        n=cfg.n,
        vectors=int(x_raw.shape[0]),
        seed=seed,
    )


def sweep_softmax(n: int, vectors: int, seed: int = DEFAULT_SEED,
                  cfg: UnitConfig | None = None) -> SoftmaxReport:
    cfg = (cfg or UnitConfig(n=n)).with_(n=n)
    return softmax_report(random_inputs(n, vectors, seed, cfg), cfg, seed)


@dataclass(frozen=True)
class DualModeReport:
    n: int
    vectors: int
    seed: int
    mismatched_lanes: int
    max_raw_diff: int

    @property
    def equivalent(self) -> bool:
        return self.mismatched_lanes == 0

    def to_dict(self) -> dict:
        return {**asdict(self), "equivalent": self.equivalent}


def compare_dual_mode(n: int, vectors: int, seed: int = DEFAULT_SEED,
                      cfg: UnitConfig | None = None) -> DualModeReport:
    """Pair mode at width ``n`` against independent width-2 normal-mode runs."""
    cfg = (cfg or UnitConfig(n=n)).with_(n=n)
    x = random_inputs(n, vectors, seed, cfg)
    paired = softmax_raw(x, cfg, Mode.GELU_PAIRS)
    single = softmax_raw(x.reshape(-1, 2), cfg.with_(n=2), Mode.NORMAL).reshape(vectors, n)
    diff = np.abs(paired - single)
    return DualModeReport(n, vectors, seed, int(np.count_nonzero(diff)), int(diff.max()))
