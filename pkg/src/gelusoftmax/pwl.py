"""Piecewise-linear approximants on uniform power-of-two breakpoints.

Fitting is a continuous least-squares fit: the unknowns are the function
values at the breakpoints (a hat-function basis), so adjacent segments
always meet.  Quantized tables are evaluated with integer arithmetic only;
the segment index is the top ``log2(segments)`` bits of the fractional input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .fixed_point import FxWord, QFormat, Q_COEF, RoundingMode, UQ0_16, quantize

FIT_SAMPLES = 1 << 12
VERIFY_SAMPLES = 1 << 16

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp2": np.exp2,
    "log2p1": lambda m: np.log2(1.0 + m),
    "identity": lambda v: np.asarray(v, dtype=np.float64),
}


@dataclass(frozen=True)
class PwlTableReal:
    domain_lo: float
    domain_hi: float
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]
    max_error: float = math.nan  # measured on the verification grid

    @property
    def segments(self) -> int:
        return len(self.slopes)

    def __call__(self, v):
        v = np.asarray(v, dtype=np.float64)
        h = (self.domain_hi - self.domain_lo) / self.segments
        idx = np.clip(np.floor((v - self.domain_lo) / h).astype(int), 0, self.segments - 1)
        return np.asarray(self.slopes)[idx] * v + np.asarray(self.intercepts)[idx]


@dataclass(frozen=True)
class PwlTable:
    """Quantized coefficients for a PWL approximant on ``[0, 1)``."""

    function: str
    domain: tuple[float, float]
    slopes: tuple[FxWord, ...]
    intercepts: tuple[FxWord, ...]
    slope_fmt: QFormat = Q_COEF
    intercept_fmt: QFormat = Q_COEF
    index_shift: int = field(init=False)

    def __post_init__(self):
        n = len(self.slopes)
        if n != len(self.intercepts) or n < 1 or n & (n - 1):
            raise ValueError("segment count must be a power of two with matching intercepts")
        object.__setattr__(self, "index_shift", n.bit_length() - 1)

    @property
    def segments(self) -> int:
        return len(self.slopes)

    @property
    def slopes_raw(self) -> np.ndarray:
        return np.array([w.raw for w in self.slopes], dtype=np.int64)

    @property
    def intercepts_raw(self) -> np.ndarray:
        return np.array([w.raw for w in self.intercepts], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "domain": list(self.domain),
            "segments": self.segments,
            "slope_fmt": self.slope_fmt.to_dict(),
            "intercept_fmt": self.intercept_fmt.to_dict(),
            "slopes_raw": [w.raw for w in self.slopes],
            "intercepts_raw": [w.raw for w in self.intercepts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PwlTable":
        sf = QFormat.from_dict(d["slope_fmt"])
        cf = QFormat.from_dict(d["intercept_fmt"])
        slopes = tuple(FxWord(int(r), sf) for r in d["slopes_raw"])
        intercepts = tuple(FxWord(int(r), cf) for r in d["intercepts_raw"])
        if len(slopes) != int(d["segments"]):
            raise ValueError("segments does not match the coefficient count")
        return cls(d["function"], tuple(d["domain"]), slopes, intercepts, sf, cf)


def dump_table(table: PwlTable, path) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2) + "\n")


def load_table(path) -> PwlTable:
    return PwlTable.from_dict(json.loads(Path(path).read_text()))


def _grid(lo: float, hi: float, count: int) -> np.ndarray:
    return lo + (hi - lo) * np.arange(count, dtype=np.float64) / count


def fit_pwl(f, segments: int, domain=(0.0, 1.0), samples: int = FIT_SAMPLES,
            wrap: tuple[float, float] | None = None) -> PwlTableReal:
    """Continuous least-squares PWL fit of ``f`` on uniform breakpoints.

    ``wrap=(a, b)`` additionally ties the end values together as
    ``p(hi) = a * p(lo) + b``.  For ``2**v`` on ``[0, 1)`` with ``(2, 0)``
    this makes ``2**u * p(v)`` continuous across integer ``u``.
    """
    if segments < 1 or segments & (segments - 1):
        raise ValueError(f"segments must be a power of two, got {segments}")
    lo, hi = map(float, domain)
    if not lo < hi:
        raise ValueError("empty domain")
    if isinstance(f, str):
        f = FUNCTIONS[f]

    x = _grid(lo, hi, samples)
    y = np.asarray(f(x), dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("function is not finite on the fitting grid")

    knots = np.linspace(lo, hi, segments + 1)
    h = (hi - lo) / segments
    # hat basis: column j is 1 at knot j and falls linearly to 0 at its neighbours
    basis = np.clip(1.0 - np.abs(x[:, None] - knots[None, :]) / h, 0.0, None)
    if wrap is None:
        values, *_ = np.linalg.lstsq(basis, y, rcond=None)
    else:
        a, b = wrap
        # eliminate the last knot value: p_last = a * p_0 + b
        reduced = basis[:, :-1].copy()
        reduced[:, 0] += a * basis[:, -1]
        head, *_ = np.linalg.lstsq(reduced, y - b * basis[:, -1], rcond=None)
        values = np.append(head, a * head[0] + b)

    slopes = np.diff(values) / h
    intercepts = values[:-1] - slopes * knots[:-1]
    table = PwlTableReal(lo, hi, tuple(knots), tuple(slopes), tuple(intercepts))

    xv = _grid(lo, hi, VERIFY_SAMPLES)
    err = float(np.max(np.abs(table(xv) - f(xv))))
    return PwlTableReal(lo, hi, tuple(knots), tuple(slopes), tuple(intercepts), err)


def quantize_coeffs(
    t: PwlTableReal,
    function: str,
    slope_fmt: QFormat = Q_COEF,
    intercept_fmt: QFormat = Q_COEF,
    mode: RoundingMode = RoundingMode.NEAREST_EVEN,
    monotone: bool = True,
    in_frac: int = 16,
    wrap_ratio: int | None = None,
) -> PwlTable:
    if (t.domain_lo, t.domain_hi) != (0.0, 1.0):
        raise ValueError("quantized tables are indexed by fraction bits; domain must be [0, 1)")
    slopes = tuple(quantize(s, slope_fmt, mode) for s in t.slopes)
    intercepts = tuple(quantize(c, intercept_fmt, mode) for c in t.intercepts)
    if any(w.saturated for w in slopes + intercepts):
        raise ValueError("coefficient format too narrow: quantization saturated")
    if function == "exp2" and any(w.raw <= 0 for w in slopes):
        raise ValueError("exp2 table must have strictly positive slopes")
    if monotone and all(w.raw > 0 for w in slopes):
        intercepts = _repair_breakpoints(t.segments, slopes, intercepts, in_frac, wrap_ratio)
    return PwlTable(function, (0.0, 1.0), slopes, intercepts, slope_fmt, intercept_fmt)


def _repair_breakpoints(segments, slopes, intercepts, in_frac, wrap_ratio=None):
    """Raise intercepts just enough that no breakpoint steps downward.

    Rounding each coefficient on its own leaves small jumps at the
    breakpoints, which can exceed one input step of the line itself.  Each
    intercept is lifted to the smallest code that keeps the evaluated value
    strictly above the previous segment's value one input code earlier.
    With ``wrap_ratio`` the first intercept is also lifted until
    ``wrap_ratio * p(0) >= p(1 - lsb)``, the condition for ``2**u * p(v)``
    to stay monotone when ``u`` steps.
    """
    fixed = [w.raw for w in intercepts]
    s = [w.raw for w in slopes]
    fmt = intercepts[0].fmt
    align = slopes[0].fmt.frac_bits + in_frac - fmt.frac_bits
    top = 1 << in_frac
    for _ in range(64):
        for i in range(1, segments):
            b = i * top // segments
            left = s[i - 1] * (b - 1) + (fixed[i - 1] << align)
            # need s_i * b + (c << align) > left
            need = ((left - s[i] * b) >> align) + 1
            fixed[i] = max(fixed[i], need)
        if wrap_ratio is None:
            break
        last = s[-1] * (top - 1) + (fixed[-1] << align)
        deficit = last - wrap_ratio * (fixed[0] << align)
        if deficit <= 0:
            break
        fixed[0] += -(-deficit // (wrap_ratio << align))
    else:
        raise ValueError("could not make the quantized table monotone")
    if any(not fmt.min_raw <= c <= fmt.max_raw for c in fixed):
        raise ValueError("coefficient format too narrow for the monotone repair")
    return tuple(FxWord(c, fmt) for c in fixed)


def acc_format(table: PwlTable, in_fmt: QFormat = UQ0_16) -> QFormat:
    """Exact accumulator format of ``slope * v + intercept``."""
    return QFormat(32, table.slope_fmt.frac_bits + in_fmt.frac_bits, True)


def eval_pwl_raw(table: PwlTable, v_raw, in_frac: int = 16):
    """Evaluate on raw fractional codes; result has ``slope_frac + in_frac`` fraction bits.

    No rounding happens here: the product and the realigned intercept are
    both exact in the accumulator.
    """
    idx = v_raw >> (in_frac - table.index_shift)
    acc_frac = table.slope_fmt.frac_bits + in_frac
    align = acc_frac - table.intercept_fmt.frac_bits
    if isinstance(v_raw, np.ndarray):
        s = table.slopes_raw[idx]
        c = table.intercepts_raw[idx]
    else:
        s = table.slopes[idx].raw
        c = table.intercepts[idx].raw
    return s * v_raw + (c << align)


def eval_pwl(table: PwlTable, v: FxWord) -> FxWord:
    if v.fmt.signed and v.raw < 0 or v.raw >> v.fmt.frac_bits:
        raise ValueError(f"PWL input {v!r} outside [0, 1); reduce the range first")
    out = QFormat(32, table.slope_fmt.frac_bits + v.fmt.frac_bits, True)
    return FxWord(eval_pwl_raw(table, v.raw, v.fmt.frac_bits), out)


# end-value ties that keep the units continuous across octaves
WRAPS = {"exp2": (2.0, 0.0), "log2p1": (1.0, 1.0)}


def make_table(function: str, segments: int = 8,
               slope_fmt: QFormat = Q_COEF, intercept_fmt: QFormat = Q_COEF,
               mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> PwlTable:
    """Fit and quantize one of the datapath tables (``exp2`` or ``log2p1``)."""
    wrap = WRAPS.get(function)
    real = fit_pwl(FUNCTIONS[function], segments, wrap=wrap)
    ratio = 2 if function == "exp2" else None
    return quantize_coeffs(real, function, slope_fmt, intercept_fmt, mode, wrap_ratio=ratio)
