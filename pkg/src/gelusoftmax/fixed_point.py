"""Fixed-point words with explicit formats, rounding and saturation.

Scalar operations work on :class:`FxWord` values backed by Python ints, so
they never overflow internally.  The ``*_raw`` helpers accept either Python
ints or numpy ``int64`` arrays and are what the vectorised datapath uses;
both paths share the same rounding and saturation code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class RoundingMode(str, enum.Enum):
    TRUNCATE = "truncate"  # toward -inf, i.e. a plain arithmetic shift
    NEAREST_EVEN = "nearest_even"


@dataclass(frozen=True)
class QFormat:
    """Fixed-point format: ``word_bits`` total bits (sign included when signed)."""

    word_bits: int
    frac_bits: int
    signed: bool = True

    def __post_init__(self):
        if not 1 <= self.word_bits <= 64:
            raise ValueError(f"word_bits must be in [1, 64], got {self.word_bits}")
        # an unsigned word may be all fraction (UQ0.16); a signed one needs its sign bit
        limit = self.word_bits - (1 if self.signed else 0)
        if not 0 <= self.frac_bits <= limit:
            raise ValueError(
                f"frac_bits must be in [0, {limit}] for {self.word_bits}-bit "
                f"{'signed' if self.signed else 'unsigned'}, got {self.frac_bits}"
            )

    @property
    def int_bits(self) -> int:
        return self.word_bits - self.frac_bits - (1 if self.signed else 0)

    @property
    def min_raw(self) -> int:
        return -(1 << (self.word_bits - 1)) if self.signed else 0

    @property
    def max_raw(self) -> int:
        if self.signed:
            return (1 << (self.word_bits - 1)) - 1
        return (1 << self.word_bits) - 1

    @property
    def lsb(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return self.min_raw * self.lsb

    @property
    def max_value(self) -> float:
        return self.max_raw * self.lsb

    def __str__(self) -> str:
        prefix = "Q" if self.signed else "UQ"
        return f"{prefix}{self.int_bits}.{self.frac_bits}/{self.word_bits}b"

    def to_dict(self) -> dict:
        return {"word_bits": self.word_bits, "frac_bits": self.frac_bits, "signed": self.signed}

    @classmethod
    def from_dict(cls, d: dict) -> "QFormat":
        return cls(int(d["word_bits"]), int(d["frac_bits"]), bool(d["signed"]))


@dataclass(frozen=True)
class FxWord:
    """A raw two's-complement integer interpreted in ``fmt``.

    ``saturated`` is a diagnostic flag set by the operation that produced the
    word when its result had to be clamped.  It does not take part in
    equality, so words compare by value only.
    """

    raw: int
    fmt: QFormat
    saturated: bool = False

    def __post_init__(self):
        if not self.fmt.min_raw <= self.raw <= self.fmt.max_raw:
            raise ValueError(f"raw {self.raw} does not fit {self.fmt}")

    def __eq__(self, other):
        if not isinstance(other, FxWord):
            return NotImplemented
        return self.raw == other.raw and self.fmt == other.fmt

    def __hash__(self):
        return hash((self.raw, self.fmt))

    def __float__(self):
        return dequantize(self)

    def __repr__(self):
        return f"FxWord({self.raw}, {self.fmt}, ~{dequantize(self):.6g})"


# Formats used across the datapath.
Q5_10 = QFormat(16, 10, True)  # unit inputs, k, GELU outputs
UQ0_16 = QFormat(16, 16, False)  # exponent-unit outputs / probabilities
Q_SUM = QFormat(32, 16, True)  # sums, logarithms, scaled exponents
Q_DIFF = QFormat(32, 10, True)  # x - max before base conversion
Q_COEF = QFormat(16, 14, True)  # PWL slopes and intercepts
Q_CONST = QFormat(32, 30, True)  # log2(e), sqrt(2/pi), 0.044715
Q_CUBE = QFormat(32, 15, True)  # z**3 intermediate


# ---------------------------------------------------------------------------
# raw helpers (ints or int64 arrays)


def _is_array(x) -> bool:
    return isinstance(x, np.ndarray)


def saturate_raw(raw, fmt: QFormat):
    """Clamp ``raw`` to the range of ``fmt``; returns ``(value, flag)``."""
    lo, hi = fmt.min_raw, fmt.max_raw
    if _is_array(raw):
        flag = bool(np.any((raw < lo) | (raw > hi)))
        return np.clip(raw, lo, hi), flag
    if raw < lo:
        return lo, True
    if raw > hi:
        return hi, True
    return raw, False


def shift_round_raw(raw, shift: int, mode: RoundingMode):
    """Drop ``shift`` low bits of ``raw`` (``shift <= 0`` scales up exactly)."""
    if shift <= 0:
        return raw << -shift
    q = raw >> shift
    if mode is RoundingMode.TRUNCATE:
        return q
    rem = raw & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    up = (rem > half) | ((rem == half) & ((q & 1) == 1))
    if _is_array(raw):
        return q + up.astype(q.dtype)
    return q + int(up)


def convert_raw(raw, src_frac: int, fmt: QFormat, mode: RoundingMode):
    """Realign ``raw`` from ``src_frac`` fraction bits into ``fmt``."""
    return saturate_raw(shift_round_raw(raw, src_frac - fmt.frac_bits, mode), fmt)


# ---------------------------------------------------------------------------
# scalar operations


def quantize(x: float, fmt: QFormat, mode: RoundingMode = RoundingMode.TRUNCATE) -> FxWord:
    if math.isnan(x):
        raise ValueError("cannot quantize NaN")
    if math.isinf(x):
        raw = fmt.max_raw if x > 0 else fmt.min_raw
        return FxWord(raw, fmt, True)
    scaled = math.ldexp(x, fmt.frac_bits)  # exact unless it overflows to inf
    if math.isinf(scaled):
        raw = fmt.max_raw if x > 0 else fmt.min_raw
        return FxWord(raw, fmt, True)
    if mode is RoundingMode.TRUNCATE:
        r = math.floor(scaled)
    else:
        r = round(scaled)  # Python rounds half to even
    raw, flag = saturate_raw(int(r), fmt)
    return FxWord(raw, fmt, flag)


def quantize_array(x, fmt: QFormat, mode: RoundingMode = RoundingMode.TRUNCATE) -> np.ndarray:
    """Vector form of :func:`quantize`, returning raw int64 codes."""
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("cannot quantize NaN")
    scaled = np.ldexp(x, fmt.frac_bits)
    r = np.floor(scaled) if mode is RoundingMode.TRUNCATE else np.rint(scaled)
    r = np.clip(r, fmt.min_raw, fmt.max_raw)
    return r.astype(np.int64)


def dequantize(w: FxWord) -> float:
    return math.ldexp(w.raw, -w.fmt.frac_bits)


def convert(a: FxWord, fmt: QFormat, mode: RoundingMode = RoundingMode.TRUNCATE) -> FxWord:
    raw, flag = convert_raw(a.raw, a.fmt.frac_bits, fmt, mode)
    return FxWord(raw, fmt, flag)


def fx_add(a: FxWord, b: FxWord, out_fmt: QFormat | None = None,
           mode: RoundingMode = RoundingMode.TRUNCATE) -> FxWord:
    """Exact sum after aligning both operands to the finer fraction."""
    out_fmt = out_fmt or a.fmt
    frac = max(a.fmt.frac_bits, b.fmt.frac_bits)
    s = (a.raw << (frac - a.fmt.frac_bits)) + (b.raw << (frac - b.fmt.frac_bits))
    raw, flag = convert_raw(s, frac, out_fmt, mode)
    return FxWord(raw, out_fmt, flag)


def fx_sub(a: FxWord, b: FxWord, out_fmt: QFormat | None = None,
           mode: RoundingMode = RoundingMode.TRUNCATE) -> FxWord:
    neg_b = -b.raw
    frac = max(a.fmt.frac_bits, b.fmt.frac_bits)
    s = (a.raw << (frac - a.fmt.frac_bits)) + (neg_b << (frac - b.fmt.frac_bits))
    out_fmt = out_fmt or a.fmt
    raw, flag = convert_raw(s, frac, out_fmt, mode)
    return FxWord(raw, out_fmt, flag)


def fx_mul(a: FxWord, b: FxWord, out_fmt: QFormat,
           mode: RoundingMode = RoundingMode.TRUNCATE) -> FxWord:
    raw, flag = convert_raw(a.raw * b.raw, a.fmt.frac_bits + b.fmt.frac_bits, out_fmt, mode)
    return FxWord(raw, out_fmt, flag)


def fx_shift(a: FxWord, n: int) -> FxWord:
    """Multiply by ``2**n``: saturating left shift or flooring right shift."""
    if n >= 0:
        raw, flag = saturate_raw(a.raw << n, a.fmt)
        return FxWord(raw, a.fmt, flag)
    return FxWord(a.raw >> -n, a.fmt)


def fx_neg(a: FxWord) -> FxWord:
    raw, flag = saturate_raw(-a.raw, a.fmt)
    return FxWord(raw, a.fmt, flag)
