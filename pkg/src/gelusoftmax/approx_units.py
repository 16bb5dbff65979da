"""Scalar function units: base-2 exponent, forward log2 converter, log2(e) scaling.

Each unit has a ``*_raw`` form over int64 arrays (used by the vector
datapath) and an :class:`FxWord` wrapper.  The wrappers call the raw form,
so both are bit-identical by construction.
"""

from __future__ import annotations

import math

import numpy as np

from .fixed_point import (
    FxWord,
    QFormat,
    Q_CONST,
    Q_SUM,
    RoundingMode,
    UQ0_16,
    convert_raw,
    quantize,
    saturate_raw,
    shift_round_raw,
)
from .pwl import PwlTable, eval_pwl_raw

LOG2E = quantize(1.0 / math.log(2.0), Q_CONST, RoundingMode.NEAREST_EVEN)

# The exponent and log units take their fractional operand as UQ0.16.
_V_FRAC = UQ0_16.frac_bits


def scale_log2e_raw(x_raw, x_frac: int, out_fmt: QFormat = Q_SUM,
                    mode: RoundingMode = RoundingMode.TRUNCATE):
    return convert_raw(x_raw * LOG2E.raw, x_frac + LOG2E.fmt.frac_bits, out_fmt, mode)


def scale_log2e(x: FxWord, out_fmt: QFormat = Q_SUM,
                mode: RoundingMode = RoundingMode.TRUNCATE) -> FxWord:
    raw, flag = scale_log2e_raw(x.raw, x.fmt.frac_bits, out_fmt, mode)
    return FxWord(raw, out_fmt, flag)


def exp2_raw(t_raw, t_frac: int, table: PwlTable, out_fmt: QFormat = UQ0_16):
    """``2**t`` for ``t <= 0`` as ``2**u * 2**v`` with ``u = floor(t)``.

    ``2**v`` comes from the PWL table; ``2**u`` is an arithmetic right shift
    of the PWL accumulator, so deep negative ``u`` underflows to zero.
    Returns ``(raw, saturated)`` in ``out_fmt``.
    """
    if np.any(t_raw > 0):
        raise ValueError("exp2 unit expects non-positive input")
    u = t_raw >> t_frac
    v = t_raw & ((1 << t_frac) - 1)
    v = shift_round_raw(v, t_frac - _V_FRAC, RoundingMode.TRUNCATE)
    acc = eval_pwl_raw(table, v, _V_FRAC)
    acc_frac = table.slope_fmt.frac_bits + _V_FRAC
    # u <= 0; clamp the shift so huge shifts stay defined (result is 0 or -1 -> 0)
    shift = np.minimum(-u, 62) if isinstance(u, np.ndarray) else min(-u, 62)
    shifted = acc >> shift
    return convert_raw(shifted, acc_frac, out_fmt, RoundingMode.TRUNCATE)


def exp2_unit(t: FxWord, table: PwlTable, out_fmt: QFormat = UQ0_16) -> FxWord:
    if t.raw > 0:
        raise ValueError(f"exp2 unit expects t <= 0, got {t!r}")
    raw, flag = exp2_raw(t.raw, t.fmt.frac_bits, table, out_fmt)
    return FxWord(int(raw), out_fmt, flag)


def leading_one(raw):
    """Bit position of the most significant set bit (``raw > 0``)."""
    if isinstance(raw, np.ndarray):
        # frexp is exact for |raw| < 2**53
        if np.any(raw >= (1 << 53)):
            raise ValueError("leading_one supports values below 2**53")
        _, e = np.frexp(raw.astype(np.float64))
        return e.astype(np.int64) - 1
    return int(raw).bit_length() - 1


def log2_raw(s_raw, s_frac: int, table: PwlTable, out_fmt: QFormat = Q_SUM,
             mode: RoundingMode = RoundingMode.TRUNCATE):
    """Forward log2 converter: leading-one detection plus a PWL on the mantissa.

    ``s = 2**w * (1 + m)``; ``w`` is exact and ``log2(1 + m)`` comes from the
    table.  Mantissa bits below UQ0.16 are truncated.
    """
    if np.any(s_raw <= 0):
        raise ValueError("log2 unit expects a strictly positive input")
    p = leading_one(s_raw)
    mant = s_raw - (np.int64(1) << p if isinstance(p, np.ndarray) else 1 << p)
    if isinstance(p, np.ndarray):
        d = p - _V_FRAC
        m = np.where(d >= 0, mant >> np.maximum(d, 0), mant << np.maximum(-d, 0))
    else:
        d = p - _V_FRAC
        m = mant >> d if d >= 0 else mant << -d
    acc = eval_pwl_raw(table, m, _V_FRAC)
    acc_frac = table.slope_fmt.frac_bits + _V_FRAC
    w = p - s_frac
    frac_part = shift_round_raw(acc, acc_frac - out_fmt.frac_bits, mode)
    return saturate_raw((w << out_fmt.frac_bits) + frac_part, out_fmt)


def log2_unit(s: FxWord, table: PwlTable, out_fmt: QFormat = Q_SUM,
              mode: RoundingMode = RoundingMode.TRUNCATE) -> FxWord:
    if s.raw <= 0:
        raise ValueError(f"log2 unit expects s > 0, got {s!r}")
    raw, flag = log2_raw(s.raw, s.fmt.frac_bits, table, out_fmt, mode)
    return FxWord(int(raw), out_fmt, flag)
