"""GELU evaluated on the dual-mode softmax datapath.

For each input ``z`` the unit computes ``k = sqrt(2/pi) * (z + 0.044715 z**3)``,
feeds the pair ``[k, -k]`` to the softmax in pair mode and multiplies ``z``
by the first lane of the pair.  One invocation handles ``n/2`` inputs.

Lane mapping: input ``j`` drives softmax lanes ``2j`` (``k_j``) and
``2j + 1`` (``-k_j``); lane ``2j + 1`` of the output is discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .fixed_point import (
    FxWord,
    Q_CONST,
    Q_CUBE,
    Q_SUM,
    RoundingMode,
    convert_raw,
    quantize,
    quantize_array,
)
from .softmax_core import Mode, UnitConfig, softmax_raw

C_CUBIC = quantize(0.044715, Q_CONST, RoundingMode.NEAREST_EVEN)
C_SQRT = quantize(math.sqrt(2.0 / math.pi), Q_CONST, RoundingMode.NEAREST_EVEN)


@dataclass(frozen=True)
class KPair:
    k: FxWord
    neg_k: FxWord


def compute_k_raw(z: np.ndarray, cfg: UnitConfig) -> np.ndarray:
    """Raw ``k`` in ``cfg.input_fmt``, clamped to the symmetric range ``±max``."""
    zf = cfg.input_fmt.frac_bits
    mode = cfg.rounding
    z = np.asarray(z, dtype=np.int64)
    cube_exact = z * z * z  # 3*zf fraction bits, |z**3| < 2**45 for 16-bit z
    cube, _ = convert_raw(cube_exact, 3 * zf, Q_CUBE, mode)
    cubic, _ = convert_raw(C_CUBIC.raw * cube, Q_CONST.frac_bits + Q_CUBE.frac_bits, Q_SUM, mode)
    inner = (z << (Q_SUM.frac_bits - zf)) + cubic
    k, _ = convert_raw(C_SQRT.raw * inner, Q_CONST.frac_bits + Q_SUM.frac_bits,
                       cfg.input_fmt, mode)
    top = cfg.input_fmt.max_raw
    # drop the most negative code so -k is always representable
    return np.clip(k, -top, top)


def compute_k(z: FxWord, cfg: UnitConfig | None = None) -> KPair:
    cfg = cfg or UnitConfig(n=2)
    if z.fmt != cfg.input_fmt:
        raise ValueError(f"z must be in {cfg.input_fmt}")
    k = int(compute_k_raw(np.array([z.raw]), cfg)[0])
    sat = abs(k) == cfg.input_fmt.max_raw
    return KPair(FxWord(k, z.fmt, sat), FxWord(-k, z.fmt, sat))


def gelu_raw(z: np.ndarray, cfg: UnitConfig, with_pairs: bool = False):
    """Raw GELU outputs for raw inputs of shape ``(batch, n/2)``.

    With ``with_pairs`` also returns the full pair-mode softmax output so
    callers can inspect the discarded lanes.
    """
    z = np.asarray(z, dtype=np.int64)
    half = cfg.n // 2
    if z.ndim != 2 or z.shape[1] != half:
        raise ValueError(f"expected shape (batch, {half}), got {z.shape}")
    k = compute_k_raw(z, cfg)
    lanes = np.empty((z.shape[0], cfg.n), dtype=np.int64)
    lanes[:, 0::2] = k
    lanes[:, 1::2] = -k
    probs = softmax_raw(lanes, cfg, Mode.GELU_PAIRS)
    first = probs[:, 0::2]
    out, _ = convert_raw(z * first, cfg.input_fmt.frac_bits + cfg.prob_fmt.frac_bits,
                         cfg.input_fmt, cfg.rounding)
    return (out, probs) if with_pairs else out


def gelu_forward(z: Sequence[FxWord], cfg: UnitConfig) -> list[FxWord]:
    if len(z) != cfg.n // 2:
        raise ValueError(f"expected {cfg.n // 2} inputs, got {len(z)}")
    if any(w.fmt != cfg.input_fmt for w in z):
        raise ValueError(f"inputs must be in {cfg.input_fmt}")
    out = gelu_raw(np.array([[w.raw for w in z]], dtype=np.int64), cfg)
    return [FxWord(int(r), cfg.input_fmt) for r in out[0]]


def gelu_codes(z: np.ndarray, cfg: UnitConfig) -> np.ndarray:
    """GELU of a flat array of raw input codes, packed ``n/2`` per invocation."""
    z = np.asarray(z, dtype=np.int64).ravel()
    half = cfg.n // 2
    rows = -(-z.size // half)
    padded = np.zeros(rows * half, dtype=np.int64)
    padded[: z.size] = z
    return gelu_raw(padded.reshape(rows, half), cfg).ravel()[: z.size]


def gelu_values(z, cfg: UnitConfig) -> np.ndarray:
    """Quantize real inputs, run the unit, and return real outputs."""
    codes = quantize_array(z, cfg.input_fmt, cfg.rounding)
    return np.ldexp(gelu_codes(codes, cfg).astype(np.float64), -cfg.input_fmt.frac_bits)


def gelu_batch(stream: Iterable[Sequence[FxWord]], cfg: UnitConfig) -> Iterator[list[FxWord]]:
    """Evaluate each vector (up to ``n/2`` inputs, zero-padded) in order."""
    half = cfg.n // 2
    zero = FxWord(0, cfg.input_fmt)
    for vec in stream:
        vec = list(vec)
        if len(vec) > half:
            raise ValueError(f"vector of {len(vec)} inputs exceeds n/2 = {half}")
        out = gelu_forward(vec + [zero] * (half - len(vec)), cfg)
        yield out[: len(vec)]
