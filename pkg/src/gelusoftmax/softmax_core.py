"""Dual-mode log-domain softmax datapath.

Normal mode computes one softmax over all ``n`` lanes.  Pair mode computes
``n/2`` independent two-element softmaxes on lanes ``(2j, 2j+1)``.  Both
modes run through the same comparison tree and adder tree; the mode only
selects which tree level feeds the rest of the pipeline.

The batch kernel :func:`softmax_raw` works on int64 arrays of shape
``(batch, n)``.  The :class:`FxWord` entry points call it with a batch of one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .approx_units import exp2_raw, log2_raw, scale_log2e_raw
from .fixed_point import (
    FxWord,
    QFormat,
    Q5_10,
    Q_DIFF,
    Q_SUM,
    RoundingMode,
    UQ0_16,
    saturate_raw,
)
from .pwl import PwlTable, make_table


class Mode(str, enum.Enum):
    NORMAL = "normal"
    GELU_PAIRS = "gelu_pairs"


@lru_cache(maxsize=None)
def default_table(function: str) -> PwlTable:
    return make_table(function)


@dataclass(frozen=True)
class UnitConfig:
    n: int = 8
    input_fmt: QFormat = Q5_10
    sum_fmt: QFormat = Q_SUM
    prob_fmt: QFormat = UQ0_16
    rounding: RoundingMode = RoundingMode.TRUNCATE
    exp_table: PwlTable = field(default_factory=lambda: default_table("exp2"))
    log_table: PwlTable = field(default_factory=lambda: default_table("log2p1"))

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        if self.prob_fmt.signed:
            raise ValueError("prob_fmt must be unsigned")
        # the exponent sum of n lanes must fit without saturating
        if self.n * self.prob_fmt.max_value > self.sum_fmt.max_value:
            raise ValueError("sum_fmt too narrow for n exponent lanes")

    def with_(self, **changes) -> "UnitConfig":
        return replace(self, **changes)


@dataclass
class SoftmaxTrace:
    """Per-stage intermediates of one softmax evaluation."""

    mode: Mode
    maxima: list[FxWord]
    max_index: list[int]
    differences: list[FxWord]
    scaled: list[FxWord]
    exponents: list[FxWord]
    sums: list[FxWord]
    logs: list[FxWord]
    final: list[FxWord]
    outputs: list[FxWord]
    saturated: bool = False

    STAGES = ("maxima", "differences", "scaled", "exponents", "sums", "logs", "final", "outputs")

    def to_dict(self) -> dict:
        d = {"mode": self.mode.value, "max_index": list(self.max_index)}
        for stage in self.STAGES:
            d[stage] = [w.raw for w in getattr(self, stage)]
        return d


# ---------------------------------------------------------------------------
# trees


def _tree_levels(a: np.ndarray, combine) -> list[np.ndarray]:
    """All levels of a binary reduction tree over the last axis, leaves first."""
    levels = [a]
    while levels[-1].shape[-1] > 1:
        cur = levels[-1]
        levels.append(combine(cur[..., 0::2], cur[..., 1::2]))
    return levels


def _tap(levels: list, mode: Mode):
    return levels[-1] if mode is Mode.NORMAL else levels[1]


def _max_with_index(x: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    idx = np.broadcast_to(np.arange(x.shape[-1]), x.shape)
    levels = [(x, idx)]
    while levels[-1][0].shape[-1] > 1:
        v, i = levels[-1]
        lv, rv, li, ri = v[..., 0::2], v[..., 1::2], i[..., 0::2], i[..., 1::2]
        take_left = lv >= rv  # ties keep the lower index
        levels.append((np.where(take_left, lv, rv), np.where(take_left, li, ri)))
    return levels


def max_tree_raw(x: np.ndarray, mode: Mode) -> tuple[np.ndarray, np.ndarray]:
    """Maxima and their (lowest) lane indices; 1 per vector or 1 per pair."""
    return _tap(_max_with_index(x), mode)


def adder_tree_raw(e: np.ndarray, mode: Mode) -> np.ndarray:
    return _tap(_tree_levels(e, np.add), mode)


def max_tree(x: list[FxWord], mode: Mode) -> list[FxWord]:
    _check_width(len(x))
    fmt = x[0].fmt
    m, _ = max_tree_raw(np.array([w.raw for w in x], dtype=np.int64), mode)
    return [FxWord(int(r), fmt) for r in m]


def adder_tree(e: list[FxWord], mode: Mode, out_fmt: QFormat = Q_SUM) -> list[FxWord]:
    _check_width(len(e))
    shift = out_fmt.frac_bits - e[0].fmt.frac_bits
    if shift < 0:
        raise ValueError("adder tree output must not drop fraction bits")
    raw = np.array([w.raw for w in e], dtype=np.int64) << shift
    sums, flag = saturate_raw(adder_tree_raw(raw, mode), out_fmt)
    return [FxWord(int(r), out_fmt, flag) for r in sums]


def _check_width(n: int):
    if n < 2 or n & (n - 1):
        raise ValueError(f"vector width must be a power of two >= 2, got {n}")


# ---------------------------------------------------------------------------
# datapath


def softmax_raw(x: np.ndarray, cfg: UnitConfig, mode: Mode = Mode.NORMAL,
                trace: bool = False):
    """Run the datapath on raw ``input_fmt`` codes of shape ``(batch, n)``.

    Returns raw ``prob_fmt`` outputs, plus a dict of raw stage arrays when
    ``trace`` is set.
    """
    x = np.asarray(x, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] != cfg.n:
        raise ValueError(f"expected shape (batch, {cfg.n}), got {x.shape}")
    if np.any(x < cfg.input_fmt.min_raw) or np.any(x > cfg.input_fmt.max_raw):
        raise ValueError(f"inputs out of range for {cfg.input_fmt}")
    group = cfg.n if mode is Mode.NORMAL else 2
    in_frac = cfg.input_fmt.frac_bits
    sum_frac = cfg.sum_fmt.frac_bits
    sat = False

    maxima, max_index = max_tree_raw(x, mode)
    diff, f = saturate_raw(x - np.repeat(maxima, group, axis=1), Q_DIFF)
    sat |= f
    scaled, f = scale_log2e_raw(diff, in_frac, cfg.sum_fmt, cfg.rounding)
    sat |= f
    expo, f = exp2_raw(scaled, sum_frac, cfg.exp_table, cfg.prob_fmt)
    sat |= f

    sums, f = saturate_raw(
        adder_tree_raw(expo << (sum_frac - cfg.prob_fmt.frac_bits), mode), cfg.sum_fmt)
    sat |= f
    logs, f = log2_raw(sums, sum_frac, cfg.log_table, cfg.sum_fmt, cfg.rounding)
    sat |= f

    final = scaled - np.repeat(logs, group, axis=1)
    # a log slightly below zero (sum just under 1.0) would push the dominant
    # lane above zero; the exponent unit only accepts t <= 0
    final = np.minimum(final, 0)
    out, f = exp2_raw(final, sum_frac, cfg.exp_table, cfg.prob_fmt)
    sat |= f

    if not trace:
        return out
    stages = {
        "maxima": maxima, "max_index": max_index, "differences": diff,
        "scaled": scaled, "exponents": expo, "sums": sums, "logs": logs,
        "final": final, "outputs": out, "saturated": sat,
    }
    return out, stages


_STAGE_FMT = {
    "differences": lambda cfg: Q_DIFF,
    "scaled": lambda cfg: cfg.sum_fmt,
    "exponents": lambda cfg: cfg.prob_fmt,
    "sums": lambda cfg: cfg.sum_fmt,
    "logs": lambda cfg: cfg.sum_fmt,
    "final": lambda cfg: cfg.sum_fmt,
    "outputs": lambda cfg: cfg.prob_fmt,
    "maxima": lambda cfg: cfg.input_fmt,
}


def softmax_forward(x: list[FxWord], cfg: UnitConfig, mode: Mode = Mode.NORMAL
                    ) -> tuple[list[FxWord], SoftmaxTrace]:
    if len(x) != cfg.n:
        raise ValueError(f"expected {cfg.n} lanes, got {len(x)}")
    if any(w.fmt != cfg.input_fmt for w in x):
        raise ValueError(f"inputs must be in {cfg.input_fmt}")
    raw = np.array([[w.raw for w in x]], dtype=np.int64)
    _, stages = softmax_raw(raw, cfg, mode, trace=True)
    words = {
        name: [FxWord(int(r), make(cfg)) for r in stages[name][0]]
        for name, make in _STAGE_FMT.items()
    }
    tr = SoftmaxTrace(mode=mode, max_index=[int(i) for i in stages["max_index"][0]],
                      saturated=bool(stages["saturated"]), **words)
    return tr.outputs, tr
