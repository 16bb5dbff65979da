"""Bit-accurate model of a combined GELU/softmax fixed-point function unit."""

from .fixed_point import FxWord, QFormat, RoundingMode, dequantize, quantize
from .gelu_unit import compute_k, gelu_forward, gelu_values
from .softmax_core import Mode, UnitConfig, softmax_forward, softmax_raw

__all__ = [
    "FxWord",
    "Mode",
    "QFormat",
    "RoundingMode",
    "UnitConfig",
    "compute_k",
    "dequantize",
    "gelu_forward",
    "gelu_values",
    "quantize",
    "softmax_forward",
    "softmax_raw",
]
