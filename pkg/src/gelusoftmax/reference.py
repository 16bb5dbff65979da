"""Double-precision reference models."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
GELU_CUBIC = 0.044715


def ref_softmax(x) -> np.ndarray:
    """Max-subtracted softmax over the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0 or x.shape[-1] == 0:
        raise ValueError("softmax of an empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax input must be finite")
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def ref_gelu_erf(z):
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * z * (1.0 + erf(z / math.sqrt(2.0)))


def gelu_k(z):
    z = np.asarray(z, dtype=np.float64)
    return SQRT_2_OVER_PI * (z + GELU_CUBIC * z**3)


def ref_gelu_tanh(z):
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * z * (1.0 + np.tanh(gelu_k(z)))


def ref_gelu_via_softmax(z):
    """``z * softmax([k, -k])[0]``, i.e. the tanh form with tanh rewritten in exponentials."""
    z = np.asarray(z, dtype=np.float64)
    k = gelu_k(z)
    pair = np.stack([k, -k], axis=-1)
    return z * ref_softmax(pair)[..., 0]


REFERENCES = {
    "tanh": ref_gelu_tanh,
    "erf": ref_gelu_erf,
    "softmax": ref_gelu_via_softmax,
}
