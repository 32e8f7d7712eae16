"""Small numeric and validation helpers used across modules."""

from __future__ import annotations

import hashlib

import numpy as np


def sigmoid(x):
    """Numerically stable logistic function, elementwise.

    Safe for |x| up to at least 1e4: large negative inputs underflow to
    exactly 0.0 and large positive inputs saturate to 1.0, never NaN.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def rng_from_seed(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the single PRNG used everywhere.

    PCG64 output is specified independently of platform and numpy build,
    which is what makes splits and training shuffles reproducible
    bit-for-bit.
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def half_up(x: float) -> int:
    """Round half away from zero ties upward: half_up(2.5) == 3.

    Python's builtin round() uses banker's rounding and would disagree on
    exact halves.
    """
    import math

    return int(math.floor(x + 0.5))


def stable_seed(*parts) -> int:
    """Derive a reproducible 63-bit seed from heterogeneous parts.

    SHA-256 over a canonical string rendering (floats via repr), first 8
    bytes little-endian, top bit cleared. Unlike hash(), stable across
    processes, platforms, and interpreter runs.
    """
    text = "\x1f".join(_canon(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def _canon(part) -> str:
    if isinstance(part, float):
        return repr(part)
    if isinstance(part, (int, np.integer)):
        return str(int(part))
    return str(part)


def max_relative_error(analytic, numeric, floor: float = 1e-3) -> float:
    """Worst-case guarded relative error between two gradient vectors.

    The denominator is floored so finite-difference roundoff (~1e-9 at
    h=1e-5 on float64 losses) cannot inflate the error on coordinates whose
    true gradient is near zero; genuine gradient bugs show up at the scale
    of the coordinates themselves and are not masked by the floor.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.shape != n.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {n.shape}")
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


class AdamState:
    """Adam optimizer state for one parameter array."""

    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, epsilon

    def step(self, theta: np.ndarray, g: np.ndarray) -> None:
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * g
        self.v = self.b2 * self.v + (1.0 - self.b2) * g * g
        m_hat = self.m / (1.0 - self.b1**self.t)
        v_hat = self.v / (1.0 - self.b2**self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def check_fraction(name: str, value: float, *, inclusive_top: bool = True) -> float:
    value = float(value)
    top_ok = value <= 1.0 if inclusive_top else value < 1.0
    if not (0.0 <= value and top_ok):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_positive_int(name: str, value) -> int:
    ivalue = int(value)
    if ivalue <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return ivalue


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr
