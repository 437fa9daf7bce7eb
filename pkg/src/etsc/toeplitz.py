"""Causal Toeplitz kernels and their application to signals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dft

ZEROS = "zeros"
DECAY = "decay"


class ZeroNormError(ValueError):
    """Relative error is undefined for an all-zero reference."""


@dataclass(frozen=True, eq=False)
class ToeplitzKernel:
    """Coefficients ``t_0..t_{n-1}`` of ``y_i = sum_j t_{i-j} x_j``.

    ``extension`` decides what ``t_i`` means for ``i >= n``: zero, or
    ``t_{n-1} * gamma**(i-n+1)`` under ``"decay"``.
    """

    coeffs: np.ndarray
    extension: str = ZEROS
    gamma: float = 1.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size < 1:
            raise ValueError("kernel needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("kernel coefficients must be finite")
        if self.extension not in (ZEROS, DECAY):
            raise ValueError(f"unknown extension policy {self.extension!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"decay gamma must lie in (0, 1], got {self.gamma}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size

    def materialize(self, length: int) -> np.ndarray:
        """Coefficients ``t_0..t_{length-1}`` with the extension applied."""
        out = np.zeros(length)
        k = min(length, self.n)
        out[:k] = self.coeffs[:k]
        if length > self.n and self.extension == DECAY:
            steps = np.arange(1, length - self.n + 1)
            out[self.n:] = self.coeffs[-1] * self.gamma ** steps
        return out


def extended_coeff(k: ToeplitzKernel, i: int) -> float:
    if i < 0:
        raise ValueError("coefficient index must be nonnegative")
    if i < k.n:
        return float(k.coeffs[i])
    if k.extension == ZEROS:
        return 0.0
    return float(k.coeffs[-1] * k.gamma ** (i - k.n + 1))


def apply_naive(k: ToeplitzKernel, x) -> np.ndarray:
    """Direct O(m^2) causal sum."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    t = k.materialize(m)
    y = np.zeros(m)
    for i in range(m):
        y[i] = np.dot(t[i::-1], x[: i + 1])
    return y


def causal_conv_fft(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """First ``m`` outputs of the linear convolution of ``t`` and ``x``.

    Both arrays carry the signal on the last axis (leading axes broadcast)
    and must have the same length ``m``.
    """
    m = x.shape[-1]
    size = dft.next_power_of_two(2 * m - 1)
    p = dft.plan(size)
    pad = [(0, 0)] * (x.ndim - 1) + [(0, size - m)]
    tpad = [(0, 0)] * (t.ndim - 1) + [(0, size - m)]
    spec = dft.forward(p, np.pad(t, tpad)) * dft.forward(p, np.pad(x, pad))
    return (dft.inverse(p, spec)[..., :m] * np.sqrt(size)).real


def apply_fft(k: ToeplitzKernel, x) -> np.ndarray:
    """Same contract as :func:`apply_naive`, in O(m log m)."""
    x = np.asarray(x, dtype=float)
    return causal_conv_fft(k.materialize(x.shape[-1]), x)


def relative_error(t, t_pred) -> float:
    """``||t - t_pred|| / ||t||`` with complex predictions compared in full."""
    t = np.asarray(t, dtype=float)
    t_pred = np.asarray(t_pred)
    if t.shape != t_pred.shape:
        raise ValueError(f"shape mismatch {t.shape} vs {t_pred.shape}")
    denom = np.linalg.norm(t)
    if denom == 0:
        raise ZeroNormError("reference sequence has zero norm")
    return float(np.linalg.norm(t - t_pred) / denom)


def reconstruction_error(t, t_pred) -> tuple[float, bool]:
    """Relative error, falling back to absolute error for a zero reference.

    Returns ``(value, is_absolute)``.
    """
    try:
        return relative_error(t, t_pred), False
    except ZeroNormError:
        return float(np.linalg.norm(np.asarray(t_pred))), True
