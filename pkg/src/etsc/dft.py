"""Arbitrary-length unitary DFT.

Power-of-two sizes use an iterative radix-2 transform; every other size goes
through Bluestein's chirp-z algorithm on top of a power-of-two plan. Both
directions carry the unitary ``1/sqrt(n)`` scale:

    forward(v)[k] = n**-0.5 * sum_j v[j] * exp(-2j*pi*j*k/n)
    inverse(v)[j] = n**-0.5 * sum_k v[k] * exp(+2j*pi*j*k/n)

All transforms act on the last axis, so a ``(channels, n)`` array is
transformed row by row.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

RADIX2 = "radix2"
BLUESTEIN = "bluestein"


class InvalidSizeError(ValueError):
    pass


class ShapeError(ValueError):
    pass


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@dataclass(frozen=True, eq=False)
class DftPlan:
    """Precomputed transform of one fixed size.

    Plans are immutable; share them freely between threads.
    """

    size: int
    strategy: str
    twiddles: np.ndarray
    # radix-2 only
    permutation: Optional[np.ndarray] = field(default=None, repr=False)
    # bluestein only
    inner: Optional["DftPlan"] = field(default=None, repr=False)
    chirp: Optional[np.ndarray] = field(default=None, repr=False)
    chirp_spectrum: Optional[np.ndarray] = field(default=None, repr=False)

    def forward(self, v) -> np.ndarray:
        return forward(self, v)

    def inverse(self, v) -> np.ndarray:
        return inverse(self, v)


def plan(n: int) -> DftPlan:
    """Build (or fetch the cached) plan for transforms of length ``n``."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidSizeError(f"DFT size must be a positive integer, got {n!r}")
    return _plan_cached(int(n))


@lru_cache(maxsize=128)
def _plan_cached(n: int) -> DftPlan:
    if is_power_of_two(n):
        # angle formula per index; no recurrence
        k = np.arange(max(n // 2, 1))
        tw = np.exp(-2j * np.pi * k / n)
        tw.flags.writeable = False
        perm = _bit_reversal(n)
        perm.flags.writeable = False
        return DftPlan(size=n, strategy=RADIX2, twiddles=tw, permutation=perm)

    m = next_power_of_two(2 * n - 1)
    inner = _plan_cached(m)
    j = np.arange(n, dtype=np.int64)
    # j^2 mod 2n keeps the chirp angle small and exact for large j
    chirp = np.exp(-1j * np.pi * ((j * j) % (2 * n)) / n)
    filt = np.zeros(m, dtype=complex)
    filt[:n] = np.conj(chirp)
    filt[m - n + 1:] = np.conj(chirp[1:])[::-1]
    spectrum = _raw_fft(inner, filt)
    for arr in (chirp, spectrum):
        arr.flags.writeable = False
    return DftPlan(
        size=n,
        strategy=BLUESTEIN,
        twiddles=chirp,
        inner=inner,
        chirp=chirp,
        chirp_spectrum=spectrum,
    )


def _radix2(p: DftPlan, x: np.ndarray) -> np.ndarray:
    n = p.size
    x = np.asarray(x, dtype=complex)[..., p.permutation]
    lead = x.shape[:-1]
    half = 1
    while half < n:
        blocks = x.reshape(lead + (n // (2 * half), 2, half))
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * p.twiddles[:: n // (2 * half)]
        x = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (n,))
        half *= 2
    return x


def _raw_fft(p: DftPlan, x: np.ndarray) -> np.ndarray:
    """Unnormalized forward transform (negative exponent)."""
    if p.strategy == RADIX2:
        return _radix2(p, x)
    n, inner = p.size, p.inner
    buf = np.zeros(x.shape[:-1] + (inner.size,), dtype=complex)
    buf[..., :n] = x * p.chirp
    conv = np.conj(_radix2(inner, np.conj(_radix2(inner, buf) * p.chirp_spectrum)))
    return conv[..., :n] * (p.chirp / inner.size)


def _check(p: DftPlan, v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim == 0 or v.shape[-1] != p.size:
        raise ShapeError(
            f"plan of size {p.size} cannot transform array of shape {v.shape}"
        )
    return v


def forward(p: DftPlan, v) -> np.ndarray:
    v = _check(p, v)
    return _raw_fft(p, v) / np.sqrt(p.size)


def inverse(p: DftPlan, v) -> np.ndarray:
    v = _check(p, v)
    return np.conj(_raw_fft(p, np.conj(v))) / np.sqrt(p.size)


def dft(v) -> np.ndarray:
    """Unitary forward transform along the last axis, planning on the fly."""
    v = np.asarray(v, dtype=complex)
    return forward(plan(v.shape[-1]), v)


def idft(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return inverse(plan(v.shape[-1]), v)
