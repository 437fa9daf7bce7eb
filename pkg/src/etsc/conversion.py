"""Toeplitz kernel -> diagonal SSM conversion.

A kernel ``t_0..t_{n-1}`` is matched by modes ``(lambda_k, b_k)`` with

    t_i = sum_k b_k * lambda_k**i,   i = 0..n-1

(the output matrix C is all ones and never stored). The exact route appends
``-sum(t)`` to the kernel so that the length-(n+1) sequence has no DC
component, places the poles on the nontrivial (n+1)-th roots of unity and
reads the weights off a single DFT. The gradient route fits the same
equation by descent and exists as a baseline.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import dft
from .toeplitz import ToeplitzKernel

log = logging.getLogger(__name__)

# max entries of one power block (rows * modes); bounds reconstruct/gradient memory
_BLOCK_ENTRIES = 1 << 22
_RESCALE_LIMIT = 1e150


class DecayTooStrongError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at iteration {iteration}")
        self.iteration = iteration
        self.loss = loss


@dataclass(frozen=True, eq=False)
class SsmModes:
    lam: np.ndarray
    weights: np.ndarray
    gamma: float = 1.0
    origin_length: int = 0

    def __post_init__(self):
        lam = np.array(self.lam, dtype=complex).reshape(-1)
        b = np.array(self.weights, dtype=complex).reshape(-1)
        if lam.size < 1 or lam.shape != b.shape:
            raise ValueError(
                f"need matching nonempty pole/weight arrays, got {lam.shape} and {b.shape}"
            )
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(b))):
            raise ValueError("modes must be finite")
        lam.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "weights", b)

    @property
    def h(self) -> int:
        return self.lam.size


def _to_coeffs(k) -> np.ndarray:
    if isinstance(k, ToeplitzKernel):
        return k.coeffs
    return np.asarray(k, dtype=float).reshape(-1)


def augment(t) -> np.ndarray:
    """Append ``-sum(t)`` so the augmented sequence sums to zero."""
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size < 1:
        raise ValueError("kernel needs at least one coefficient")
    return np.append(t, -t.sum())


def root_of_unity_poles(n: int) -> np.ndarray:
    """``exp(-2*pi*i*(s+1)/(n+1))`` for ``s = 0..n-1``.

    Angles are taken from the symmetric index range so that the pole set is
    closed under conjugation bit for bit.
    """
    k = np.arange(1, n + 1)
    k = np.where(2 * k > n + 1, k - (n + 1), k)
    return np.exp(-2j * np.pi * k / (n + 1))


def augmented_spectrum(t) -> np.ndarray:
    """Size-(n+1) unitary inverse DFT of the augmented kernel.

    Bin 0 is the (vanishing) DC term; bins 1..n, divided by sqrt(n+1), are
    the mode weights.
    """
    return dft.idft(augment(t))


def etsc_convert(k) -> SsmModes:
    """Exact conversion with ``h = n`` modes on the roots of unity."""
    t = _to_coeffs(k)
    n = t.size
    if n < 1:
        raise dft.InvalidSizeError("cannot convert an empty kernel")
    spec = augmented_spectrum(t)
    weights = spec[1:] / np.sqrt(n + 1)
    return SsmModes(lam=root_of_unity_poles(n), weights=weights, gamma=1.0, origin_length=n)


def power_blocks(lam: np.ndarray, length: int, block: Optional[int] = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start, P)`` with ``P[r, k] = lam[k] ** (start + r)``.

    Powers are built by repeated multiplication (doubling inside the first
    block, then stepping whole blocks), never by re-exponentiation.
    """
    lam = np.asarray(lam, dtype=complex)
    h = lam.size
    if block is None:
        block = max(1, min(length, _BLOCK_ENTRIES // max(h, 1)))
    rows = min(block, length)
    base = np.empty((rows, h), dtype=complex)
    base[0] = 1.0
    filled, cur = 1, lam.copy()
    while filled < rows:
        k = min(filled, rows - filled)
        np.multiply(base[:k], cur, out=base[filled:filled + k])
        cur = cur * cur
        filled += k
    step = base[-1] * lam  # lam ** rows
    carry = np.ones(h, dtype=complex)
    start = 0
    while start < length:
        r = min(rows, length - start)
        yield start, base[:r] if start == 0 else base[:r] * carry
        carry = carry * step
        start += r


def reconstruct(m: SsmModes, length: int) -> np.ndarray:
    """Impulse response ``sum_k b_k lambda_k**i`` for ``i = 0..length-1``."""
    if length < 1:
        raise ValueError("length must be positive")
    out = np.empty(length, dtype=complex)
    for start, p in power_blocks(m.lam, length):
        out[start:start + p.shape[0]] = p @ m.weights
    return out


def conjugate_partners(lam: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Index of each pole's conjugate, or -1 when it has none."""
    lam = np.asarray(lam, dtype=complex)
    partner = np.full(lam.size, -1, dtype=np.int64)
    order = np.lexsort((lam.imag, lam.real))
    keys = lam[order]
    for i in order:
        target = np.conj(lam[i])
        lo = np.searchsorted(keys.real, target.real - tol, side="left")
        hi = np.searchsorted(keys.real, target.real + tol, side="right")
        for q in range(lo, hi):
            if abs(keys[q] - target) <= tol:
                partner[i] = order[q]
                break
    return partner


def truncation_indices(m: SsmModes, h_new: int) -> np.ndarray:
    """Sorted indices of the modes kept by :func:`truncate`."""
    if not 1 <= h_new <= m.h:
        raise ValueError(f"h_new must lie in [1, {m.h}], got {h_new}")
    mag = np.abs(m.weights)
    # largest |b| first, ties to the smaller index
    ranked = np.lexsort((np.arange(m.h), -mag))
    keep = np.zeros(m.h, dtype=bool)
    keep[ranked[:h_new]] = True
    partner = conjugate_partners(m.lam)
    for i in np.flatnonzero(keep):
        j = partner[i]
        if j >= 0:
            keep[j] = True
    return np.flatnonzero(keep)


def truncate(m: SsmModes, h_new: int) -> SsmModes:
    """Keep the ``h_new`` heaviest modes, never splitting a conjugate pair.

    When a pair straddles the cutoff both members stay, so the result can
    hold one mode more than requested; ``result.h`` reports what was kept.
    """
    idx = truncation_indices(m, h_new)
    if idx.size != h_new:
        log.info("truncate: kept %d modes for budget %d to preserve a conjugate pair", idx.size, h_new)
    return SsmModes(
        lam=m.lam[idx], weights=m.weights[idx], gamma=m.gamma, origin_length=m.origin_length
    )


def convert_with_decay(k, gamma: float) -> SsmModes:
    """Exact on ``0..n-1``, with poles of modulus ``gamma`` beyond it."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    t = _to_coeffs(k)
    with np.errstate(over="ignore", divide="ignore"):
        scale = gamma ** -np.arange(t.size, dtype=float)
        rescaled = t * scale
    if not np.all(np.isfinite(rescaled)) or np.any(np.abs(rescaled) > _RESCALE_LIMIT):
        raise DecayTooStrongError(f"rescaling by gamma={gamma} over {t.size} taps overflows")
    base = etsc_convert(rescaled)
    return SsmModes(
        lam=base.lam * gamma, weights=base.weights, gamma=float(gamma), origin_length=t.size
    )


# gradient baseline


@dataclass(frozen=True)
class GradientConfig:
    iterations: int = 10_000
    step_size: float = 1e-2
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class GradientParams:
    r: np.ndarray
    theta: np.ndarray
    b_real: np.ndarray
    b_imag: np.ndarray

    @classmethod
    def init(cls, h: int, seed: int) -> "GradientParams":
        rng = np.random.default_rng(seed)
        r, theta, br, bi = rng.standard_normal((4, h))
        return cls(r=r, theta=theta, b_real=br, b_imag=bi)

    def poles(self) -> np.ndarray:
        return _sigmoid(self.r) * np.exp(1j * self.theta)

    def weights(self) -> np.ndarray:
        return self.b_real + 1j * self.b_imag

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.theta, self.b_real, self.b_imag])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "GradientParams":
        r, theta, br, bi = np.split(np.asarray(v, dtype=float), 4)
        return cls(r=r, theta=theta, b_real=br, b_imag=bi)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def loss_and_grad(params: GradientParams, t) -> tuple[float, GradientParams]:
    """``sum_i |t_i - sum_k lambda_k**i b_k|**2`` and its analytic gradient."""
    t = np.asarray(t, dtype=float)
    sig = _sigmoid(params.r)
    lam = sig * np.exp(1j * params.theta)
    b = params.weights()
    h = lam.size
    loss = 0.0
    g = np.zeros(h, dtype=complex)   # sum_i conj(e_i) lam^i
    gi = np.zeros(h, dtype=complex)  # sum_i i * conj(e_i) lam^i
    for start, p in power_blocks(lam, t.size):
        rows = p.shape[0]
        e = p @ b - t[start:start + rows]
        loss += float(np.vdot(e, e).real)
        ce = np.conj(e)
        idx = np.arange(start, start + rows, dtype=float)
        acc = p.T @ np.stack([ce, idx * ce], axis=1)
        g += acc[:, 0]
        gi += acc[:, 1]
    grad = GradientParams(
        r=2.0 * (b * (1.0 - sig) * gi).real,
        theta=-2.0 * (b * gi).imag,
        b_real=2.0 * g.real,
        b_imag=-2.0 * g.imag,
    )
    return loss, grad


def gradient_convert(t, h: int, cfg: GradientConfig = GradientConfig()) -> tuple[SsmModes, list[float]]:
    """Plain full-batch gradient descent on the sigmoid-polar parametrization.

    Returns the fitted modes and the loss recorded every ``cfg.record_every``
    iterations (plus the loss at the final parameters).
    """
    t = _to_coeffs(t)
    if h < 1:
        raise ValueError("h must be >= 1")
    params = GradientParams.init(h, cfg.seed)
    trace: list[float] = []
    eta = cfg.step_size
    for it in range(cfg.iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = loss_and_grad(params, t)
        if not np.isfinite(loss):
            raise DivergenceError(it, loss)
        if it % cfg.record_every == 0:
            trace.append(loss)
        params.r -= eta * grad.r
        params.theta -= eta * grad.theta
        params.b_real -= eta * grad.b_real
        params.b_imag -= eta * grad.b_imag
    with np.errstate(over="ignore", invalid="ignore"):
        loss, _ = loss_and_grad(params, t)
    if not np.isfinite(loss):
        raise DivergenceError(cfg.iterations, loss)
    trace.append(loss)
    modes = SsmModes(lam=params.poles(), weights=params.weights(), gamma=1.0, origin_length=t.size)
    return modes, trace
