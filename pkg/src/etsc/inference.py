"""Autoregressive inference over a toy stacked Toeplitz mixer.

Three strategies produce the same outputs token by token:

* ``origin`` keeps the raw input history and recomputes every layer with an
  FFT convolution on each push;
* ``cache`` keeps each layer's input history and computes only the newest
  output as a dot product with the reversed kernel;
* ``ssm`` keeps one diagonal-SSM state per layer and channel, so a push
  costs the same at every position.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dft
from .conversion import SsmModes, convert_with_decay, etsc_convert
from .ssm import ChannelBank
from .toeplitz import ZEROS, ToeplitzKernel, causal_conv_fft

STRATEGIES = ("origin", "cache", "ssm")
IDENTITY = "identity"
GELU = "gelu"


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x ** 3)))


def thread_count(default: Optional[int] = None) -> int:
    """Internal parallelism cap from ``ETSC_THREADS`` (all cores by default)."""
    raw = os.environ.get("ETSC_THREADS")
    if raw:
        return max(1, int(raw))
    return default if default is not None else (os.cpu_count() or 1)


@dataclass(eq=False)
class StackedMixer:
    """``L`` layers of ``d`` per-channel causal kernels of length ``n``.

    ``nonlinearity`` applies between consecutive layers (never after the
    last one).
    """

    kernels: np.ndarray
    extension: str = ZEROS
    gamma: float = 1.0
    nonlinearity: str = IDENTITY
    _materialized: dict = field(default_factory=dict, init=False, repr=False)
    _modes: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=float)
        if self.kernels.ndim != 3 or min(self.kernels.shape) < 1:
            raise ValueError(f"kernels must have shape (L, d, n), got {self.kernels.shape}")
        if self.nonlinearity not in (IDENTITY, GELU):
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        # validates the extension policy once
        self.kernel(0, 0)

    @classmethod
    def random(cls, layers: int, d: int, n: int, seed: int = 0, **kw) -> "StackedMixer":
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((layers, d, n)) / math.sqrt(n), **kw)

    @classmethod
    def identity(cls, layers: int, d: int, n: int, **kw) -> "StackedMixer":
        k = np.zeros((layers, d, n))
        k[..., 0] = 1.0
        return cls(k, **kw)

    @property
    def layers(self) -> int:
        return self.kernels.shape[0]

    @property
    def d(self) -> int:
        return self.kernels.shape[1]

    @property
    def n(self) -> int:
        return self.kernels.shape[2]

    def kernel(self, layer: int, channel: int) -> ToeplitzKernel:
        return ToeplitzKernel(self.kernels[layer, channel], self.extension, self.gamma)

    def materialize(self, layer: int, length: int) -> np.ndarray:
        """``(d, >=length)`` coefficient block with the extension applied."""
        cached = self._materialized.get(layer)
        if cached is None or cached.shape[1] < length:
            size = max(length, 2 * (cached.shape[1] if cached is not None else 0), self.n)
            cached = np.stack([self.kernel(layer, c).materialize(size) for c in range(self.d)])
            self._materialized[layer] = cached
        return cached

    def between_layers(self, x: np.ndarray) -> np.ndarray:
        return gelu(x) if self.nonlinearity == GELU else x

    def modes(self, decay: Optional[float] = None) -> list[list[SsmModes]]:
        """Per-layer, per-channel SSM modes (converted once, then cached)."""
        key = decay
        if key not in self._modes:
            conv = etsc_convert if decay is None else (lambda k: convert_with_decay(k, decay))
            pairs = [(l, c) for l in range(self.layers) for c in range(self.d)]
            workers = min(thread_count(), len(pairs))
            if workers > 1:
                with ThreadPoolExecutor(workers) as ex:
                    flat = list(ex.map(lambda lc: conv(self.kernels[lc[0], lc[1]]), pairs))
            else:
                flat = [conv(self.kernels[l, c]) for l, c in pairs]
            self._modes[key] = [flat[l * self.d:(l + 1) * self.d] for l in range(self.layers)]
        return self._modes[key]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Offline reference: ``(m, d)`` inputs to ``(m, d)`` top-layer outputs."""
        h = np.asarray(x, dtype=float).T
        m = h.shape[1]
        for l in range(self.layers):
            h = causal_conv_fft(self.materialize(l, m)[:, :m], h)
            if l < self.layers - 1:
                h = self.between_layers(h)
        return h.T


class _Buffer:
    """Growable ``(d, capacity)`` column store."""

    def __init__(self, d: int, capacity: int = 64):
        self.data = np.zeros((d, capacity))
        self.size = 0

    def append(self, col: np.ndarray) -> None:
        if self.size == self.data.shape[1]:
            grown = np.zeros((self.data.shape[0], 2 * self.data.shape[1]))
            grown[:, : self.size] = self.data[:, : self.size]
            self.data = grown
        self.data[:, self.size] = col
        self.size += 1

    def extend(self, block: np.ndarray) -> None:
        for col in block.T:
            self.append(col)

    def view(self) -> np.ndarray:
        return self.data[:, : self.size]


class StreamSession:
    """One autoregressive stream; single-owner, stepped sequentially."""

    strategy: str = ""

    def __init__(self, model: StackedMixer):
        self.model = model
        self.position = 0
        # scalars read or written by the most recent push
        self.last_work = 0

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.model.d,):
            raise ValueError(f"expected a length-{self.model.d} vector, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input")
        return x

    def push(self, x) -> np.ndarray:
        raise NotImplementedError

    def prefill(self, xs) -> None:
        """Advance over ``(steps, d)`` inputs without returning outputs."""
        for row in np.asarray(xs, dtype=float):
            self.push(row)

    def resident_scalars(self) -> int:
        raise NotImplementedError


class OriginSession(StreamSession):
    strategy = "origin"

    def __init__(self, model: StackedMixer):
        super().__init__(model)
        self.history = _Buffer(model.d)
        self._spectra: dict[tuple[int, int], np.ndarray] = {}

    def _kernel_spectrum(self, layer: int, size: int) -> np.ndarray:
        key = (layer, size)
        spec = self._spectra.get(key)
        if spec is None:
            # size >= 2m, so a length-size/2 kernel still convolves linearly
            # with any history of length m <= size/2
            half = size // 2
            t = np.zeros((self.model.d, size))
            t[:, :half] = self.model.materialize(layer, half)[:, :half]
            spec = dft.forward(dft.plan(size), t)
            self._spectra[key] = spec
        return spec

    def push(self, x) -> np.ndarray:
        self.history.append(self._check(x))
        self.position += 1
        m = self.position
        size = dft.next_power_of_two(2 * m)
        p = dft.plan(size)
        h = self.history.view()
        for l in range(self.model.layers):
            buf = np.zeros((self.model.d, size))
            buf[:, :m] = h
            spec = dft.forward(p, buf) * self._kernel_spectrum(l, size)
            h = dft.inverse(p, spec)[:, :m].real * math.sqrt(size)
            if l < self.model.layers - 1:
                h = self.model.between_layers(h)
        self.last_work = size * self.model.d * self.model.layers
        return h[:, -1].copy()

    def prefill(self, xs) -> None:
        xs = np.asarray(xs, dtype=float)
        self.history.extend(xs.T)
        self.position += xs.shape[0]

    def resident_scalars(self) -> int:
        # raw history plus the per-layer activations rebuilt on every push
        return self.position * self.model.d * self.model.layers


class CacheSession(StreamSession):
    strategy = "cache"

    def __init__(self, model: StackedMixer):
        super().__init__(model)
        self.caches = [_Buffer(model.d) for _ in range(model.layers)]

    def push(self, x) -> np.ndarray:
        h = self._check(x)
        pos = self.position
        for l in range(self.model.layers):
            cache = self.caches[l]
            cache.append(h)
            t = self.model.materialize(l, pos + 1)
            hist = cache.view()
            # y_pos = sum_k t_{pos-k} x_k
            h = np.einsum("dk,dk->d", t[:, pos::-1], hist)
            if l < self.model.layers - 1:
                h = self.model.between_layers(h)
        self.position += 1
        self.last_work = 2 * (pos + 1) * self.model.d * self.model.layers
        return h

    def prefill(self, xs) -> None:
        if self.position != 0:
            super().prefill(xs)
            return
        h = np.asarray(xs, dtype=float).T
        m = h.shape[1]
        for l in range(self.model.layers):
            self.caches[l].extend(h)
            h = causal_conv_fft(self.model.materialize(l, m)[:, :m], h)
            if l < self.model.layers - 1:
                h = self.model.between_layers(h)
        self.position = m

    def resident_scalars(self) -> int:
        return sum(c.size for c in self.caches) * self.model.d


class SsmSession(StreamSession):
    strategy = "ssm"

    def __init__(self, model: StackedMixer, decay: Optional[float] = None):
        super().__init__(model)
        self.decay = decay
        self.banks = [ChannelBank.from_modes(layer) for layer in model.modes(decay)]

    def push(self, x) -> np.ndarray:
        h = self._check(x)
        for l, bank in enumerate(self.banks):
            h = bank.step(h)
            if l < self.model.layers - 1:
                h = self.model.between_layers(h)
        self.position += 1
        self.last_work = sum(3 * bank.u.size for bank in self.banks)
        return h

    def prefill(self, xs) -> None:
        h = np.asarray(xs, dtype=float)
        for l, bank in enumerate(self.banks):
            h = bank.scan(h)
            if l < self.model.layers - 1:
                h = self.model.between_layers(h)
        self.position += len(xs)

    def resident_scalars(self) -> int:
        return sum(bank.resident_scalars() for bank in self.banks)


def open_session(model: StackedMixer, strategy: str, decay: Optional[float] = None) -> StreamSession:
    """Start an empty stream. ``decay`` only applies to the ssm strategy."""
    if strategy == "origin":
        return OriginSession(model)
    if strategy == "cache":
        return CacheSession(model)
    if strategy == "ssm":
        return SsmSession(model, decay)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def run_stream(session: StreamSession, xs) -> np.ndarray:
    return np.stack([session.push(row) for row in np.asarray(xs, dtype=float)])


@dataclass
class ParityReport:
    """Max relative deviation between strategy pairs, split at position n.

    Deviation of a pair over a bucket is ``max|a - b| / max(|a|, |b|)``
    (zero when both outputs vanish). A bucket absent from a pair's dict
    held no positions.
    """

    n: int
    positions: int
    deviations: dict[tuple[str, str], dict[str, float]]
    outputs: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def in_range_max(self) -> float:
        return max((d.get("in_range", 0.0) for d in self.deviations.values()), default=0.0)

    def beyond_max(self, pair: tuple[str, str]) -> Optional[float]:
        return self.deviations[pair].get("beyond")


def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    diff = np.abs(a - b).max(initial=0.0)
    if diff == 0.0:
        return 0.0
    return float(diff / scale)


def parity_report(
    model: StackedMixer,
    xs,
    strategies=STRATEGIES,
    decay: Optional[float] = None,
    threads: Optional[int] = None,
) -> ParityReport:
    """Stream the same ``(positions, d)`` inputs through every strategy."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != model.d:
        raise ValueError(f"inputs must have shape (positions, {model.d})")
    # conversion happens once, before any threads start
    if "ssm" in strategies:
        model.modes(decay)
    sessions = [open_session(model, s, decay) for s in strategies]
    workers = min(threads or thread_count(), len(sessions))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(lambda s: run_stream(s, xs), sessions))
    else:
        results = [run_stream(s, xs) for s in sessions]
    outputs = dict(zip(strategies, results))
    n = model.n
    deviations = {}
    for i, a in enumerate(strategies):
        for b in strategies[i + 1:]:
            entry = {}
            if xs.shape[0] > 0:
                entry["in_range"] = _deviation(outputs[a][:n], outputs[b][:n])
            if xs.shape[0] > n:
                entry["beyond"] = _deviation(outputs[a][n:], outputs[b][n:])
            deviations[(a, b)] = entry
    return ParityReport(n=n, positions=xs.shape[0], deviations=deviations, outputs=outputs)
