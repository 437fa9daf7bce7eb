"""Diagonal state-space recurrence.

    u_n = lambda * u_{n-1} + b * x_n,     y_n = Re(sum(u_n))

One state per scalar input stream; :class:`ChannelBank` vectorizes many
independent channels that share the hidden size.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .conversion import SsmModes, conjugate_partners

# tolerated |Im(sum u)| relative to the running output scale
IMAG_TOLERANCE = 1e-6


class InputError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SsmState:
    u: np.ndarray
    position: int = 0
    imag_residual: float = 0.0
    output_scale: float = 0.0

    @property
    def healthy(self) -> bool:
        """Whether the imaginary part of the output stayed negligible."""
        return self.imag_residual <= IMAG_TOLERANCE * self.output_scale


def init_state(m: SsmModes) -> SsmState:
    return SsmState(u=np.zeros(m.h, dtype=complex))


def _check_input(x) -> float:
    x = float(x)
    if not np.isfinite(x):
        raise InputError(f"non-finite input {x!r}")
    return x


def step(m: SsmModes, s: SsmState, x: float) -> tuple[SsmState, float]:
    if s.u.shape != m.lam.shape:
        raise ValueError(f"state of size {s.u.size} does not belong to modes with h={m.h}")
    x = _check_input(x)
    u = m.lam * s.u + m.weights * x
    total = np.sum(u)
    y = float(total.real)
    new = SsmState(
        u=u,
        position=s.position + 1,
        imag_residual=max(s.imag_residual, abs(float(total.imag))),
        output_scale=max(s.output_scale, abs(y)),
    )
    return new, y


def scan(m: SsmModes, x) -> np.ndarray:
    """Run :func:`step` over a whole signal from the zero state."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite input")
    lam, b = m.lam, m.weights
    u = np.zeros(m.h, dtype=complex)
    y = np.empty(x.size)
    for i, xi in enumerate(x.tolist()):
        u = lam * u + b * xi
        y[i] = np.sum(u).real
    return y


def compress_conjugate_pairs(m: SsmModes) -> SsmModes:
    """Keep one pole of each conjugate pair with its weight doubled.

    ``Re(sum(u))`` is unchanged for real inputs; self-conjugate poles (such
    as -1 when n+1 is even) and unpaired poles are kept as they are.
    """
    partner = conjugate_partners(m.lam)
    idx = np.arange(m.h)
    paired = (partner >= 0) & (partner != idx)
    keep = ~paired | (idx < partner)
    w = np.where(paired, 2.0, 1.0) * m.weights
    return replace(m, lam=m.lam[keep], weights=w[keep])


@dataclass
class ChannelBank:
    """``d`` independent channels stepped together; state is ``(d, h)``."""

    lam: np.ndarray
    weights: np.ndarray
    u: np.ndarray = field(init=False)
    position: int = field(init=False, default=0)
    imag_residual: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=complex)
        self.weights = np.asarray(self.weights, dtype=complex)
        if self.lam.ndim != 2 or self.lam.shape != self.weights.shape:
            raise ValueError("bank needs (d, h) pole and weight arrays")
        self.u = np.zeros_like(self.lam)

    @classmethod
    def from_modes(cls, modes: list[SsmModes]) -> "ChannelBank":
        hs = {m.h for m in modes}
        if len(modes) < 1 or len(hs) != 1:
            raise ValueError(f"channels must share one hidden size, got {sorted(hs)}")
        return cls(np.stack([m.lam for m in modes]), np.stack([m.weights for m in modes]))

    @property
    def d(self) -> int:
        return self.lam.shape[0]

    @property
    def h(self) -> int:
        return self.lam.shape[1]

    def reset(self) -> None:
        self.u[:] = 0
        self.position = 0
        self.imag_residual = 0.0

    def step(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected input of shape ({self.d},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite input")
        self.u *= self.lam
        self.u += self.weights * x[:, None]
        total = self.u.sum(axis=1)
        self.position += 1
        self.imag_residual = max(self.imag_residual, float(np.abs(total.imag).max()))
        return total.real

    def scan(self, x) -> np.ndarray:
        """Feed a ``(steps, d)`` block; returns the ``(steps, d)`` outputs."""
        x = np.asarray(x, dtype=float)
        return np.stack([self.step(row) for row in x]) if len(x) else np.zeros((0, self.d))

    def resident_scalars(self) -> int:
        # complex state counted as two reals
        return 2 * self.u.size
