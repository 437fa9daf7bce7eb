"""Timing and memory-accounting sweeps.

Memory is counted from the data structures (stored scalars, complex values
count twice), not read from the process, so it is deterministic. Wall-clock
fields are the only nondeterministic columns.
"""
from __future__ import annotations

import csv
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .conversion import DivergenceError, GradientConfig, etsc_convert, gradient_convert, reconstruct
from .inference import STRATEGIES, StackedMixer, open_session, thread_count
from .toeplitz import relative_error

log = logging.getLogger(__name__)

COLUMNS = (
    "strategy",
    "n",
    "d",
    "layers",
    "position",
    "seconds_per_token",
    "resident_scalars",
    "conversion_seconds",
    "relative_error",
)


@dataclass(frozen=True)
class BenchRecord:
    strategy: str
    n: int
    d: int
    layers: Optional[int] = None
    position: Optional[int] = None
    seconds_per_token: Optional[float] = None
    resident_scalars: Optional[int] = None
    conversion_seconds: Optional[float] = None
    relative_error: Optional[float] = None


@dataclass
class SweepSpec:
    grid_n: Sequence[int] = (64, 256, 1024)
    grid_d: Sequence[int] = (64,)
    grid_layers: Sequence[int] = (2,)
    strategies: Sequence[str] = STRATEGIES
    seed: int = 0
    repeats: int = 5
    warmup: int = 2
    # inference checkpoints; defaults to one checkpoint at each n
    positions: Optional[Sequence[int]] = None
    grad_iterations: int = 200
    grad_step: float = 1e-4
    # channels per grid point that also run the (slow) gradient baseline
    grad_channels: int = 1
    parallel: bool = False

    def __post_init__(self):
        for name in ("grid_n", "grid_d", "grid_layers", "strategies"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be nonempty")
        if min(self.grid_n) < 1 or min(self.grid_d) < 1 or min(self.grid_layers) < 1:
            raise ValueError("grid values must be positive")
        if self.repeats < 3:
            raise ValueError("repeats must be >= 3")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")


def _kernels(seed: int, n: int, d: int) -> np.ndarray:
    rng = np.random.default_rng([seed, n, d])
    return rng.standard_normal((d, n))


def _map(spec: SweepSpec, fn, points):
    workers = min(thread_count(default=1), len(points)) if spec.parallel else 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return [r for rows in ex.map(fn, points) for r in rows]
    return [r for p in points for r in fn(p)]


def _conversion_point(spec: SweepSpec, n: int, d: int) -> list[BenchRecord]:
    kernels = _kernels(spec.seed, n, d)
    times = []
    for _ in range(spec.repeats):
        t0 = time.perf_counter()
        modes = [etsc_convert(k) for k in kernels]
        times.append(time.perf_counter() - t0)
    etsc_err = max(relative_error(k, reconstruct(m, n)) for k, m in zip(kernels, modes))
    rows = [BenchRecord("etsc", n, d, conversion_seconds=statistics.median(times), relative_error=etsc_err)]

    h = max(1, n - 1)
    cfg = GradientConfig(iterations=spec.grad_iterations, step_size=spec.grad_step, seed=spec.seed)
    errs, elapsed = [], 0.0
    for k in kernels[: spec.grad_channels]:
        t0 = time.perf_counter()
        try:
            m, _ = gradient_convert(k, h, cfg)
            errs.append(relative_error(k, reconstruct(m, n)))
        except DivergenceError as exc:
            log.warning("gradient baseline diverged at n=%d: %s", n, exc)
            errs.append(float("inf"))
        elapsed += time.perf_counter() - t0
    # per-channel cost scaled to the full d channels
    grad_seconds = elapsed / len(errs) * d
    rows.append(BenchRecord("gradient", n, d, conversion_seconds=grad_seconds, relative_error=max(errs)))
    return rows


def bench_conversion(spec: SweepSpec) -> list[BenchRecord]:
    """ETSC vs gradient descent: conversion time and reconstruction error."""
    points = [(n, d) for n in spec.grid_n for d in spec.grid_d]
    return _map(spec, lambda p: _conversion_point(spec, *p), points)


def time_pushes(session, xs: np.ndarray, warmup: int, repeats: int) -> float:
    """Median wall-clock seconds of single pushes after ``warmup`` untimed ones."""
    for row in xs[:warmup]:
        session.push(row)
    samples = []
    for row in xs[warmup:warmup + repeats]:
        t0 = time.perf_counter()
        session.push(row)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def _inference_point(spec: SweepSpec, n: int, d: int, layers: int) -> list[BenchRecord]:
    model = StackedMixer.random(layers, d, n, seed=spec.seed)
    checkpoints = sorted(spec.positions) if spec.positions else [n]
    extra = spec.warmup + spec.repeats
    rng = np.random.default_rng([spec.seed, n, d, layers])
    xs = rng.standard_normal((max(checkpoints) + extra, d))
    rows = []
    for strategy in spec.strategies:
        for pos in checkpoints:
            session = open_session(model, strategy)
            session.prefill(xs[:pos])
            resident = session.resident_scalars()
            spt = time_pushes(session, xs[pos:pos + extra], spec.warmup, spec.repeats)
            rows.append(BenchRecord(strategy, n, d, layers, pos, spt, resident))
    return rows


def bench_inference(spec: SweepSpec) -> list[BenchRecord]:
    """Per-token latency and resident state for each strategy and checkpoint."""
    points = [(n, d, l) for n in spec.grid_n for d in spec.grid_d for l in spec.grid_layers]
    return _map(spec, lambda p: _inference_point(spec, *p), points)


# CSV


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(path, records: Sequence[BenchRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for rec in records:
            w.writerow([_fmt(getattr(rec, c)) for c in COLUMNS])


_INT_COLUMNS = {"n", "d", "layers", "position", "resident_scalars"}


def read_records(path) -> list[BenchRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        out = []
        for row in reader:
            kw = {}
            for c in COLUMNS:
                raw = row[c]
                if c == "strategy":
                    kw[c] = raw
                elif raw == "":
                    kw[c] = None
                else:
                    kw[c] = int(raw) if c in _INT_COLUMNS else float(raw)
            out.append(BenchRecord(**kw))
        return out
