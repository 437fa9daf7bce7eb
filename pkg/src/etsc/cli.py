"""``etsc`` command line.

Exit codes: 0 success, 1 verification/parity failure, 2 usage error,
3 I/O or parse error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bench, formats
from .conversion import (
    DecayTooStrongError,
    DivergenceError,
    GradientConfig,
    SsmModes,
    augment,
    convert_with_decay,
    etsc_convert,
    gradient_convert,
    reconstruct,
    truncate,
)
from .inference import GELU, IDENTITY, StackedMixer, parity_report
from .toeplitz import DECAY, ZEROS, ToeplitzKernel, reconstruction_error

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

PARITY_TOLERANCE = 1e-5
AUGMENTED_ROW_TOL = 1e-8
DC_TOL = 1e-9
PARSEVAL_TOL = 1e-9


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


# gen


def generate_kernels(n: int, d: int, seed: int, family: str, gamma: float, components: int) -> np.ndarray:
    """``(d, n)`` synthetic kernels, deterministic in ``seed``."""
    if n < 1 or d < 1:
        raise UsageError(f"invalid size: n={n}, d={d} (both must be >= 1)")
    rng = np.random.default_rng(seed)
    if family == "random":
        return rng.standard_normal((d, n))
    if not 0.0 < gamma <= 1.0:
        raise UsageError(f"--gamma must lie in (0, 1], got {gamma}")
    i = np.arange(n)
    out = np.empty((d, n))
    for c in range(d):
        a = rng.uniform(-1.0, 1.0, components)
        omega = rng.uniform(0.0, np.pi, components)
        phi = rng.uniform(0.0, 2 * np.pi, components)
        wave = (a[:, None] * np.cos(omega[:, None] * i + phi[:, None])).sum(axis=0)
        out[c] = gamma ** i * wave
    return out


def _channel_path(path: Path, c: int, d: int) -> Path:
    return path if d == 1 else path.with_name(f"{path.stem}_{c}{path.suffix}")


def cmd_gen(args) -> int:
    kernels = generate_kernels(args.n, args.d, args.seed, args.family, args.gamma, args.components)
    out = Path(args.output)
    for c, coeffs in enumerate(kernels):
        k = ToeplitzKernel(coeffs, args.extension, args.ext_gamma if args.extension == DECAY else 1.0)
        target = _channel_path(out, c, args.d)
        formats.save_kernel(target, k, args.format)
        print(f"wrote={target}")
    return EXIT_OK


# convert


def convert_kernel(k: ToeplitzKernel, method: str, h: Optional[int] = None, gamma: Optional[float] = None,
                   pad_to: Optional[int] = None, cfg: GradientConfig = GradientConfig()) -> SsmModes:
    t = k.coeffs
    if pad_to is not None:
        if pad_to < t.size:
            raise UsageError(f"--pad-to {pad_to} is shorter than the kernel ({t.size})")
        t = np.concatenate([t, np.zeros(pad_to - t.size)])
    if method == "gradient":
        modes, _ = gradient_convert(t, h or t.size, cfg)
        return modes
    if method == "etsc":
        modes = etsc_convert(t)
    elif method == "etsc-decay":
        if gamma is None:
            raise UsageError("--gamma is required for etsc-decay")
        modes = convert_with_decay(t, gamma)
    else:
        raise UsageError(f"unknown method {method!r}")
    if h is not None and h != modes.h:
        if h > modes.h:
            raise UsageError(f"--h {h} exceeds the available {modes.h} modes; use --pad-to")
        modes = truncate(modes, h)
    return modes


def cmd_convert(args) -> int:
    k = formats.load_kernel(args.input)
    cfg = GradientConfig(iterations=args.iters, step_size=args.step, seed=args.seed)
    try:
        modes = convert_kernel(k, args.method, args.h, args.gamma, args.pad_to, cfg)
    except DivergenceError as exc:
        print(f"error: gradient descent diverged at iteration {exc.iteration}", file=sys.stderr)
        return EXIT_FAIL
    except DecayTooStrongError as exc:
        raise UsageError(str(exc))
    formats.save_modes(args.output, modes, args.format)
    value, absolute = reconstruction_error(k.coeffs, reconstruct(modes, k.n))
    if absolute:
        print(f"abs_error={value!r} mode=abs")
    else:
        print(f"rel_error={value!r}")
    print(f"h={modes.h}")
    return EXIT_OK


# verify


def verify_pair(k: ToeplitzKernel, m: SsmModes, tol: float) -> dict:
    """Run every equivalence check; returns a JSON-ready report."""
    n = k.n
    if m.origin_length != n:
        raise UsageError(f"incompatible files: kernel n={n}, modes origin_length={m.origin_length}")
    t = k.coeffs
    value, absolute = reconstruction_error(t, reconstruct(m, n))
    report = {
        "reconstruction": {"value": value, "absolute": absolute, "tolerance": tol, "pass": value <= tol},
    }
    # undo the decay rescale so the root-of-unity identities apply
    gamma = m.gamma
    scaled = t * gamma ** -np.arange(n, dtype=float)
    unit = SsmModes(m.lam / gamma, m.weights, 1.0, n)
    aug = augment(scaled)
    norm = float(np.linalg.norm(scaled))
    full = reconstruct(unit, n + 1)

    row = abs(full[n] - aug[n])
    report["augmented_row"] = {"value": float(row), "tolerance": AUGMENTED_ROW_TOL * norm,
                               "pass": bool(row <= AUGMENTED_ROW_TOL * norm)}
    dc = abs(full.sum()) / np.sqrt(n + 1)
    report["dc"] = {"value": float(dc), "tolerance": DC_TOL * norm, "pass": bool(dc <= DC_TOL * norm)}
    lhs = float(np.sum(aug ** 2))
    rhs = float((n + 1) * np.sum(np.abs(m.weights) ** 2))
    gap = abs(lhs - rhs)
    report["parseval"] = {"value": gap, "tolerance": PARSEVAL_TOL * lhs, "pass": bool(gap <= PARSEVAL_TOL * lhs)}
    report["ok"] = all(v["pass"] for v in report.values() if isinstance(v, dict))
    return report


def cmd_verify(args) -> int:
    k = formats.load_kernel(args.kernel)
    m = formats.load_modes(args.modes)
    report = verify_pair(k, m, args.tol)
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["ok"] else EXIT_FAIL


# parity


def cmd_parity(args) -> int:
    kw = {"extension": args.extension, "gamma": args.ext_gamma if args.extension == DECAY else 1.0,
          "nonlinearity": args.nonlinearity}
    if min(args.L, args.d, args.n) < 1:
        raise UsageError("--L, --d and --n must be >= 1")
    if args.identity:
        model = StackedMixer.identity(args.L, args.d, args.n, **kw)
    else:
        model = StackedMixer.random(args.L, args.d, args.n, seed=args.seed, **kw)
    positions = args.positions if args.positions is not None else args.n
    xs = np.random.default_rng(args.seed + 1).standard_normal((positions, args.d))
    report = parity_report(model, xs, decay=args.decay)
    for (a, b), dev in report.deviations.items():
        line = f"pair={a}-{b} in_range={dev.get('in_range', 0.0)!r}"
        if "beyond" in dev:
            line += f" beyond={dev['beyond']!r}"
            if "ssm" in (a, b):
                line += " expected_divergence=1"
        print(line)
    worst = report.in_range_max()
    print(f"max_in_range_deviation={worst!r}")
    return EXIT_OK if worst < PARITY_TOLERANCE else EXIT_FAIL


# bench


def cmd_bench(args) -> int:
    spec = bench.SweepSpec(
        grid_n=args.grid_n,
        grid_d=args.grid_d,
        grid_layers=args.grid_layers,
        strategies=args.strategies,
        seed=args.seed,
        repeats=args.repeats,
        warmup=args.warmup,
        positions=args.positions,
        grad_iterations=args.grad_iters,
        grad_step=args.grad_step,
        grad_channels=args.grad_channels,
        parallel=args.parallel,
    )
    records = []
    if args.kind in ("conversion", "all"):
        records += bench.bench_conversion(spec)
    if args.kind in ("inference", "all"):
        records += bench.bench_inference(spec)
    bench.write_records(args.output, records)
    print(f"rows={len(records)} wrote={args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etsc", description="Toeplitz kernel to diagonal SSM conversion tools")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate synthetic kernels")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=1, help="number of kernels (files get a _<c> suffix)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--family", choices=("random", "decay-sinusoid"), default="random")
    g.add_argument("--gamma", type=float, default=0.95, help="envelope decay for decay-sinusoid")
    g.add_argument("--components", type=int, default=4)
    g.add_argument("--extension", choices=(ZEROS, DECAY), default=ZEROS)
    g.add_argument("--ext-gamma", type=float, default=0.9)
    g.add_argument("--format", choices=("json", "binary"))
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("convert", help="convert a kernel file to a modes file")
    c.add_argument("input")
    c.add_argument("--method", choices=("etsc", "gradient", "etsc-decay"), default="etsc")
    c.add_argument("--h", type=int)
    c.add_argument("--gamma", type=float)
    c.add_argument("--pad-to", type=int, help="zero-pad the kernel first (hidden size above n)")
    c.add_argument("--iters", type=int, default=GradientConfig.iterations)
    c.add_argument("--step", type=float, default=GradientConfig.step_size)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--format", choices=("json", "binary"))
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_convert)

    v = sub.add_parser("verify", help="check that modes reproduce a kernel")
    v.add_argument("kernel")
    v.add_argument("modes")
    v.add_argument("--tol", type=float, default=1e-6)
    v.set_defaults(func=cmd_verify)

    q = sub.add_parser("parity", help="compare origin/cache/ssm streaming outputs")
    q.add_argument("--L", type=int, default=2)
    q.add_argument("--d", type=int, default=4)
    q.add_argument("--n", type=int, default=256)
    q.add_argument("--positions", type=int, help="tokens to stream (default n)")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--identity", action="store_true", help="use identity kernels")
    q.add_argument("--nonlinearity", choices=(IDENTITY, GELU), default=IDENTITY)
    q.add_argument("--extension", choices=(ZEROS, DECAY), default=ZEROS)
    q.add_argument("--ext-gamma", type=float, default=0.9)
    q.add_argument("--decay", type=float, help="convert with this pole modulus for the ssm stream")
    q.set_defaults(func=cmd_parity)

    b = sub.add_parser("bench", help="timing/memory sweep to CSV")
    b.add_argument("--kind", choices=("conversion", "inference", "all"), default="all")
    b.add_argument("--grid-n", type=_int_list, default=[64, 256, 1024])
    b.add_argument("--grid-d", "--d", dest="grid_d", type=_int_list, default=[64])
    b.add_argument("--grid-L", "--L", dest="grid_layers", type=_int_list, default=[2])
    b.add_argument("--strategies", type=_str_list, default=["origin", "cache", "ssm"])
    b.add_argument("--positions", type=_int_list)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--warmup", type=int, default=2)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--grad-iters", type=int, default=200)
    b.add_argument("--grad-step", type=float, default=1e-4)
    b.add_argument("--grad-channels", type=int, default=1)
    b.add_argument("--parallel", action="store_true")
    b.add_argument("-o", "--output", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except formats.FormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
