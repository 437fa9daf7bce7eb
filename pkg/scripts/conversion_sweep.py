"""Conversion time and error, exact vs gradient descent, across sequence lengths and widths.

    python scripts/conversion_sweep.py --out results/conversion.csv
"""
import argparse
from dataclasses import dataclass

from etsc.bench import SweepSpec, bench_conversion, write_records


@dataclass
class Config:
    lengths: tuple = (64, 128, 256, 512, 1024, 2048, 4096, 8192)
    width: int = 64
    widths: tuple = (64, 256, 1024)
    width_length: int = 2048
    grad_iterations: int = 200
    grad_step: float = 1e-4
    seed: int = 0


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="conversion.csv")
    p.add_argument("--quick", action="store_true", help="small grid for a smoke run")
    args = p.parse_args()
    cfg = Config()
    if args.quick:
        cfg = Config(lengths=(64, 256, 1024), widths=(16, 64), width_length=512, grad_iterations=50)

    records = bench_conversion(SweepSpec(grid_n=cfg.lengths, grid_d=(cfg.width,), seed=cfg.seed,
                                         grad_iterations=cfg.grad_iterations, grad_step=cfg.grad_step))
    records += bench_conversion(SweepSpec(grid_n=(cfg.width_length,), grid_d=cfg.widths, seed=cfg.seed,
                                          grad_iterations=cfg.grad_iterations, grad_step=cfg.grad_step))
    write_records(args.out, records)
    print(f"{'method':>9} {'n':>6} {'d':>6} {'seconds':>10} {'rel_error':>10}")
    for r in records:
        print(f"{r.strategy:>9} {r.n:>6} {r.d:>6} {r.conversion_seconds:>10.4f} {r.relative_error:>10.2e}")


if __name__ == "__main__":
    main()
