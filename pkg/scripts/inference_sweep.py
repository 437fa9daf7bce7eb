"""Per-token latency and resident state for origin / cache / ssm streaming.

Sweeps sequence length (fixed width and depth), then width, then depth.

    python scripts/inference_sweep.py --out results/inference.csv
"""
import argparse
from dataclasses import dataclass

from etsc.bench import SweepSpec, bench_inference, write_records


@dataclass
class Config:
    lengths: tuple = (512, 1024, 2048, 4096, 8192)
    width: int = 64
    layers: int = 2
    widths: tuple = (16, 64, 256)
    depths: tuple = (1, 2, 4, 8)
    fixed_length: int = 2048
    repeats: int = 5
    warmup: int = 2
    seed: int = 0


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="inference.csv")
    p.add_argument("--quick", action="store_true", help="small grid for a smoke run")
    args = p.parse_args()
    cfg = Config()
    if args.quick:
        cfg = Config(lengths=(256, 1024), width=8, widths=(4, 16), depths=(1, 2), fixed_length=512)

    common = dict(repeats=cfg.repeats, warmup=cfg.warmup, seed=cfg.seed)
    records = bench_inference(SweepSpec(grid_n=cfg.lengths, grid_d=(cfg.width,), grid_layers=(cfg.layers,), **common))
    records += bench_inference(SweepSpec(grid_n=(cfg.fixed_length,), grid_d=cfg.widths,
                                         grid_layers=(cfg.layers,), **common))
    records += bench_inference(SweepSpec(grid_n=(cfg.fixed_length,), grid_d=(cfg.width,),
                                         grid_layers=cfg.depths, **common))
    write_records(args.out, records)
    print(f"{'strategy':>8} {'n':>6} {'d':>5} {'L':>3} {'ms/token':>10} {'resident':>10}")
    for r in records:
        print(f"{r.strategy:>8} {r.n:>6} {r.d:>5} {r.layers:>3} {1e3 * r.seconds_per_token:>10.3f} "
              f"{r.resident_scalars:>10}")


if __name__ == "__main__":
    main()
