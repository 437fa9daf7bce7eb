"""Reconstruction error of truncated modes as the hidden size shrinks.

Keeps the heaviest modes of an exact conversion and reports the relative
error on the kernel together with the dropped-energy prediction
``(n+1) * sum |b_dropped|^2``.

    python scripts/truncation_study.py --n 512 --family decay-sinusoid
"""
import argparse

import numpy as np

from etsc.cli import generate_kernels
from etsc.conversion import augment, etsc_convert, reconstruct, truncate, truncation_indices
from etsc.toeplitz import relative_error


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--family", choices=("random", "decay-sinusoid"), default="decay-sinusoid")
    p.add_argument("--gamma", type=float, default=0.98)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default="512,384,256,128,64,32,16")
    args = p.parse_args()

    t = generate_kernels(args.n, 1, args.seed, args.family, args.gamma, 4)[0]
    modes = etsc_convert(t)
    tbar = augment(t)
    print(f"{'budget':>6} {'kept':>5} {'rel_error':>10} {'dropped_energy':>15} {'measured':>12}")
    for budget in (int(s) for s in args.sizes.split(",")):
        if budget > modes.h:
            continue
        kept = truncate(modes, budget)
        idx = truncation_indices(modes, budget)
        dropped = np.setdiff1d(np.arange(modes.h), idx)
        predicted = (args.n + 1) * np.sum(np.abs(modes.weights[dropped]) ** 2)
        measured = np.sum(np.abs(tbar - reconstruct(kept, args.n + 1)) ** 2)
        err = relative_error(t, reconstruct(kept, args.n))
        print(f"{budget:>6} {kept.h:>5} {err:>10.2e} {predicted:>15.4e} {measured:>12.4e}")


if __name__ == "__main__":
    main()
