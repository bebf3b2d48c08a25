"""Minimise the variational functional for a few reference models and print a table."""

import argparse
import time

from spherical_chaos.cs_functional import OptimizerSettings, optimize_cs
from spherical_chaos.mixture import MixtureSpec

MODELS = {
    "pure field h=1": MixtureSpec((), h=1.0),
    "2-spin beta^2=0.25": MixtureSpec(((1, 0.25),)),
    "2-spin beta^2=1": MixtureSpec(((1, 1.0),)),
    "2-spin beta^2=1, h=0.5": MixtureSpec(((1, 1.0),), h=0.5),
    "2+4 mixture": MixtureSpec(((1, 0.6), (2, 0.8)), h=0.2),
    "4-spin beta^2=3": MixtureSpec(((2, 3.0),)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-max", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    settings = OptimizerSettings(k_max=args.k_max, seed=args.seed)
    print(f"{'model':28s} {'value':>14s} {'b*':>12s} {'u_x':>10s} {'k':>2s} {'secs':>6s}")
    for name, spec in MODELS.items():
        start = time.perf_counter()
        opt = optimize_cs(spec, settings)
        secs = time.perf_counter() - start
        print(f"{name:28s} {opt.value:14.10f} {opt.b_star:12.8f} {opt.u_x:10.6f} {opt.k_used:2d} {secs:6.1f}")
        print(f"{'':28s} x* = {[(round(q, 6), round(m, 6)) for q, m in opt.x_star.pairs]}")


if __name__ == "__main__":
    main()
