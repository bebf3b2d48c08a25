"""Quadrature-versus-closed-form suite, chi-square tail rates and the log-partition tail bound."""

import argparse

import numpy as np

from spherical_chaos.guerra_oracle import closed_form_J, random_schedule, recursive_J, tau_chi, tau_limit
from spherical_chaos.mixture import MixtureSpec
from spherical_chaos.simulator import logz_concentration_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", type=int, default=100)
    ap.add_argument("--seed", type=int, default=6)
    args = ap.parse_args()

    spec = MixtureSpec(((1, 0.9), (2, 0.4)), h=0.4)
    rng = np.random.default_rng(args.seed)
    errors = []
    for _ in range(args.cases):
        sched, b, lam = random_schedule(rng, spec)
        errors += [abs(recursive_J(sched, spec, b, lam, j) - closed_form_J(sched, spec, b, lam, j)) for j in (1, 2)]
    print(f"{args.cases} schedules: max |quadrature - closed form| = {max(errors):.2e}")

    for b in (1.5, 2.0, 3.0):
        row = " ".join(f"N={n}:{abs(tau_chi(n, b) - tau_limit(b)):.2e}" for n in (10, 100, 1000, 10_000))
        print(f"b={b}: limit {tau_limit(b):.6f}, errors {row}")

    for scale in (1.0, 2.0):
        rows = logz_concentration_check(MixtureSpec(((1, 1.0),)), 16, 2000, 2000, args.seed, a_scale=scale)
        print(f"variance proxy x{scale:g}: " + ", ".join(f"s={r.s:g} P={r.exceedance:.4f} bound={r.bound:.4f}" for r in rows))


if __name__ == "__main__":
    main()
