#!/usr/bin/env python3
"""Convergence sweeps of the finite-time divergence.

--sweep time   fixes N and sweeps dt over three decades (error ~ dt until
               the spatial resolution plateau takes over).
--sweep space  fixes a small dt and sweeps N (error ~ delta).
"""
import argparse

import numpy as np

from voroderiv.experiments import ExperimentConfig, run

TIME_N = {2: 100_000, 3: 1_000_000}
SPACE_N = {2: (1_000, 3_000, 10_000, 30_000, 100_000),
           3: (3_000, 10_000, 30_000, 100_000, 300_000)}
FIELDS = {2: "single_cosine_2d", 3: "single_sine_3d"}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweep", choices=("time", "space"), default="time")
    ap.add_argument("--dim", type=int, default=2, choices=(2, 3))
    ap.add_argument("--field", default="", help="override the default field")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="")
    args = ap.parse_args()

    if args.sweep == "time":
        n, dt = (TIME_N[args.dim],), tuple(np.logspace(-3, 0, 8))
    else:
        n, dt = SPACE_N[args.dim], (1e-3,)
    cfg = ExperimentConfig(
        kind="convergence",
        dimension=args.dim,
        field=args.field or FIELDS[args.dim],
        n=n,
        dt=dt,
        seed=args.seed,
        out=args.out or f"results/convergence-{args.sweep}-{args.dim}d",
    )
    manifest = run(cfg)
    key = "slopes_vs_dt" if args.sweep == "time" else "slopes_vs_delta"
    print(f"fitted {key}: {manifest['results'][key]}")


if __name__ == "__main__":
    main()
