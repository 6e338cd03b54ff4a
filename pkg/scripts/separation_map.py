#!/usr/bin/env python3
"""SER against symbol separation and noise scale, annihilating vs plain kernel.

    python3 scripts/separation_map.py [--n 16384] [--trials 200] [--jobs 4] > ser_map.csv

The burst-demod scenario only says symbols should be well apart; this maps
where that holds for the default carrier, window and burst.
"""
import argparse
import sys
from dataclasses import replace

from algestim.demod import Alphabet, DemodScenario, symbol_error_rate
from algestim.estimator import Carrier
from algestim.experiments import to_csv
from algestim.hypergrid import GridSpec
from algestim.noise import BurstSpec, IidNoiseSpec


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1 << 14)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=20061)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    grid = GridSpec(args.n)
    rows = []
    for scale in (0.25, 0.5, 1.0, 2.0):
        burst = BurstSpec((0.5, 0.5, 0.5), IidNoiseSpec("rademacher", args.seed, scale))
        for sep in (0.5, 1.0, 2.0, 4.0):
            scen = DemodScenario(Carrier("sine", freq=2.0), 0.3, burst, Alphabet.uniform(4, sep), args.trials, 2)
            ser_a, _ = symbol_error_rate(scen, grid, jobs=args.jobs)
            ser_p, _ = symbol_error_rate(replace(scen, estimator_degree=-1), grid, jobs=args.jobs)
            rows.append((scale, sep, ser_a, ser_p))
    sys.stdout.write(to_csv(["noise_scale", "separation", "ser_annihilating", "ser_plain"], rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
