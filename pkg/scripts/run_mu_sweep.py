#!/usr/bin/env python3
"""Step-size sweep: empirical decision-error decay versus 1/mu.

Sweeps mu over {0.1, 0.05, 0.025} on the two-cluster sweep scenario and
writes steady MSD plus P_d/P_f/P_I/P_II estimates (with upper bounds and
the Markov trust bounds) to out/sweep/sweep_mu.csv.
"""

import sys

from declust.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "sweep",
                "--preset", "sweep",
                "--seed", "0",
                "--mc", "30",
                "--rounds", "600",
                "--out", "out/sweep",
                "--param", "mu",
                "--values", "0.1", "0.05", "0.025",
            ]
        )
    )
