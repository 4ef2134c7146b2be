#!/usr/bin/env python3
"""Linking benefit: clustering vs clustering+linking on the bridge ring.

Every same-cluster pair on the ring is separated by a foreign agent, so
only relayed iterates can connect them. Paired steady-state MSD
differences (common random numbers) land in out/bridge/comparison.csv.
"""

import sys

from declust.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "compare",
                "--preset", "bridge",
                "--seed", "0",
                "--mc", "50",
                "--rounds", "800",
                "--out", "out/bridge",
                "--schemes", "clustering", "clustering_linking",
            ]
        )
    )
