#!/usr/bin/env python3
"""Reference protocol: 50 agents, 3 clusters, model switch at round 400.

Runs the clustering scheme for 100 Monte-Carlo runs of 800 rounds and
writes the MSD / clustering-error traces (plus SVG charts) to out/protocol.
"""

import sys

from declust.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "run",
                "--preset", "protocol",
                "--scheme", "clustering",
                "--seed", "0",
                "--mc", "100",
                "--rounds", "800",
                "--out", "out/protocol",
                "--svg",
            ]
        )
    )
