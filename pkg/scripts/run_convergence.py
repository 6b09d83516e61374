#!/usr/bin/env python3
"""Headline convergence study: both manufactured cases, k = 1 and 2.

Writes convergence_hexagonal.csv and convergence_voronoi.csv in the
current directory.  Equivalent to two `polystokes convergence` calls.
"""

import sys

from polystokes.cli import main

if __name__ == "__main__":
    rc = main(["convergence", "--cases", "test1,test2",
               "--families", "hexagonal", "--levels", "1..5", "--k", "1,2",
               "--output", "convergence_hexagonal.csv"])
    rc |= main(["convergence", "--cases", "test1,test2",
                "--families", "voronoi", "--levels", "1..3", "--k", "1,2",
                "--output", "convergence_voronoi.csv"])
    sys.exit(rc)
