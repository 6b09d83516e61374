#!/usr/bin/env python3
"""Conditioning study: monomial vs orthonormal basis over the alpha grid.

Writes alpha_sweep.csv in the current directory.
"""

import sys

from polystokes.cli import main

if __name__ == "__main__":
    sys.exit(main(["alpha-sweep", "--family", "voronoi", "--level", "1",
                   "--k", "1,2,3,4", "--basis", "monomial,ortho",
                   "--output", "alpha_sweep.csv"]))
