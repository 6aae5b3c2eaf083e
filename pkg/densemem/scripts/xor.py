#!/usr/bin/env python3

"""
Solves XOR with a three-neuron dense associative memory storing the
truth table, printing the output chosen for every row.
"""

__author__ = "Jon Kyl"


import csv
import os
import sys

import tensorflow as tf
import densemem

from densemem.data import xor_dataset
from densemem.dynamics import UNDECIDABLE, xor_energy
from densemem.scripts import EXIT_FAILURE, EXIT_SUCCESS, run_command

cfg = densemem.config.xor


def _run(args, run_dir):
    """
    Clamps x and y of every truth-table row and reads off z.
    """
    model = densemem.EnergyModel(args.n, args.kind)
    rows = []
    for x, y, expected in xor_dataset().tolist():
        z = densemem.xor_solve(x, y, model)
        gap = xor_energy(x, y, -1, model) - xor_energy(x, y, 1, model)
        rows.append((x, y, expected, z, gap))

    with tf.io.gfile.GFile(os.path.join(run_dir, "xor.csv"), "w") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["x", "y", "expected", "z", "gap"])
        writer.writerows([x, y, expected, z, repr(float(gap))] for x, y, expected, z, gap in rows)

    solved = sum(z == expected for _, _, expected, z, _ in rows)
    print(f"XOR with F = {model}")
    for x, y, expected, z, gap in rows:
        answer = "Undecidable" if z == UNDECIDABLE else f"{z:+d}"
        print(f"  x={x:+d} y={y:+d} -> z={answer:>11}  (expected {expected:+d}, gap {gap:g})")
    print(f"{solved}/4 rows solved")
    return EXIT_SUCCESS if solved == len(rows) else EXIT_FAILURE


def main(argv=None):
    return run_command("xor", cfg, _run, argv)


if __name__ == "__main__":
    sys.exit(main())
