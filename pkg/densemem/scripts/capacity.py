#!/usr/bin/env python3

"""
Storage capacity experiments:

    theory  closed-form capacity estimates for every (N, n)
    hist    overlap histograms of recovery trials for every (N, K, n)
    khalf   the load K_1/2 at which half of the trials still recover a pattern
"""

__author__ = "Jon Kyl"


import copy
import csv
import os
import sys

import tensorflow as tf
import densemem

from densemem import capacity
from densemem.scripts import EXIT_FAILURE, EXIT_SUCCESS, run_command

cfg = copy.deepcopy(densemem.config.capacity)
cfg.add_argument("mode", choices=["theory", "hist", "khalf"], help="experiment to run")


def _write_csv(path, header, rows):
    with tf.io.gfile.GFile(path, "w") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _theory(args, run_dir):
    """
    Tabulates the perfect-recovery capacity, the capacity at the error
    threshold and the single-bit error probability at both loads.
    """
    header = [
        "N", "n", "k_max_no_errors", "perfect_recovery_capacity",
        "k_max", "alpha_n", "p_error", "p_error_gaussian"]
    rows = []
    for N in args.N:
        for n in args.n:
            theory = capacity.CapacityTheory(N, n, args.error_threshold)
            K = max(theory.k_max, 1)
            rows.append([
                N, n,
                theory.k_max_no_errors,
                f"{capacity.perfect_recovery_capacity(N, n):.6g}",
                theory.k_max,
                f"{theory.alpha:.6g}",
                f"{theory.error_probability(K):.6g}",
                f"{capacity.gaussian_error_probability(N, K, n):.6g}",
            ])
    _write_csv(os.path.join(run_dir, "theory.csv"), header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(str(v) for v in row))
    return EXIT_SUCCESS


def _dynamics_options(args):
    return dict(
        max_sweeps=args.max_sweeps,
        update_order=args.update_order,
        threads=args.threads,
        chunk_size=args.chunk_size,
    )


def _hist(args, run_dir):
    """
    Runs the recovery trials of every grid cell and writes one
    `overlap,count` file per cell.
    """
    grid = capacity.TrialGrid(args.N, args.K, args.n, args.trials, args.seed, args.kind)
    histograms = capacity.run_grid(grid, **_dynamics_options(args))
    print("N,K,n,kind,trials,perfect_fraction,mode,nonconverged")
    for h in histograms:
        h.to_csv(os.path.join(run_dir, f"hist_N{h.N}_K{h.K}_n{h.n}_{h.kind.value}.csv"))
        print(f"{h.N},{h.K},{h.n},{h.kind.value},{h.total},{h.perfect_fraction:.4f},{h.mode},{h.nonconverged}")
    return EXIT_FAILURE if any(h.nonconverged for h in histograms) else EXIT_SUCCESS


def _khalf(args, run_dir):
    """
    Searches K_1/2 for every (N, n) and writes `N,n,kind,k_half,fraction_at_khalf`.
    """
    header = ["N", "n", "kind", "k_half", "fraction_at_khalf"]
    rows = []
    for n in args.n:
        for N in args.N:
            result = capacity.find_k_half(
                N, n, args.kind, args.trials, args.seed,
                k_bound=args.k_bound or None,
                **_dynamics_options(args))
            if result.saturated:
                tf.get_logger().warning(f"K_1/2 search saturated at K={result.k_half} for N={N}, n={n}")
            rows.append([N, n, result.kind.value, result.k_half, f"{result.fraction:.4f}"])
    _write_csv(os.path.join(run_dir, "khalf.csv"), header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(str(v) for v in row))
    return EXIT_SUCCESS


def _run(args, run_dir):
    return {"theory": _theory, "hist": _hist, "khalf": _khalf}[args.mode](args, run_dir)


def main(argv=None):
    return run_command("capacity", cfg, _run, argv)


if __name__ == "__main__":
    sys.exit(main())
