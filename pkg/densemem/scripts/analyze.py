#!/usr/bin/env python3

"""
Feature and prototype diagnostics of a trained checkpoint.
"""

__author__ = "Jon Kyl"


import os
import sys

import densemem

from densemem import analysis
from densemem.scripts import EXIT_SUCCESS, run_command

cfg = densemem.config.analyze


def _run(args, run_dir):
    """
    Writes the requested histograms, memory images and curve summary.
    """
    if not (args.votes or args.contrib or args.weights or args.memories or args.curve):
        raise ValueError("nothing to do: pass --votes, --contrib, --weights, --memories or --curve")
    model, _ = densemem.load_checkpoint(args.checkpoint)

    if args.votes:
        votes = analysis.votes_per_memory(model, args.cutoff)
        analysis.write_histogram_csv(votes.counts, os.path.join(run_dir, "votes.csv"))
        print(f"votes per memory (cutoff {args.cutoff}): mean {analysis.mean_votes(votes):.4f}")

    if args.contrib:
        if not (args.images and args.labels):
            raise ValueError("--contrib needs --images and --labels")
        dataset = densemem.load_labeled_images(args.images, args.labels, num_classes=model.num_classes)
        contributions = analysis.dominant_contributions(model, dataset, args.band, channel=args.channel)
        analysis.write_histogram_csv(contributions.counts, os.path.join(run_dir, "contributions.csv"))
        print(f"images decided by a single memory (band {args.band}, {args.channel} class): "
              f"{analysis.single_dominant_fraction(contributions):.4f}")

    if args.weights:
        densemem.export_weights_csv(model, os.path.join(run_dir, "weights.csv"))
        print(f"exported the weights of {model.num_memories} memories")

    if args.memories:
        indices = [int(i) for i in args.memories]
        analysis.export_memory_images(model, indices, os.path.join(run_dir, "memories"))
        print(f"exported {len(indices)} memories")

    if args.curve:
        metrics = analysis.read_metrics_csv(args.curve)
        column = "test_err" if any(m.test_err == m.test_err for m in metrics) else "val_err"
        crossing = analysis.export_training_curve(
            metrics, os.path.join(run_dir, "curve.csv"), threshold=args.curve_threshold, column=column)
        print(f"first epoch with {column} below {args.curve_threshold}: {crossing}")
    return EXIT_SUCCESS


def main(argv=None):
    return run_command("analyze", cfg, _run, argv)


if __name__ == "__main__":
    sys.exit(main())
