#!/usr/bin/env python3

"""
Prints the error rate of a checkpoint on a labeled image set.
"""

__author__ = "Jon Kyl"


import os
import sys

import tensorflow as tf
import densemem

from densemem.scripts import EXIT_SUCCESS, run_command

cfg = densemem.config.evaluate


def _run(args, run_dir):
    model, _ = densemem.load_checkpoint(args.checkpoint)
    dataset = densemem.load_labeled_images(args.images, args.labels, num_classes=model.num_classes)
    error = densemem.evaluate(model, dataset)
    with tf.io.gfile.GFile(os.path.join(run_dir, "evaluation.csv"), "w") as f:
        f.write("images,error\n")
        f.write(f"{len(dataset)},{error:.6f}\n")
    print(f"{error:.6f}")
    return EXIT_SUCCESS


def main(argv=None):
    return run_command("eval", cfg, _run, argv)


if __name__ == "__main__":
    sys.exit(main())
