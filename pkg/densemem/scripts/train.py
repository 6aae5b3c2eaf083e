#!/usr/bin/env python3

"""
Trains a dense-memory classifier on IDX images.
"""

__author__ = "Jon Kyl"


import math
import os
import sys

import tensorflow as tf
import densemem

from densemem.analysis import export_training_curve
from densemem.data import SplitSpec
from densemem.model import create_callbacks
from densemem.scripts import EXIT_FAILURE, EXIT_SUCCESS, run_command

cfg = densemem.config.train
logger = tf.get_logger()


def _run(args, run_dir):
    """
    Loads and splits the data, builds a model, then trains the model on the data.
    """

    # Hold out a stratified validation set unless training on everything.
    dataset = densemem.load_labeled_images(args.images, args.labels)
    validation = None
    if args.validation:
        dataset, validation = densemem.split(
            dataset, SplitSpec(len(dataset) - args.validation, args.validation, args.seed))
    test = None
    if args.test_images and args.test_labels:
        test = densemem.load_labeled_images(args.test_images, args.test_labels)

    # Build the model.
    model = densemem.build_model(
        num_visible=dataset.num_visible,
        num_classes=dataset.num_classes,
        K=args.K,
        n=args.n,
        kind=args.kind,
        framing=args.framing,
        T_initial=args.T_initial,
        init_mean=args.init_mean,
        init_std=args.init_std,
        seed=args.seed,
    )
    config = densemem.TrainConfig(
        loss_power=args.m,
        epochs=args.epochs,
        eps0=args.eps0,
        decay=args.decay,
        momentum=args.momentum,
        T_initial=args.T_initial,
        T_final=args.T_final,
        anneal_epochs=args.anneal_epochs,
        per_class=args.per_class,
        seed=args.seed,
        strict_windows=args.strict_windows,
    )

    # Train the model, checkpointing and logging every epoch.
    _, history = densemem.train_model(
        model=model,
        dataset=dataset,
        config=config,
        validation=validation,
        test=test,
        callbacks=create_callbacks(run_dir, loss_power=args.m, checkpoint_every=args.checkpoint_every),
    )
    if not history:
        print(f"no epochs run; checkpoint at {os.path.join(run_dir, 'model.dam')}")
        return EXIT_SUCCESS

    column = "test_err" if test is not None else "val_err"
    crossing = export_training_curve(history, os.path.join(run_dir, "curve.csv"), column=column)
    final = history[-1]
    print(f"epochs {final.epoch}, train error {final.train_err:.4f}, "
          f"validation error {final.val_err:.4f}, test error {final.test_err:.4f}")
    print(f"first epoch with {column} below 0.02: {crossing}")

    if args.val_threshold is not None:
        inside = not math.isnan(final.val_err) and final.val_err <= args.val_threshold
        print(f"validation error {'inside' if inside else 'outside'} the window {args.val_threshold}")

    if args.max_test_error is not None:
        if test is None:
            logger.error("--max_test_error needs --test_images and --test_labels")
            return EXIT_FAILURE
        if final.test_err > args.max_test_error:
            logger.error(f"test error {final.test_err:.4f} exceeds {args.max_test_error}")
            return EXIT_FAILURE
    return EXIT_SUCCESS


def main(argv=None):
    return run_command("train", cfg, _run, argv)


if __name__ == "__main__":
    sys.exit(main())
