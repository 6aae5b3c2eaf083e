"""
Plumbing shared by the console scripts: configuration, run directories,
provenance and the exit status contract.
"""

import json
import os

import tensorflow as tf

from typing import Callable, Optional, Sequence

from ..config import parse_run_config
from ..errors import CheckpointFormatError, IDXFormatError, TrainingDivergedError
from ..runs import make_run_dir, write_provenance


logger = tf.get_logger()

EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def limit_threads(threads: int):
    """
    Caps the TensorFlow thread pools at `threads`. The caps only take
    effect before the runtime starts; afterwards they are left as they are.
    """
    try:
        tf.config.threading.set_intra_op_parallelism_threads(threads)
        tf.config.threading.set_inter_op_parallelism_threads(threads)
    except RuntimeError as e:
        logger.warning(f"cannot cap TensorFlow at {threads} threads: {e}")


def run_command(
    command: str,
    parser,
    body: Callable[..., int],
    argv: Optional[Sequence[str]] = None,
) -> int:
    """
    Parses the configuration, records provenance in a fresh run directory
    and calls `body(args, run_dir)`, mapping failures onto exit statuses:
    1 for failed acceptance checks or divergence, 2 for bad input.
    """
    args = parse_run_config(parser, argv)
    limit_threads(args.threads)
    tf.config.experimental.enable_op_determinism()
    run_dir = make_run_dir(command, args, args.output_path)
    write_provenance(run_dir, command, args)
    logger.info(f"{command}: writing to {run_dir}")
    try:
        return body(args, run_dir)
    except TrainingDivergedError as e:
        logger.error(str(e))
        with tf.io.gfile.GFile(os.path.join(run_dir, "divergence.json"), "w") as f:
            f.write(json.dumps(e.snapshot, sort_keys=True) + "\n")
        return EXIT_FAILURE
    except (IDXFormatError, CheckpointFormatError, ValueError, OSError, tf.errors.OpError) as e:
        logger.error(str(e))
        return EXIT_USAGE
