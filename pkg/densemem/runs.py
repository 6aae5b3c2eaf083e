"""
Run directories and provenance records.
"""

import datetime
import hashlib
import json
import os
import platform

import numpy as np
import tensorflow as tf

from typing import Optional


OUTPUT_PATH_VARIABLE = "DENSEMEM_OUTPUT_PATH"


def _jsonable(config) -> dict:
    values = vars(config) if not isinstance(config, dict) else config
    return {key: values[key] for key in sorted(values)}


def config_hash(config) -> str:
    """
    A short digest of the resolved configuration.
    """
    encoded = json.dumps(_jsonable(config), sort_keys=True, default=str).encode()
    return hashlib.sha256(encoded).hexdigest()[:12]


def make_run_dir(command: str, config, output_path: Optional[str] = None) -> str:
    """
    Creates `<output_path>/<command>-<config hash>/`. The output path falls
    back to $DENSEMEM_OUTPUT_PATH, then to `runs`.
    """
    root = output_path or os.environ.get(OUTPUT_PATH_VARIABLE) or "runs"
    run_dir = os.path.join(root, f"{command}-{config_hash(config)}")
    tf.io.gfile.makedirs(run_dir)
    return run_dir


def write_provenance(run_dir: str, command: str, config) -> dict:
    """
    Appends one JSON line naming the command, its resolved configuration
    and the versions it ran with to `provenance.jsonl`.
    """
    from . import __version__

    record = {
        "command": command,
        "config": _jsonable(config),
        "seed": _jsonable(config).get("seed"),
        "versions": {
            "densemem": __version__,
            "numpy": np.__version__,
            "tensorflow": tf.__version__,
            "python": platform.python_version(),
        },
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with tf.io.gfile.GFile(os.path.join(run_dir, "provenance.jsonl"), "a") as f:
        f.write(json.dumps(record, sort_keys=True, default=str) + "\n")
    return record
