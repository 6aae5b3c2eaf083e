import csv
import enum
import math
import os
import struct

import numpy as np
import tensorflow as tf

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .architecture import associative, dual
from .architecture.dual import Convention
from .data import LabeledImageSet, minibatches, one_hot_targets
from .energy import EnergyKind, EnergyModel, as_float64, ipow
from .errors import CheckpointFormatError, ShapeMismatchError, TrainingDivergedError
from .config import train as cfg


logger = tf.get_logger()

CHECKPOINT_MAGIC = b"DAM1"
CHECKPOINT_VERSION = 1
METRICS_HEADER = ("epoch", "train_err", "val_err", "test_err", "lr", "T")

# magic, version, kind, n, K, N, N_c, beta, m, framing
_HEADER = struct.Struct("<4s6IdII")
_KIND_CODES = {EnergyKind.POLYNOMIAL: 0, EnergyKind.RECTIFIED: 1}
_INIT_STREAM = 3
_EVAL_CHUNK = 500


class Framing(enum.Enum):
    DUAL = "dual"
    ASSOCIATIVE = "associative"


_FRAMING_CODES = {Framing.DUAL: 0, Framing.ASSOCIATIVE: 1}


class ClassifierModel(tf.keras.Model):
    """
    A dense associative memory over N visible and N_c classification
    units. Row mu of `memories` holds xi^mu_i for the visible units
    followed by xi^mu_alpha for the classification units.
    """
    def __init__(
        self,
        weights,
        *,
        num_visible: int,
        energy: EnergyModel,
        beta: float,
        framing: Union[Framing, str] = Framing.DUAL,
        name: Optional[str] = None,
    ):
        super().__init__(name=name, dtype="float64")
        weights = as_float64(weights)
        if weights.shape.rank != 2 or weights.shape[1] <= num_visible:
            raise ShapeMismatchError(
                f"weights must be K x (N + N_c) with N = {num_visible}, got shape {weights.shape}")
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.num_visible = int(num_visible)
        self.energy = energy
        self.framing = Framing(framing)

        # Updated by `train_step` and the schedule, never by an optimizer.
        self.memories = tf.Variable(weights, trainable=False, name="memories")
        self.velocity = tf.Variable(tf.zeros_like(weights), trainable=False, name="velocity")
        self._beta = tf.Variable(float(beta), dtype=tf.float64, trainable=False, name="beta")
        self._learning_rate = tf.Variable(
            cfg.defaults.eps0, dtype=tf.float64, trainable=False, name="learning_rate")

        self.error_tracker = tf.keras.metrics.Mean(name="train_err", dtype="float64")
        self.loss_tracker = tf.keras.metrics.Sum(name="loss", dtype="float64")
        self.loss_power = cfg.defaults.m
        self.momentum = cfg.defaults.momentum
        self.built = True

    @property
    def num_memories(self) -> int:
        return self.memories.shape[0]

    @property
    def num_classes(self) -> int:
        return self.memories.shape[1] - self.num_visible

    @property
    def visible(self) -> tf.Tensor:
        return self.memories[:, :self.num_visible]

    @property
    def recognition(self) -> tf.Tensor:
        return self.memories[:, self.num_visible:]

    @property
    def beta(self) -> float:
        return float(self._beta.numpy())

    @property
    def temperature(self) -> float:
        return self.beta ** (-1.0 / self.energy.power)

    def set_temperature(self, T: float):
        self._beta.assign(beta_from_temperature(T, self.energy.power))

    @property
    def learning_rate(self) -> float:
        return float(self._learning_rate.numpy())

    def set_learning_rate(self, lr: float):
        self._learning_rate.assign(lr)

    @property
    def metrics(self) -> List[tf.keras.metrics.Metric]:
        return [self.error_tracker, self.loss_tracker]

    def compile(
        self,
        *,
        loss_power: int = cfg.defaults.m,
        momentum: float = cfg.defaults.momentum,
    ):
        """
        Sets the objective power and the momentum used by `train_step`.
        """
        super().compile(jit_compile=False)
        self.loss_power = int(loss_power)
        self.momentum = float(momentum)

    def _as_batch(self, images) -> Tuple[tf.Tensor, bool]:
        images = as_float64(images)
        single = images.shape.rank == 1
        if single:
            images = images[tf.newaxis]
        if images.shape.rank != 2 or images.shape[1] != self.num_visible:
            raise ShapeMismatchError(
                f"expected images with {self.num_visible} pixels, got shape {images.shape}")
        return images, single

    def forward_am(self, images, x_init: float = -1.0) -> tf.Tensor:
        """
        One update of every classification unit with the visible units
        clamped to `images` and the classification units started at `x_init`.
        """
        images, single = self._as_batch(images)
        batch = associative.build_minibatch_tensors(
            images, num_classes=self.num_classes, x_init=x_init)
        c = associative.associative_outputs(
            self.memories, batch, energy=self.energy, beta=self._beta)
        return c[0] if single else c

    def forward_dual(self, images, convention: Union[Convention, str] = Convention.TRAINING) -> tf.Tensor:
        """
        The feedforward dual network.
        """
        images, single = self._as_batch(images)
        c = dual.dual_outputs(
            self.memories, images,
            num_visible=self.num_visible,
            energy=self.energy,
            beta=self._beta,
            convention=Convention(convention),
        )
        return c[0] if single else c

    def classify_recurrent(self, images, steps: int = 1) -> tf.Tensor:
        """
        Refines the classification units over `steps` updates.
        """
        if steps < 1:
            raise ValueError(f"steps must be >= 1, got {steps}")
        images, single = self._as_batch(images)
        c = associative.recurrent_outputs(
            self.memories, images,
            num_classes=self.num_classes,
            energy=self.energy,
            beta=self._beta,
            steps=steps,
        )
        return c[0] if single else c

    def call(self, images) -> tf.Tensor:
        images, single = self._as_batch(images)
        forward = self.forward_dual if self.framing is Framing.DUAL else self.forward_am
        c = tf.concat([
            forward(images[start:start + _EVAL_CHUNK])
            for start in range(0, max(images.shape[0], 1), _EVAL_CHUNK)], axis=0)
        return c[0] if single else c

    def predict(self, images) -> np.ndarray:
        """
        The index of the classification unit with the largest output.
        """
        return np.argmax(self(images).numpy(), axis=-1)

    def outputs_and_gradient(self, images, targets, loss_power: int) -> Tuple[tf.Tensor, tf.Tensor]:
        """
        Outputs (M x N_c) and the gradient of the objective with respect to
        `memories` (K x (N + N_c)) in the model's framing.
        """
        images, _ = self._as_batch(images)
        if self.framing is Framing.DUAL:
            c, grad_visible, grad_recognition = dual.forward_backward(
                self.memories, images, targets,
                num_visible=self.num_visible,
                energy=self.energy,
                beta=self._beta,
                loss_power=loss_power,
            )
            return c, tf.concat([grad_visible, grad_recognition], axis=1)
        batch = associative.build_minibatch_tensors(images, targets, num_classes=self.num_classes)
        return associative.forward_backward(
            self.memories, batch, energy=self.energy, beta=self._beta, loss_power=loss_power)

    @tf.function
    def train_step(self, data: Tuple[tf.Tensor, tf.Tensor]) -> Dict[str, tf.Tensor]:
        """
        One momentum step on a minibatch of images and their +-1 targets.
        A non-finite objective leaves the weights and velocity untouched.
        """
        images, targets = data
        targets = as_float64(targets)
        outputs, gradient = self.outputs_and_gradient(images, targets, self.loss_power)
        batch_loss = loss(outputs, targets, self.loss_power)

        memories, velocity = momentum_step(
            self.memories, self.velocity, gradient,
            learning_rate=self._learning_rate, momentum=self.momentum)
        finite = tf.math.is_finite(batch_loss)
        self.memories.assign(tf.where(finite, memories, self.memories))
        self.velocity.assign(tf.where(finite, velocity, self.velocity))

        wrong = tf.not_equal(tf.argmax(outputs, axis=1), tf.argmax(targets, axis=1))
        self.error_tracker.update_state(tf.cast(wrong, tf.float64))
        self.loss_tracker.update_state(batch_loss)
        return {m.name: m.result() for m in self.metrics}

    def gap_terms(self, images, channels) -> tf.Tensor:
        """
        Contribution of every memory to the output unit `channels[A]` of
        every image A, M x K, in the model's framing.
        """
        images, _ = self._as_batch(images)
        kernel = dual.channel_gap_terms if self.framing is Framing.DUAL else associative.channel_gap_terms
        return kernel(
            self.memories, images, tf.convert_to_tensor(channels, dtype=tf.int64),
            num_visible=self.num_visible, energy=self.energy, beta=self._beta)


@dataclass(frozen=True)
class TrainConfig:
    loss_power: int = cfg.defaults.m
    epochs: int = cfg.defaults.epochs
    eps0: float = cfg.defaults.eps0
    decay: float = cfg.defaults.decay
    momentum: float = cfg.defaults.momentum
    T_initial: float = cfg.defaults.T_initial
    T_final: float = cfg.defaults.T_final
    anneal_epochs: int = cfg.defaults.anneal_epochs
    per_class: int = cfg.defaults.per_class
    seed: int = 0
    strict_windows: bool = False

    def __post_init__(self):
        if self.loss_power < 1:
            raise ValueError(f"loss power m must be >= 1, got {self.loss_power}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if not 0 < self.decay <= 1:
            raise ValueError(f"decay must lie in (0, 1], got {self.decay}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.strict_windows and not 0.6 <= self.momentum <= 0.95:
            raise ValueError(f"momentum {self.momentum} outside the window [0.6, 0.95]")
        if self.strict_windows and not 0.01 <= self.eps0 <= 0.04:
            raise ValueError(f"learning rate {self.eps0} outside the window [0.01, 0.04]")
        if self.eps0 <= 0 or self.T_initial <= 0 or self.T_final <= 0:
            raise ValueError("eps0 and both temperatures must be positive")


@dataclass
class EpochMetrics:
    epoch: int
    train_err: float
    val_err: float
    test_err: float
    lr: float
    T: float
    loss: float


_EPOCH_KEYS = ("train_err", "val_err", "test_err", "lr", "T", "loss")


def learning_rate(epoch: int, eps0: float, decay: float = cfg.defaults.decay) -> float:
    return eps0 * decay ** epoch


def temperature(
    epoch: int,
    T_initial: float,
    T_final: float,
    anneal_epochs: int = cfg.defaults.anneal_epochs,
) -> float:
    """
    Linear ramp from T_initial to T_final over the first `anneal_epochs`
    epochs, constant afterwards.
    """
    if anneal_epochs <= 0 or epoch >= anneal_epochs:
        return float(T_final)
    return T_initial + (T_final - T_initial) * epoch / anneal_epochs


def beta_from_temperature(T: float, n: int) -> float:
    if T <= 0:
        raise ValueError(f"temperature must be positive, got {T}")
    return 1.0 / T ** n


def loss(c, t, m: int) -> tf.Tensor:
    """
    The objective sum (c - t)^(2m) over classes and examples.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return tf.reduce_sum(ipow(as_float64(c) - as_float64(t), 2 * m))


def momentum_step(memories, velocity, gradient, *, learning_rate, momentum) -> Tuple[tf.Tensor, tf.Tensor]:
    """
    Momentum step V <- pV - grad, then moves each memory by learning_rate
    times V normalized by its largest entry, clipped to [-1, 1].
    Returns the new memories and velocity.
    """
    velocity = momentum * as_float64(velocity) - as_float64(gradient)
    scale = tf.reduce_max(tf.abs(velocity), axis=1, keepdims=True)
    # An all-zero velocity row leaves its memory where it is.
    step = tf.math.divide_no_nan(velocity, scale)
    return tf.clip_by_value(as_float64(memories) + learning_rate * step, -1.0, 1.0), velocity


def apply_update(
    model: ClassifierModel,
    velocity: tf.Tensor,
    gradient: tf.Tensor,
    *,
    learning_rate: float,
    momentum: float,
) -> tf.Tensor:
    """
    Applies `momentum_step` to the model's weights. Returns the new velocity.
    """
    memories, velocity = momentum_step(
        model.memories, velocity, gradient, learning_rate=learning_rate, momentum=momentum)
    model.memories.assign(memories)
    return velocity


def build_model(
    *,
    num_visible: int,
    num_classes: int,
    K: int = cfg.defaults.K,
    n: int = cfg.defaults.n,
    kind: Union[EnergyKind, str] = cfg.defaults.kind,
    framing: Union[Framing, str] = cfg.defaults.framing,
    T_initial: float = cfg.defaults.T_initial,
    init_mean: float = cfg.defaults.init_mean,
    init_std: float = cfg.defaults.init_std,
    seed: int = 0,
    checkpoint: Optional[str] = None,
) -> ClassifierModel:
    """
    Builds a model with Gaussian weights clipped to [-1, 1], or restores
    one from a checkpoint.
    """
    if checkpoint is not None:
        model, _ = load_checkpoint(checkpoint)
        return model
    energy = EnergyModel(n, kind)
    weights = tf.random.stateless_normal(
        [K, num_visible + num_classes],
        seed=[seed, _INIT_STREAM],
        mean=init_mean,
        stddev=init_std,
        dtype=tf.float64,
    )
    return ClassifierModel(
        tf.clip_by_value(weights, -1.0, 1.0),
        num_visible=num_visible,
        energy=energy,
        beta=beta_from_temperature(T_initial, n),
        framing=framing,
    )


def evaluate(model: ClassifierModel, dataset: Optional[LabeledImageSet]) -> float:
    """
    Fraction of images whose largest output is not their label.
    NaN for a missing or empty dataset.
    """
    if dataset is None or len(dataset) == 0:
        return math.nan
    return float(np.mean(model.predict(dataset.images) != dataset.labels))


def minibatch_dataset(
    dataset: LabeledImageSet,
    config: TrainConfig,
    initial_epoch: int = 0,
) -> tf.data.Dataset:
    """
    The stratified minibatches of every remaining epoch, in order, as
    (images, +-1 targets) pairs.
    """
    def generate():
        for epoch in range(initial_epoch, config.epochs):
            for images, labels in minibatches(
                    dataset, per_class=config.per_class, seed=config.seed, epoch=epoch):
                yield images, one_hot_targets(labels, dataset.num_classes)

    return tf.data.Dataset.from_generator(
        generate,
        output_signature=(
            tf.TensorSpec([None, dataset.num_visible], tf.float64),
            tf.TensorSpec([None, dataset.num_classes], tf.float64),
        ),
    )


def train_model(
    *,
    model: ClassifierModel,
    dataset: LabeledImageSet,
    config: TrainConfig = TrainConfig(),
    validation: Optional[LabeledImageSet] = None,
    test: Optional[LabeledImageSet] = None,
    callbacks: Sequence[tf.keras.callbacks.Callback] = (),
    initial_epoch: int = 0,
) -> Tuple[ClassifierModel, List[EpochMetrics]]:
    """
    Trains the model on stratified minibatches with the momentum rule,
    the per-epoch learning rate decay and the temperature schedule.
    """
    if dataset.num_visible != model.num_visible or dataset.num_classes != model.num_classes:
        raise ShapeMismatchError(
            f"dataset is {dataset.num_visible} x {dataset.num_classes}, "
            f"model is {model.num_visible} x {model.num_classes}")
    steps = int(np.bincount(dataset.labels, minlength=dataset.num_classes).min()) // config.per_class
    if not steps and initial_epoch < config.epochs:
        raise ValueError(f"no class has {config.per_class} training examples for a minibatch")

    model.compile(loss_power=config.loss_power, momentum=config.momentum)
    model.velocity.assign(tf.zeros_like(model.memories))

    # The schedule and error rates fill the epoch logs before user callbacks read them.
    history = model.fit(
        minibatch_dataset(dataset, config, initial_epoch),
        epochs=config.epochs,
        initial_epoch=initial_epoch,
        steps_per_epoch=max(steps, 1),
        callbacks=[
            AnnealingSchedule(config),
            ErrorRates(validation, test, epochs=config.epochs),
            DivergenceGuard(),
            *callbacks,
        ],
        verbose=0,
    )
    return model, [
        EpochMetrics(epoch=epoch + 1, **{key: float(history.history[key][i]) for key in _EPOCH_KEYS})
        for i, epoch in enumerate(history.epoch)]


def save_checkpoint(model: ClassifierModel, path: str, *, loss_power: int = cfg.defaults.m):
    """
    Writes a DAM1 checkpoint: a little-endian header followed by the
    K x (N + N_c) weights as row-major float64.
    """
    header = _HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        _KIND_CODES[model.energy.kind],
        model.energy.power,
        model.num_memories,
        model.num_visible,
        model.num_classes,
        model.beta,
        loss_power,
        _FRAMING_CODES[model.framing],
    )
    weights = np.ascontiguousarray(model.memories.numpy(), dtype="<f8")
    with tf.io.gfile.GFile(path, "wb") as f:
        f.write(header + weights.tobytes())


def load_checkpoint(path: str) -> Tuple[ClassifierModel, int]:
    """
    Reads a DAM1 checkpoint. Returns the model and the loss power m it was trained with.
    """
    with tf.io.gfile.GFile(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise CheckpointFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, kind, n, K, N, num_classes, beta, m, framing = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    kinds = {code: kind for kind, code in _KIND_CODES.items()}
    framings = {code: framing for framing, code in _FRAMING_CODES.items()}
    if kind not in kinds or framing not in framings:
        raise CheckpointFormatError(f"{path}: unknown energy kind {kind} or framing {framing}")
    expected = _HEADER.size + 8 * K * (N + num_classes)
    if len(data) != expected:
        raise CheckpointFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    weights = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(K, N + num_classes)
    if not np.all(np.abs(weights) <= 1.0):
        raise CheckpointFormatError(f"{path}: weights outside [-1, 1]")
    try:
        model = ClassifierModel(
            weights,
            num_visible=N,
            energy=EnergyModel(n, kinds[kind]),
            beta=beta,
            framing=framings[framing],
        )
    except ValueError as e:
        raise CheckpointFormatError(f"{path}: {e}") from e
    return model, m


def export_weights_csv(model: ClassifierModel, path: str):
    """
    Writes one row per memory: its index, visible weights, then recognition weights.
    """
    header = (
        ["memory"]
        + [f"v{i}" for i in range(model.num_visible)]
        + [f"c{a}" for a in range(model.num_classes)])
    with tf.io.gfile.GFile(path, "w") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for mu, row in enumerate(model.memories.numpy()):
            writer.writerow([mu] + [repr(float(w)) for w in row])


def _format_error(value: float) -> str:
    return "" if math.isnan(value) else f"{value:.6f}"


class AnnealingSchedule(tf.keras.callbacks.Callback):
    """
    Sets the learning rate and the temperature at the start of every epoch.
    """
    def __init__(self, config: TrainConfig):
        super().__init__()
        self.config = config

    def on_epoch_begin(self, epoch, logs=None):
        config = self.config
        self.model.set_learning_rate(learning_rate(epoch, config.eps0, config.decay))
        self.model.set_temperature(
            temperature(epoch, config.T_initial, config.T_final, config.anneal_epochs))

    def on_epoch_end(self, epoch, logs=None):
        logs["lr"] = self.model.learning_rate
        logs["T"] = self.model.temperature


class ErrorRates(tf.keras.callbacks.Callback):
    """
    Adds the validation and test error to the epoch logs.
    """
    def __init__(
        self,
        validation: Optional[LabeledImageSet],
        test: Optional[LabeledImageSet],
        *,
        epochs: int,
    ):
        super().__init__()
        self.validation = validation
        self.test = test
        self.epochs = epochs

    def on_epoch_end(self, epoch, logs=None):
        logs["val_err"] = evaluate(self.model, self.validation)
        logs["test_err"] = evaluate(self.model, self.test)
        logger.info(
            f"epoch {epoch + 1}/{self.epochs}: train {logs['train_err']:.4f} "
            f"val {logs['val_err']:.4f} test {logs['test_err']:.4f} "
            f"lr {logs['lr']:.5g} T {logs['T']:.4g}")


class DivergenceGuard(tf.keras.callbacks.Callback):
    """
    Stops training with a snapshot once the running objective is NaN or infinite.
    """
    def on_epoch_begin(self, epoch, logs=None):
        self.epoch = epoch + 1

    def on_train_batch_end(self, batch, logs=None):
        epoch_loss = float(logs["loss"])
        if math.isfinite(epoch_loss):
            return
        model = self.model
        weights = model.memories.numpy()
        raise TrainingDivergedError(
            f"objective is {epoch_loss} at epoch {self.epoch}, batch {batch}",
            {
                "epoch": self.epoch,
                "batch": batch,
                "lr": model.learning_rate,
                "T": model.temperature,
                "beta": model.beta,
                "loss": epoch_loss,
                "max_abs_weight": float(np.nanmax(np.abs(weights))),
                "nonfinite_weights": int(np.sum(~np.isfinite(weights))),
                "max_abs_velocity": float(np.nanmax(np.abs(model.velocity.numpy()))),
            })


class MetricsCSVLogger(tf.keras.callbacks.Callback):
    """
    Appends `epoch,train_err,val_err,test_err,lr,T` after every epoch, with
    1-based epochs and empty cells for missing error rates.
    """
    def __init__(self, path: str):
        super().__init__()
        self.path = path

    def on_train_begin(self, logs=None):
        if not tf.io.gfile.exists(self.path):
            with tf.io.gfile.GFile(self.path, "w") as f:
                f.write(",".join(METRICS_HEADER) + "\n")

    def on_epoch_end(self, epoch, logs=None):
        row = [
            str(epoch + 1),
            _format_error(logs["train_err"]),
            _format_error(logs["val_err"]),
            _format_error(logs["test_err"]),
            f"{logs['lr']:.10g}",
            f"{logs['T']:.10g}",
        ]
        with tf.io.gfile.GFile(self.path, "a") as f:
            f.write(",".join(row) + "\n")


class DAMCheckpoint(tf.keras.callbacks.Callback):
    """
    Saves `ckpt_<epoch>.dam` every `every` epochs and `model.dam` at the end.
    """
    def __init__(self, model_path: str, *, loss_power: int, every: int = 0):
        super().__init__()
        self.model_path = model_path
        self.loss_power = loss_power
        self.every = every

    def on_epoch_end(self, epoch, logs=None):
        if self.every and (epoch + 1) % self.every == 0:
            path = os.path.join(self.model_path, f"ckpt_{epoch + 1}.dam")
            save_checkpoint(self.model, path, loss_power=self.loss_power)

    def on_train_end(self, logs=None):
        save_checkpoint(self.model, os.path.join(self.model_path, "model.dam"), loss_power=self.loss_power)


def create_callbacks(
    model_path: str,
    *,
    loss_power: int = cfg.defaults.m,
    checkpoint_every: int = cfg.defaults.checkpoint_every,
) -> List[tf.keras.callbacks.Callback]:
    """
    Creates the callbacks that handle checkpointing and logging.
    """
    return [
        MetricsCSVLogger(os.path.join(model_path, "metrics.csv")),
        tf.keras.callbacks.TensorBoard(log_dir=model_path, write_graph=False, profile_batch=0),
        DAMCheckpoint(model_path, loss_power=loss_power, every=checkpoint_every),
    ]
