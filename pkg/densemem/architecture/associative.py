"""
The classifier in its associative-memory form: visible units clamped to
an image, classification units initialized at x, and one update of each
classification unit, c_alpha = tanh(beta sum_mu [F(xi^mu . V^alpha) - F(xi^mu . U^alpha)]).

Examples and classes are fused into one column index alpha * M + A, so
the whole minibatch is two matrix products.
"""

import tensorflow as tf

from typing import NamedTuple, Tuple

from ..energy import EnergyModel, as_float64, eval_F, eval_f, ipow


class MinibatchTensors(NamedTuple):
    """
    U and V are (N + N_c) x (M N_c). Their visible rows both hold the
    images; on the classification rows U is x everywhere and V differs
    from U only in row alpha of block alpha, where it holds -x.
    `targets` are the +-1 targets in the same fused column order.
    """
    U: tf.Tensor
    V: tf.Tensor
    targets: tf.Tensor
    batch_size: int
    num_classes: int


def build_minibatch_tensors(
    images,
    targets=None,
    *,
    num_classes: int,
    x_init: float = -1.0,
) -> MinibatchTensors:
    """
    Builds U and V for M images (M x N) and optional +-1 targets (M x N_c).
    """
    images = as_float64(images)
    M = tf.shape(images)[0]

    # Tile the images once per classification unit: column alpha * M + A holds image A.
    visible = tf.tile(tf.transpose(images), [1, num_classes])

    # Classification rows: every unit at x, except unit alpha flipped in block alpha.
    flipped = tf.repeat(tf.eye(num_classes, dtype=tf.float64), M, axis=1)
    U_classes = x_init * tf.ones_like(flipped)
    V_classes = U_classes - 2.0 * x_init * flipped

    if targets is None:
        fused_targets = tf.zeros([M * num_classes], dtype=tf.float64)
    else:
        fused_targets = tf.reshape(tf.transpose(as_float64(targets)), [-1])
    return MinibatchTensors(
        U=tf.concat([visible, U_classes], axis=0),
        V=tf.concat([visible, V_classes], axis=0),
        targets=fused_targets,
        batch_size=M,
        num_classes=num_classes,
    )


def _unfuse(fused: tf.Tensor, batch: MinibatchTensors) -> tf.Tensor:
    return tf.transpose(tf.reshape(fused, [batch.num_classes, batch.batch_size]))


def channel_gap_terms(
    memories: tf.Tensor,
    images,
    channels,
    *,
    num_visible: int,
    energy: EnergyModel,
    beta: float,
) -> tf.Tensor:
    """
    Contribution of every memory to the update of one classification unit
    per image, beta [F(xi . V) - F(xi . U)] with x = -1, M x K.
    """
    memories = as_float64(memories)
    images = as_float64(images)
    num_classes = memories.shape[1] - num_visible
    off = -tf.ones([tf.shape(images)[0], num_classes], dtype=tf.float64)
    on = off + 2.0 * tf.one_hot(channels, num_classes, dtype=tf.float64)
    U = tf.concat([images, off], axis=1)
    V = tf.concat([images, on], axis=1)
    return beta * tf.transpose(
        eval_F(memories @ tf.transpose(V), energy) - eval_F(memories @ tf.transpose(U), energy))


def associative_outputs(
    memories: tf.Tensor,
    batch: MinibatchTensors,
    *,
    energy: EnergyModel,
    beta: float,
    fused: bool = False,
) -> tf.Tensor:
    """
    Returns the outputs c, M x N_c (or fused, length M N_c).
    """
    memories = as_float64(memories)
    c = tf.tanh(beta * tf.reduce_sum(
        eval_F(memories @ batch.V, energy) - eval_F(memories @ batch.U, energy), axis=0))
    return c if fused else _unfuse(c, batch)


def forward_backward(
    memories: tf.Tensor,
    batch: MinibatchTensors,
    *,
    energy: EnergyModel,
    beta: float,
    loss_power: int,
) -> Tuple[tf.Tensor, tf.Tensor]:
    """
    Returns the outputs (M x N_c) together with the gradient of
    sum (c - t)^(2m) with respect to every memory weight, K x (N + N_c):
    2 m beta sum (c - t)^(2m-1) (1 - c^2) [f(xi . V) V - f(xi . U) U].
    """
    memories = as_float64(memories)
    XV = memories @ batch.V
    XU = memories @ batch.U
    c = tf.tanh(beta * tf.reduce_sum(eval_F(XV, energy) - eval_F(XU, energy), axis=0))
    delta = 2 * loss_power * beta * ipow(c - batch.targets, 2 * loss_power - 1) * (1 - c * c)
    gradient = (
        (eval_f(XV, energy) * delta) @ tf.transpose(batch.V)
        - (eval_f(XU, energy) * delta) @ tf.transpose(batch.U))
    return _unfuse(c, batch), gradient


def associative_gradient(
    memories: tf.Tensor,
    batch: MinibatchTensors,
    *,
    energy: EnergyModel,
    beta: float,
    loss_power: int,
) -> tf.Tensor:
    """
    Gradient of sum (c - t)^(2m) with respect to every memory weight, K x (N + N_c).
    """
    _, gradient = forward_backward(memories, batch, energy=energy, beta=beta, loss_power=loss_power)
    return gradient


def recurrent_outputs(
    memories: tf.Tensor,
    images,
    *,
    num_classes: int,
    energy: EnergyModel,
    beta: float,
    steps: int = 1,
) -> tf.Tensor:
    """
    Repeats the update of the classification units `steps` times. Each step
    compares unit alpha on (+1) against off (-1) with the other units held at
    their previous outputs; the first step starts from all units off.
    """
    memories = as_float64(memories)
    images = as_float64(images)
    M = tf.shape(images)[0]
    visible = tf.tile(tf.transpose(images), [1, num_classes])
    flipped = tf.repeat(tf.eye(num_classes, dtype=tf.float64), M, axis=1)
    state = -tf.ones([M, num_classes], dtype=tf.float64)
    for _ in range(steps):
        held = tf.tile(tf.transpose(state), [1, num_classes]) * (1 - flipped)
        on = tf.concat([visible, held + flipped], axis=0)
        off = tf.concat([visible, held - flipped], axis=0)
        fused = tf.tanh(beta * tf.reduce_sum(
            eval_F(memories @ on, energy) - eval_F(memories @ off, energy), axis=0))
        state = tf.transpose(tf.reshape(fused, [num_classes, M]))
    return state
