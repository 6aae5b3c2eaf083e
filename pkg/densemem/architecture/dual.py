"""
The feedforward dual of the one-step classifier: a single hidden layer
whose incoming weights are the visible parts of the memories and whose
outgoing weights are their recognition parts,

    c_alpha = tanh(beta sum_mu xi^mu_alpha a(sum_i xi^mu_i v_i)).
"""

import enum

import tensorflow as tf

from typing import Tuple

from ..energy import EnergyModel, as_float64, eval_F, eval_f, eval_f_prime, ipow


class Convention(enum.Enum):
    # a = F, the activation used for training (rectified power n).
    TRAINING = "training"
    # a = F', the exact small-epsilon limit of the associative form.
    DUALITY = "duality"


def _activation(h, energy: EnergyModel, convention: Convention):
    if convention is Convention.TRAINING:
        return eval_F(h, energy), eval_f(h, energy)
    return eval_f(h, energy), eval_f_prime(h, energy)


def hidden_preactivations(memories: tf.Tensor, images, *, num_visible: int) -> tf.Tensor:
    """
    h_mu = sum_i xi^mu_i v_i for every memory and image, K x M.
    """
    memories = as_float64(memories)
    images = as_float64(images)
    return memories[:, :num_visible] @ tf.transpose(images)


def channel_gap_terms(
    memories: tf.Tensor,
    images,
    channels,
    *,
    num_visible: int,
    energy: EnergyModel,
    beta: float,
    convention: Convention = Convention.TRAINING,
) -> tf.Tensor:
    """
    Contribution beta xi^mu_alpha a(h_mu) of every memory to output unit
    alpha = channels[A] of every image A, M x K.
    """
    memories = as_float64(memories)
    h = hidden_preactivations(memories, images, num_visible=num_visible)
    a, _ = _activation(h, energy, Convention(convention))
    recognition = tf.gather(memories[:, num_visible:], channels, axis=1)
    return beta * tf.transpose(recognition * a)


def dual_outputs(
    memories: tf.Tensor,
    images,
    *,
    num_visible: int,
    energy: EnergyModel,
    beta: float,
    convention: Convention = Convention.TRAINING,
) -> tf.Tensor:
    """
    Returns the outputs c, M x N_c.
    """
    memories = as_float64(memories)
    h = hidden_preactivations(memories, images, num_visible=num_visible)
    a, _ = _activation(h, energy, Convention(convention))
    return tf.tanh(beta * tf.transpose(a) @ memories[:, num_visible:])


def forward_backward(
    memories: tf.Tensor,
    images,
    targets,
    *,
    num_visible: int,
    energy: EnergyModel,
    beta: float,
    loss_power: int,
    convention: Convention = Convention.TRAINING,
) -> Tuple[tf.Tensor, tf.Tensor, tf.Tensor]:
    """
    Returns the outputs (M x N_c) and the gradients of sum (c - t)^(2m) with
    respect to the visible weights (K x N) and the recognition weights (K x N_c).
    """
    memories = as_float64(memories)
    images = as_float64(images)
    targets = as_float64(targets)
    recognition = memories[:, num_visible:]

    h = memories[:, :num_visible] @ tf.transpose(images)
    a, da = _activation(h, energy, Convention(convention))
    c = tf.tanh(beta * tf.transpose(a) @ recognition)

    # Back through tanh and the objective, M x N_c.
    delta = 2 * loss_power * beta * ipow(c - targets, 2 * loss_power - 1) * (1 - c * c)

    grad_recognition = a @ delta
    grad_visible = ((recognition @ tf.transpose(delta)) * da) @ images
    return c, grad_visible, grad_recognition


def dual_gradient(memories: tf.Tensor, images, targets, **kwargs) -> Tuple[tf.Tensor, tf.Tensor]:
    _, grad_visible, grad_recognition = forward_backward(memories, images, targets, **kwargs)
    return grad_visible, grad_recognition
