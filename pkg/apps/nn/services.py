"""
Core services for the nn app.

Dense network math on float64 numpy arrays: initialization, forward pass with
an activation-override hook, exact backpropagation, softmax cross-entropy,
Adam, and parameter flattening. Every function is pure; networks and optimizer
states are returned as new values.
"""
import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from apps.core.exceptions import InvalidConfigError, ShapeError
from .dtos import (
    Activation, ActivationOverride, AdamState, ForwardTrace, GradientSet,
    LEAKY_SLOPE, Layer, Network, Prediction,
)

logger = logging.getLogger(__name__)


# =============================================================================
# Construction
# =============================================================================

def he_normal(fan_in: int, shape: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Gaussian draws with std sqrt(2 / fan_in)."""
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def init_network(
    layer_dims: Sequence[int],
    seed: int,
    hidden_activation: str = Activation.RELU,
) -> Network:
    """
    Build a He-initialized network.

    layer_dims lists the input width, every hidden width and the class count.
    Hidden layers use hidden_activation; the last layer is identity (logits).
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise InvalidConfigError("layer_dims needs at least an input and an output width", field="layer_dims")
    for i, d in enumerate(dims):
        if d < 1:
            raise InvalidConfigError(f"dimension {d} must be >= 1", field=f"layer_dims.{i}")
    if hidden_activation not in Activation.values:
        raise InvalidConfigError(f"unknown activation {hidden_activation}", field="hidden_activation")

    rng = np.random.default_rng(seed)
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        is_last = k == len(dims) - 2
        layers.append(Layer(
            weights=he_normal(fan_in, (fan_in, fan_out), rng),
            bias=np.zeros(fan_out, dtype=np.float64),
            activation=Activation.IDENTITY if is_last else hidden_activation,
        ))
    return Network(layers=tuple(layers))


def zero_like(net: Network) -> Network:
    """Network of the same shape with every parameter set to zero."""
    return Network(layers=tuple(
        Layer(np.zeros_like(layer.weights), np.zeros_like(layer.bias), layer.activation)
        for layer in net.layers
    ))


# =============================================================================
# Activations
# =============================================================================

def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == Activation.RELU:
        return np.maximum(z, 0.0)
    if activation == Activation.LEAKY_RELU:
        return np.where(z > 0.0, z, LEAKY_SLOPE * z)
    return z.copy()


def _activation_grad(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == Activation.RELU:
        return (z > 0.0).astype(np.float64)
    if activation == Activation.LEAKY_RELU:
        return np.where(z > 0.0, 1.0, LEAKY_SLOPE)
    return np.ones_like(z)


def _as_batch(batch, input_dim: int) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise ShapeError(f"batch shape {x.shape} does not match input_dim {input_dim}")
    return x


# =============================================================================
# Forward / backward
# =============================================================================

def forward(
    net: Network,
    batch: np.ndarray,
    override: Optional[ActivationOverride] = None,
) -> Tuple[np.ndarray, ForwardTrace]:
    """
    Affine + activation per layer.

    With an override, the clamped columns of layer k's post-activation are
    replaced for every row before layer k+1 consumes them.
    """
    x = _as_batch(batch, net.input_dim)
    clamps = override.by_layer() if override else {}
    for layer_index in clamps:
        if not 0 <= layer_index < len(net.layers):
            raise ShapeError(f"override layer {layer_index} outside network of {len(net.layers)} layers")

    inputs = x
    pre, post = [], []
    for k, layer in enumerate(net.layers):
        z = x @ layer.weights + layer.bias
        a = _activate(z, layer.activation)
        if k in clamps:
            columns, values = clamps[k]
            if columns.max() >= a.shape[1]:
                raise ShapeError(f"override column {columns.max()} outside layer {k} width {a.shape[1]}")
            a[:, columns] = values
        pre.append(z)
        post.append(a)
        x = a
    return x, ForwardTrace(inputs=inputs, pre_activations=tuple(pre), post_activations=tuple(post))


def backward(
    net: Network,
    trace: ForwardTrace,
    dlogits: np.ndarray,
    override: Optional[ActivationOverride] = None,
) -> GradientSet:
    """
    Exact gradients of the traced computation.

    A clamped activation is a constant: no gradient reaches its pre-activation,
    so its incoming weights and bias get nothing through that path.
    """
    n_layers = len(net.layers)
    if len(trace.pre_activations) != n_layers or len(trace.post_activations) != n_layers:
        raise ShapeError(f"trace has {len(trace.pre_activations)} layers, network has {n_layers}")
    upstream = np.asarray(dlogits, dtype=np.float64)
    if upstream.shape != trace.post_activations[-1].shape:
        raise ShapeError(f"dlogits shape {upstream.shape} does not match logits {trace.post_activations[-1].shape}")

    clamps = override.by_layer() if override else {}
    weight_grads: List[np.ndarray] = [None] * n_layers
    bias_grads: List[np.ndarray] = [None] * n_layers
    for k in reversed(range(n_layers)):
        layer = net.layers[k]
        if k in clamps:
            upstream = upstream.copy()
            upstream[:, clamps[k][0]] = 0.0
        dz = upstream * _activation_grad(trace.pre_activations[k], layer.activation)
        layer_input = trace.inputs if k == 0 else trace.post_activations[k - 1]
        weight_grads[k] = layer_input.T @ dz
        bias_grads[k] = dz.sum(axis=0)
        upstream = dz @ layer.weights.T
    return GradientSet(weights=tuple(weight_grads), biases=tuple(bias_grads))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    rows = np.arange(logits.shape[0])
    probs = softmax(logits)
    loss = float(-np.mean(np.log(np.clip(probs[rows, labels], 1e-300, None))))
    dlogits = probs.copy()
    dlogits[rows, labels] -= 1.0
    dlogits /= logits.shape[0]
    return loss, dlogits


def predict(net: Network, batch: np.ndarray, override: Optional[ActivationOverride] = None) -> Prediction:
    """Softmax scores and argmax labels; ties go to the lowest class index."""
    logits, _ = forward(net, batch, override)
    scores = softmax(logits)
    return Prediction(scores=scores, labels=np.argmax(scores, axis=1))


def loss_on(net: Network, features: np.ndarray, labels: np.ndarray) -> float:
    logits, _ = forward(net, features)
    loss, _ = softmax_cross_entropy(logits, labels)
    return loss


# =============================================================================
# Adam
# =============================================================================

def init_adam(
    net: Network,
    learning_rate: float = 0.001,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    zeros_w = tuple(np.zeros_like(layer.weights) for layer in net.layers)
    zeros_b = tuple(np.zeros_like(layer.bias) for layer in net.layers)
    return AdamState(
        first_weights=zeros_w, first_biases=zeros_b,
        second_weights=tuple(z.copy() for z in zeros_w),
        second_biases=tuple(z.copy() for z in zeros_b),
        t=0, learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon,
    )


def _check_mirrors(net: Network, arrays_w: Sequence[np.ndarray], arrays_b: Sequence[np.ndarray], what: str):
    if len(arrays_w) != len(net.layers) or len(arrays_b) != len(net.layers):
        raise ShapeError(f"{what} has {len(arrays_w)} layers, network has {len(net.layers)}")
    for k, layer in enumerate(net.layers):
        if arrays_w[k].shape != layer.weights.shape or arrays_b[k].shape != layer.bias.shape:
            raise ShapeError(f"{what} layer {k} shape does not mirror the network")


def adam_step(net: Network, grads: GradientSet, state: AdamState) -> Tuple[Network, AdamState]:
    """One bias-corrected Adam update; t advances by exactly one."""
    _check_mirrors(net, grads.weights, grads.biases, "gradient set")
    _check_mirrors(net, state.first_weights, state.first_biases, "adam state")

    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t

    def update(param, grad, m, v):
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        step = state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        return param - step, m, v

    layers, m_w, m_b, v_w, v_b = [], [], [], [], []
    for k, layer in enumerate(net.layers):
        w, mw, vw = update(layer.weights, grads.weights[k], state.first_weights[k], state.second_weights[k])
        b, mb, vb = update(layer.bias, grads.biases[k], state.first_biases[k], state.second_biases[k])
        layers.append(Layer(w, b, layer.activation))
        m_w.append(mw)
        m_b.append(mb)
        v_w.append(vw)
        v_b.append(vb)

    new_state = replace(
        state,
        first_weights=tuple(m_w), first_biases=tuple(m_b),
        second_weights=tuple(v_w), second_biases=tuple(v_b),
        t=t,
    )
    return Network(layers=tuple(layers)), new_state


# =============================================================================
# Parameter vectors
# =============================================================================

def flatten_parameters(net: Network) -> np.ndarray:
    """Layer by layer: weights row-major, then bias."""
    parts = []
    for layer in net.layers:
        parts.append(layer.weights.ravel())
        parts.append(layer.bias)
    return np.concatenate(parts)


def unflatten_parameters(template: Network, vector: np.ndarray) -> Network:
    """Inverse of flatten_parameters for networks shaped like template."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (template.parameter_count,):
        raise ShapeError(
            f"parameter vector length {vector.shape} does not match parameter count {template.parameter_count}"
        )
    layers = []
    offset = 0
    for layer in template.layers:
        size = layer.weights.size
        weights = vector[offset:offset + size].reshape(layer.weights.shape).copy()
        offset += size
        bias = vector[offset:offset + layer.bias.size].copy()
        offset += layer.bias.size
        layers.append(Layer(weights, bias, layer.activation))
    return Network(layers=tuple(layers))
