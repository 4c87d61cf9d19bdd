"""DTOs for the nn app - dense network values passed between apps."""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Tuple

import numpy as np
from django.db import models

from apps.core.exceptions import ShapeError


class Activation(models.TextChoices):
    RELU = 'relu', 'ReLU'
    LEAKY_RELU = 'leaky_relu', 'Leaky ReLU'
    IDENTITY = 'identity', 'Identity'


LEAKY_SLOPE = 0.01


@dataclass(frozen=True, eq=False)
class Layer:
    """Dense layer: weights are fan_in x fan_out, bias has fan_out entries."""
    weights: np.ndarray
    bias: np.ndarray
    activation: str = Activation.RELU

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match fan_out {self.weights.shape[1]}"
            )
        if self.activation not in Activation.values:
            raise ShapeError(f"unknown activation: {self.activation}")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class Network:
    """
    Ordered stack of dense layers.

    The last layer produces logits; softmax is applied by predict().
    """
    layers: Tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for k in range(len(self.layers) - 1):
            if self.layers[k].fan_out != self.layers[k + 1].fan_in:
                raise ShapeError(
                    f"layer {k} fan_out {self.layers[k].fan_out} does not chain "
                    f"into layer {k + 1} fan_in {self.layers[k + 1].fan_in}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    @property
    def layer_dims(self) -> List[int]:
        return [self.input_dim] + [layer.fan_out for layer in self.layers]

    @property
    def hidden_widths(self) -> List[int]:
        """Widths of the hidden layers; index 0 is the first hidden layer."""
        return [layer.fan_out for layer in self.layers[:-1]]

    @property
    def parameter_count(self) -> int:
        return sum(layer.weights.size + layer.bias.size for layer in self.layers)


@dataclass(frozen=True)
class ActivationOverride:
    """
    Clamp values for (layer, neuron) positions.

    Applying it to a post-activation matrix a of layer k yields
    a * mask + values, where mask is 0 at clamped columns and 1 elsewhere and
    values holds the clamp value at clamped columns and 0 elsewhere.
    """
    clamps: Mapping[Tuple[int, int], float] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.clamps)

    def by_layer(self) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
        """Group clamps into (columns, values) arrays per layer, columns ascending."""
        grouped: Dict[int, List[Tuple[int, float]]] = {}
        for (layer_index, neuron_index), value in self.clamps.items():
            grouped.setdefault(int(layer_index), []).append((int(neuron_index), float(value)))
        result = {}
        for layer_index, pairs in grouped.items():
            pairs.sort()
            columns = np.array([c for c, _ in pairs], dtype=np.int64)
            values = np.array([v for _, v in pairs], dtype=np.float64)
            result[layer_index] = (columns, values)
        return result

    def mask_and_values(self, layer_index: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
        """The mask row and the value row of the clamp for one layer."""
        mask = np.ones(width, dtype=np.float64)
        values = np.zeros(width, dtype=np.float64)
        columns_values = self.by_layer().get(layer_index)
        if columns_values is not None:
            columns, clamp = columns_values
            if columns.size and columns.max() >= width:
                raise ShapeError(f"override column {columns.max()} outside layer width {width}")
            mask[columns] = 0.0
            values[columns] = clamp
        return mask, values

    def apply(self, layer_index: int, activations: np.ndarray) -> np.ndarray:
        """Return a copy of activations with this layer's clamped columns replaced."""
        result = np.array(activations, dtype=np.float64, copy=True)
        columns_values = self.by_layer().get(layer_index)
        if columns_values is None:
            return result
        columns, values = columns_values
        width = result.shape[-1]
        if columns.size and columns.max() >= width:
            raise ShapeError(f"override column {columns.max()} outside layer width {width}")
        result[..., columns] = values
        return result


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """
    Per-layer record of a forward pass.

    post_activations hold post-override values when an override was applied.
    """
    inputs: np.ndarray
    pre_activations: Tuple[np.ndarray, ...]
    post_activations: Tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class GradientSet:
    """Gradients mirroring the network's parameters."""
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class AdamState:
    """Adam moments (shape mirrors of the parameters) and hyperparameters."""
    first_weights: Tuple[np.ndarray, ...]
    first_biases: Tuple[np.ndarray, ...]
    second_weights: Tuple[np.ndarray, ...]
    second_biases: Tuple[np.ndarray, ...]
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True, eq=False)
class Prediction:
    scores: np.ndarray
    labels: np.ndarray
