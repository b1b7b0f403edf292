"""
Multilayer perceptrons, Adam, and the WGAN-GP gradient penalty
Networks keep a flat parameter vector; training code binds per-layer
tape leaves to it and flattens gradients back.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core import autodiff as ad
from core.autodiff import Tape, Var
from core.errors import (
    ContractError,
    ShapeError,
    TrainingDivergedError,
    UnsupportedActivationError,
)

logger = logging.getLogger(__name__)

GP_EPSILON = 1e-12


class Activation(Enum):
    """Hidden-layer activations."""
    TANH = "tanh"
    RELU = "relu"
    SOFTPLUS = "softplus"


_ACTIVATIONS: Dict[Activation, Callable[[Var], Var]] = {
    Activation.TANH: ad.tanh,
    Activation.RELU: ad.relu,
    Activation.SOFTPLUS: ad.softplus,
}


def parameter_count(layer_widths: Sequence[int]) -> int:
    """Number of weights and biases of a fully connected stack."""
    return int(sum((a + 1) * b for a, b in zip(layer_widths[:-1], layer_widths[1:])))


@dataclass
class MlpNet:
    """
    Fully connected network with a flat parameter vector.

    Hidden layers use `activation`, the output layer is affine. When
    output_bound K0 is set the head is K0*tanh((shift + scale*z)/K0);
    otherwise it is shift + scale*z. Inputs are standardized as
    (x - input_shift)/input_scale before the first layer.
    """
    layer_widths: Tuple[int, ...]
    activation: Activation = Activation.TANH
    weights: Optional[np.ndarray] = None
    output_bound: Optional[float] = None
    output_shift: float = 0.0
    output_scale: float = 1.0
    input_shift: float = 0.0
    input_scale: float = 1.0

    def __post_init__(self):
        self.layer_widths = tuple(int(w) for w in self.layer_widths)
        if len(self.layer_widths) < 2 or any(w <= 0 for w in self.layer_widths):
            raise ContractError(f"layer_widths must hold at least two positive integers, got {self.layer_widths}")
        if isinstance(self.activation, str):
            self.activation = Activation(self.activation)
        if self.output_bound is not None and self.output_bound <= 0:
            raise ContractError("output_bound must be positive")
        if self.input_scale <= 0 or self.output_scale <= 0:
            raise ContractError("input_scale and output_scale must be positive")
        if self.weights is None:
            self.weights = np.zeros(self.n_params)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.size != self.n_params:
            raise ShapeError(f"Expected {self.n_params} parameters, got {self.weights.size}")

    @property
    def n_params(self) -> int:
        return parameter_count(self.layer_widths)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]

    @classmethod
    def initialize(
        cls,
        layer_widths: Sequence[int],
        rng: np.random.Generator,
        activation: Union[Activation, str] = Activation.TANH,
        **kwargs
    ) -> 'MlpNet':
        """Glorot-uniform weights, zero biases."""
        widths = tuple(int(w) for w in layer_widths)
        chunks = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        return cls(widths, activation=activation, weights=np.concatenate(chunks), **kwargs)

    def layers(self, weights: Optional[np.ndarray] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into the flat vector, W shaped (fan_in, fan_out)."""
        flat = self.weights if weights is None else weights
        result = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_widths[:-1], self.layer_widths[1:]):
            w = flat[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = flat[offset:offset + fan_out]
            offset += fan_out
            result.append((w, b))
        return result

    def bind(self, tape: Tape) -> List[Var]:
        """Create one tape leaf per weight matrix and bias vector."""
        params = []
        for w, b in self.layers():
            params.append(tape.variable(w))
            params.append(tape.variable(b))
        return params

    def freeze(self, tape: Tape) -> List[Var]:
        """Parameters as detached constants (no gradient flows into them)."""
        params = []
        for w, b in self.layers():
            params.append(tape.constant(w))
            params.append(tape.constant(b))
        return params

    @staticmethod
    def flatten(grads: Sequence[np.ndarray]) -> np.ndarray:
        return np.concatenate([np.asarray(g, dtype=float).ravel() for g in grads])

    def apply(self, x: Union[Var, np.ndarray], params: Sequence[Var]) -> Var:
        """Batched forward pass on the tape; x is (batch, input_dim)."""
        width = x.shape[1] if len(x.shape) == 2 else None
        if width != self.input_dim:
            raise ShapeError(f"Expected input of shape (batch, {self.input_dim}), got {tuple(x.shape)}")
        hidden: Union[Var, np.ndarray] = x
        if self.input_shift != 0.0 or self.input_scale != 1.0:
            hidden = (hidden - self.input_shift) * (1.0 / self.input_scale)
        act = _ACTIVATIONS[self.activation]
        n_layers = len(self.layer_widths) - 1
        for layer in range(n_layers):
            w, b = params[2 * layer], params[2 * layer + 1]
            hidden = ad.matmul(hidden, w) + b
            if layer < n_layers - 1:
                hidden = act(hidden)
        return self._head(hidden)

    def _head(self, z: Var) -> Var:
        if self.output_shift != 0.0 or self.output_scale != 1.0:
            z = z * self.output_scale + self.output_shift
        if self.output_bound is not None:
            k0 = float(self.output_bound)
            z = ad.tanh(z * (1.0 / k0)) * k0
        return z

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Tape-free batched evaluation."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x.reshape(-1, 1) if self.input_dim == 1 else x.reshape(1, -1)
        if x.shape[1] != self.input_dim:
            raise ShapeError(f"Expected input width {self.input_dim}, got {x.shape[1]}")
        hidden = (x - self.input_shift) / self.input_scale
        layers = self.layers()
        for i, (w, b) in enumerate(layers):
            hidden = hidden @ w + b
            if i < len(layers) - 1:
                if self.activation is Activation.TANH:
                    hidden = np.tanh(hidden)
                elif self.activation is Activation.RELU:
                    hidden = np.maximum(hidden, 0.0)
                else:
                    hidden = np.logaddexp(0.0, hidden)
        hidden = hidden * self.output_scale + self.output_shift
        if self.output_bound is not None:
            hidden = self.output_bound * np.tanh(hidden / self.output_bound)
        if squeeze and self.input_dim == 1 and self.output_dim == 1:
            return hidden.ravel()
        return hidden

    def to_dict(self) -> Dict[str, Any]:
        return {
            'layer_widths': list(self.layer_widths),
            'activation': self.activation.value,
            'output_bound': self.output_bound,
            'output_shift': self.output_shift,
            'output_scale': self.output_scale,
            'input_shift': self.input_shift,
            'input_scale': self.input_scale,
            'weights': [float(w) for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MlpNet':
        return cls(
            tuple(data['layer_widths']),
            activation=Activation(data['activation']),
            weights=np.asarray(data['weights'], dtype=float),
            output_bound=data.get('output_bound'),
            output_shift=float(data.get('output_shift', 0.0)),
            output_scale=float(data.get('output_scale', 1.0)),
            input_shift=float(data.get('input_shift', 0.0)),
            input_scale=float(data.get('input_scale', 1.0)),
        )

    def save(self, path: Union[str, Path]):
        """JSON checkpoint; floats are written with repr precision."""
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'MlpNet':
        return cls.from_dict(json.loads(Path(path).read_text()))

    def copy(self) -> 'MlpNet':
        return MlpNet.from_dict(self.to_dict())


def forward(net: MlpNet, input_vector: Sequence[float]) -> Tuple[np.ndarray, Tape]:
    """
    Single-input forward pass recorded on a fresh tape.

    The tape's bindings expose 'input', 'params' and 'output' for grad().
    """
    x = np.asarray(input_vector, dtype=float).ravel()
    if x.size != net.input_dim:
        raise ShapeError(f"Input length {x.size} does not match first layer width {net.input_dim}")
    tape = Tape()
    x_var = tape.variable(x.reshape(1, -1))
    params = net.bind(tape)
    out = net.apply(x_var, params)
    tape.bindings.update({'input': x_var, 'params': params, 'output': out})
    return out.value.ravel().copy(), tape


def grad(tape: Tape, wrt: str = 'params') -> np.ndarray:
    """Gradient of the recorded scalar output w.r.t. 'params' or 'input'."""
    if 'output' not in tape.bindings:
        raise ContractError("Tape was not produced by forward()")
    output: Var = tape.bindings['output']
    if output.size != 1:
        raise ContractError(f"grad needs a scalar root, network output has {output.size} entries")
    root = ad.reshape(output, ())
    if wrt == 'params':
        grads = tape.gradient(root, tape.bindings['params'])
        return MlpNet.flatten(grads)
    if wrt == 'input':
        (g,) = tape.gradient(root, [tape.bindings['input']])
        return np.asarray(g).ravel()
    raise ContractError(f"Unknown gradient selector '{wrt}'")


def penalty_term(critic: Callable[[Var], Var], y_interp: np.ndarray, tape: Tape) -> Var:
    """
    Mean of (||grad_y D(y)|| - 1)^2 over rows of y_interp, kept on the tape.

    critic maps a (batch, p) Var to a (batch, 1) Var; rows are independent,
    so the gradient of the summed output gives per-row input gradients.
    """
    y = np.asarray(y_interp, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    y_var = tape.variable(y)
    total = ad.sum_(critic(y_var))
    (g,) = tape.gradient(total, [y_var], create_graph=True)
    norms = ad.sqrt(ad.sum_(ad.square(g), axis=1) + GP_EPSILON)
    return ad.mean(ad.square(norms - 1.0))


def grad_penalty(critic: MlpNet, y_interp: Union[float, Sequence[float], np.ndarray]) -> float:
    """Gradient penalty of a scalar-input critic at one or more points."""
    if critic.activation is Activation.RELU:
        raise UnsupportedActivationError(
            "relu critics have zero second derivative almost everywhere; use tanh or softplus"
        )
    tape = Tape()
    params = critic.freeze(tape)
    y = np.asarray(y_interp, dtype=float).reshape(-1, critic.input_dim)
    value = penalty_term(lambda v: critic.apply(v, params), y, tape)
    return float(value.value)


def grad_penalty_param_gradient(critic: MlpNet, y_interp: np.ndarray) -> Tuple[float, np.ndarray]:
    """Penalty value and its gradient w.r.t. the critic's flat parameters."""
    if critic.activation is Activation.RELU:
        raise UnsupportedActivationError(
            "relu critics have zero second derivative almost everywhere; use tanh or softplus"
        )
    tape = Tape()
    params = critic.bind(tape)
    y = np.asarray(y_interp, dtype=float).reshape(-1, critic.input_dim)
    value = penalty_term(lambda v: critic.apply(v, params), y, tape)
    grads = tape.gradient(value, params)
    return float(value.value), MlpNet.flatten(grads)


@dataclass
class AdamState:
    """Adam moments and hyperparameters for one parameter vector."""
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    eps: float = 1e-8

    @classmethod
    def create(cls, n_params: int, lr: float, beta1: float = 0.0, beta2: float = 0.9, eps: float = 1e-8) -> 'AdamState':
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; mutates the moments, returns new params."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(
            f"Adam dimension mismatch: params {params.shape}, grads {grads.shape}, moments {state.m.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise TrainingDivergedError("Non-finite gradient", step=state.step + 1)

    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


__all__ = [
    'Activation',
    'MlpNet',
    'AdamState',
    'parameter_count',
    'forward',
    'grad',
    'penalty_term',
    'grad_penalty',
    'grad_penalty_param_gradient',
    'adam_step',
]
