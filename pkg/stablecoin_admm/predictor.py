"""Gradient-free ADMM training of feed-forward networks and price direction.

Samples are stored column-wise: a batch of n inputs of width d0 is a
(d0, n) matrix. Layers carry no bias term, so callers append a constant
feature row when one is needed.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
import numpy.typing as npt

from .const import DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_TRAIN_TOLERANCE
from .exceptions import DimensionMismatch, InvalidParameter

_LOGGER = logging.getLogger(__name__)


class Activation(StrEnum):
    """Supported layer nonlinearities."""

    RELU = "relu"
    IDENTITY = "identity"


class Loss(StrEnum):
    """Supported training losses."""

    SQUARED = "squared"
    HINGE = "hinge"


class NonDecreasingObjective(UserWarning):
    """Warning issued when an ADMM sweep does not decrease the objective."""


def apply_activation(h: Activation, z: np.ndarray) -> np.ndarray:
    if h is Activation.RELU:
        return np.maximum(z, 0.0)
    return z


@dataclass(frozen=True)
class LayeredNetwork:
    """Feed-forward network a_l = h_l(W_l a_{l−1}) with a linear last layer."""

    weights: tuple[np.ndarray, ...]
    activations: tuple[Activation, ...]

    def __post_init__(self) -> None:
        if not self.weights:
            raise DimensionMismatch("A network needs at least one layer")
        if len(self.weights) != len(self.activations):
            raise DimensionMismatch("One activation is required per layer")
        weights = tuple(np.atleast_2d(np.asarray(w, dtype=float)) for w in self.weights)
        for index in range(1, len(weights)):
            if weights[index].shape[1] != weights[index - 1].shape[0]:
                raise DimensionMismatch(
                    f"Layer {index + 1} expects width {weights[index].shape[1]}, "
                    f"layer {index} produces {weights[index - 1].shape[0]}"
                )
        activations = tuple(Activation(h) for h in self.activations)
        if activations[-1] is not Activation.IDENTITY:
            raise InvalidParameter("The final layer must be linear")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "activations", activations)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1], *(w.shape[0] for w in self.weights))

    @property
    def depth(self) -> int:
        return len(self.weights)

    @classmethod
    def initialise(
        cls,
        dims: tuple[int, ...] | list[int],
        rng: np.random.Generator,
        hidden_activation: Activation = Activation.RELU,
    ) -> LayeredNetwork:
        """Draw weights uniformly in ±1/sqrt(fan-in)."""
        if len(dims) < 2:
            raise DimensionMismatch("dims must list at least the input and output widths")
        weights = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:], strict=True):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        activations = [hidden_activation] * (len(weights) - 1) + [Activation.IDENTITY]
        return cls(weights=tuple(weights), activations=tuple(activations))

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "activations": [str(h) for h in self.activations],
            "weights": [w.reshape(-1).tolist() for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> LayeredNetwork:
        dims = [int(d) for d in data["dims"]]
        flat = data["weights"]
        if len(flat) != len(dims) - 1:
            raise DimensionMismatch("Checkpoint lists a different number of layers than dims")
        weights = []
        for index, values in enumerate(flat):
            rows, cols = dims[index + 1], dims[index]
            array = np.asarray(values, dtype=float)
            if array.size != rows * cols:
                raise DimensionMismatch(
                    f"Layer {index + 1} holds {array.size} values, expected {rows * cols}"
                )
            weights.append(array.reshape(rows, cols))
        return cls(
            weights=tuple(weights),
            activations=tuple(Activation(h) for h in data["activations"]),
        )

    def save(self, path: str | Path) -> None:
        """Write a JSON checkpoint: dims header and row-major weight matrices."""
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> LayeredNetwork:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _batch(net: LayeredNetwork, a0: npt.ArrayLike) -> np.ndarray:
    batch = np.asarray(a0, dtype=float)
    if batch.ndim == 1:
        batch = batch.reshape(-1, 1)
    if batch.shape[0] != net.dims[0]:
        raise DimensionMismatch(
            f"Input width {batch.shape[0]} does not match network input {net.dims[0]}"
        )
    return batch


def forward(net: LayeredNetwork, a0: npt.ArrayLike) -> np.ndarray:
    """Output activations of the network for a column-wise input batch.

    Raises:
        DimensionMismatch: If the input width differs from the first layer
    """
    a = _batch(net, a0)
    for W, h in zip(net.weights, net.activations, strict=True):
        a = apply_activation(h, W @ a)
    return a


def update_weights(z_l: np.ndarray, a_prev: np.ndarray) -> np.ndarray:
    """Least-squares weights W_l = z_l a_prev⁺ (minimum-norm on rank deficiency)."""
    return np.asarray(z_l) @ np.linalg.pinv(np.asarray(a_prev))


def update_activations(
    W_next: np.ndarray,
    z_next: np.ndarray,
    z_l: np.ndarray,
    beta_next: float,
    gamma_l: float,
    h_l: Activation,
) -> np.ndarray:
    """Solve (βWᵀW + γI) a = βWᵀz_{l+1} + γ h_l(z_l) for the activations a_l."""
    width = W_next.shape[1]
    lhs = beta_next * W_next.T @ W_next + gamma_l * np.eye(width)
    rhs = beta_next * W_next.T @ z_next + gamma_l * apply_activation(h_l, z_l)
    return np.linalg.solve(lhs, rhs)


def update_outputs(
    a_l: np.ndarray,
    W_l: np.ndarray,
    a_prev: np.ndarray,
    beta_l: float,
    gamma_l: float,
    h_l: Activation,
) -> np.ndarray:
    """Elementwise minimiser of γ(a − h(z))² + β(z − W a_prev)².

    For ReLU both branches are solved in closed form and the one with the
    lower objective is kept; ties go to the non-negative branch.
    """
    target = W_l @ a_prev
    if h_l is Activation.IDENTITY:
        return (gamma_l * a_l + beta_l * target) / (gamma_l + beta_l)

    positive = np.maximum((gamma_l * a_l + beta_l * target) / (gamma_l + beta_l), 0.0)
    negative = np.minimum(target, 0.0)
    cost_positive = gamma_l * (a_l - positive) ** 2 + beta_l * (positive - target) ** 2
    cost_negative = gamma_l * a_l**2 + beta_l * (negative - target) ** 2
    return np.where(cost_positive <= cost_negative, positive, negative)


def update_last_layer(
    y: np.ndarray,
    lambda_mult: np.ndarray,
    target: np.ndarray,
    beta_L: float,
    loss: Loss,
) -> np.ndarray:
    """Minimise l(z, y) + ⟨z, λ⟩ + β‖z − W_L a_{L−1}‖² elementwise.

    Hinge labels must be ±1.
    """
    if loss is Loss.SQUARED:
        return (2.0 * y - lambda_mult + 2.0 * beta_L * target) / (2.0 + 2.0 * beta_L)

    z_zero_loss = target - lambda_mult / (2.0 * beta_L)
    z_linear_loss = target + (y - lambda_mult) / (2.0 * beta_L)
    return np.where(
        y * z_zero_loss >= 1.0,
        z_zero_loss,
        np.where(y * z_linear_loss <= 1.0, z_linear_loss, y),
    )


def update_multiplier(
    lambda_mult: np.ndarray,
    z_L: np.ndarray,
    W_L: np.ndarray,
    a_prev: np.ndarray,
    beta_L: float,
) -> np.ndarray:
    """λ ← λ + β_L (z_L − W_L a_{L−1})."""
    return lambda_mult + beta_L * (z_L - W_L @ a_prev)


def loss_value(z: np.ndarray, y: np.ndarray, loss: Loss) -> float:
    if loss is Loss.SQUARED:
        return float(np.sum((z - y) ** 2))
    return float(np.sum(np.maximum(0.0, 1.0 - y * z)))


@dataclass
class TrainState:
    """Auxiliary variables of the ADMM training problem.

    a[0] is the input batch; z[k] is the pre-activation of layer k + 1 and a[k] its input.
    """

    z: list[np.ndarray]
    a: list[np.ndarray]
    lambda_mult: np.ndarray
    betas: tuple[float, ...]
    gammas: tuple[float, ...]
    loss: Loss

    @classmethod
    def from_forward_pass(
        cls,
        net: LayeredNetwork,
        a0: np.ndarray,
        betas: tuple[float, ...],
        gammas: tuple[float, ...],
        loss: Loss,
    ) -> TrainState:
        if len(betas) != net.depth or len(gammas) != net.depth:
            raise DimensionMismatch("One β and one γ are required per layer")
        if min(betas) <= 0.0 or min(gammas) <= 0.0:
            raise InvalidParameter("Penalties β and γ must be positive")
        z: list[np.ndarray] = []
        a: list[np.ndarray] = [a0]
        for W, h in zip(net.weights, net.activations, strict=True):
            z.append(W @ a[-1])
            a.append(apply_activation(h, z[-1]))
        return cls(
            z=z,
            a=a[:-1],
            lambda_mult=np.zeros_like(z[-1]),
            betas=betas,
            gammas=gammas,
            loss=loss,
        )


def training_objective(
    weights: list[np.ndarray], state: TrainState, y: np.ndarray, net: LayeredNetwork
) -> float:
    """Augmented objective tracked once per sweep."""
    L = len(weights)
    z_L = state.z[-1]
    total = loss_value(z_L, y, state.loss) + float(np.sum(z_L * state.lambda_mult))
    total += state.betas[-1] * float(np.sum((z_L - weights[-1] @ state.a[-1]) ** 2))
    for k in range(L - 1):
        total += state.gammas[k] * float(
            np.sum((state.a[k + 1] - apply_activation(net.activations[k], state.z[k])) ** 2)
        )
        total += state.betas[k] * float(np.sum((state.z[k] - weights[k] @ state.a[k]) ** 2))
    return total


@dataclass(frozen=True)
class TrainingResult:
    """Trained network and the per-sweep objective trace."""

    net: LayeredNetwork
    objective_trace: tuple[float, ...]
    converged: bool
    state: TrainState | None = field(default=None, repr=False)


def train_admm(
    net: LayeredNetwork,
    inputs: npt.ArrayLike,
    targets: npt.ArrayLike,
    betas: float | tuple[float, ...] = DEFAULT_BETA,
    gammas: float | tuple[float, ...] = DEFAULT_GAMMA,
    max_epochs: int = 100,
    loss: Loss = Loss.SQUARED,
    tol: float = DEFAULT_TRAIN_TOLERANCE,
) -> TrainingResult:
    """Train the network with the layer-wise ADMM sweep.

    Each sweep updates W_l, a_l and z_l for l = 1..L−1, then W_L and z_L
    against the loss, then the multiplier. The loop stops when the relative
    change of the objective drops below tol or after max_epochs sweeps.

    Args:
        net: Initial network
        inputs: Input batch of shape (d0, n)
        targets: Targets of shape (d_L, n); hinge targets must be ±1
        betas: β_l per layer (or one value for all)
        gammas: γ_l per layer (or one value for all)
        max_epochs: Sweep cap
        loss: Loss.SQUARED or Loss.HINGE
        tol: Relative objective change treated as converged

    Returns:
        The trained network with one objective value per sweep
    """
    a0 = _batch(net, inputs)
    y = np.asarray(targets, dtype=float).reshape(net.dims[-1], -1)
    if a0.shape[1] == 0:
        raise InvalidParameter("The training set is empty")
    if y.shape[1] != a0.shape[1]:
        raise DimensionMismatch("Inputs and targets hold a different number of samples")
    loss = Loss(loss)
    if loss is Loss.HINGE and not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidParameter("Hinge targets must be -1 or +1")

    L = net.depth
    beta_t = (float(betas),) * L if np.isscalar(betas) else tuple(map(float, betas))  # type: ignore[arg-type]
    gamma_t = (float(gammas),) * L if np.isscalar(gammas) else tuple(map(float, gammas))  # type: ignore[arg-type]
    if max_epochs <= 0:
        return TrainingResult(net=net, objective_trace=(), converged=False)

    state = TrainState.from_forward_pass(net, a0, beta_t, gamma_t, loss)
    weights = list(net.weights)
    trace: list[float] = []
    converged = False
    warned = False

    for sweep in range(max_epochs):
        for k in range(L - 1):
            weights[k] = update_weights(state.z[k], state.a[k])
            state.a[k + 1] = update_activations(
                weights[k + 1],
                state.z[k + 1],
                state.z[k],
                beta_t[k + 1],
                gamma_t[k],
                net.activations[k],
            )
            state.z[k] = update_outputs(
                state.a[k + 1],
                weights[k],
                state.a[k],
                beta_t[k],
                gamma_t[k],
                net.activations[k],
            )
        weights[-1] = update_weights(state.z[-1], state.a[-1])
        state.z[-1] = update_last_layer(
            y, state.lambda_mult, weights[-1] @ state.a[-1], beta_t[-1], loss
        )
        state.lambda_mult = update_multiplier(
            state.lambda_mult, state.z[-1], weights[-1], state.a[-1], beta_t[-1]
        )

        objective = training_objective(weights, state, y, net)
        if trace and objective > trace[-1] and not warned:
            message = f"ADMM training objective increased at sweep {sweep + 1}"
            _LOGGER.warning(message)
            warnings.warn(message, NonDecreasingObjective, stacklevel=2)
            warned = True
        if trace and abs(objective - trace[-1]) < tol * max(1.0, abs(trace[-1])):
            trace.append(objective)
            converged = True
            break
        trace.append(objective)

    _LOGGER.debug("ADMM training finished after %s sweeps", len(trace))
    trained = LayeredNetwork(weights=tuple(weights), activations=net.activations)
    return TrainingResult(
        net=trained, objective_trace=tuple(trace), converged=converged, state=state
    )


def predict_direction(net: LayeredNetwork, features: npt.ArrayLike) -> int:
    """Sign of the scalar network output; zero maps to +1."""
    output = float(forward(net, features).reshape(-1)[0])
    return 1 if output >= 0.0 else -1


def direction_features(returns: npt.ArrayLike, window: int) -> np.ndarray:
    """Feature columns of the last `window` returns plus a constant row."""
    series = np.asarray(returns, dtype=float).reshape(-1)
    if series.size < window:
        raise DimensionMismatch(f"Need {window} returns, got {series.size}")
    columns = np.lib.stride_tricks.sliding_window_view(series, window).T
    return np.vstack([columns, np.ones((1, columns.shape[1]))])


def direction_dataset(
    returns: npt.ArrayLike, window: int
) -> tuple[np.ndarray, np.ndarray]:
    """Windows of past returns paired with the sign of the following return."""
    series = np.asarray(returns, dtype=float).reshape(-1)
    if series.size <= window:
        raise DimensionMismatch(
            f"Need more than {window} returns to build a dataset, got {series.size}"
        )
    features = direction_features(series[:-1], window)
    labels = np.where(series[window:] >= 0.0, 1.0, -1.0).reshape(1, -1)
    return features, labels


@dataclass
class PricePredictor:
    """Direction classifier over log returns used to bias MPC scenarios."""

    window: int
    hidden: tuple[int, ...] = ()
    betas: float = DEFAULT_BETA
    gammas: float = DEFAULT_GAMMA
    sweeps: int = 50
    net: LayeredNetwork | None = None

    def fit(self, prices: npt.ArrayLike, rng: np.random.Generator) -> TrainingResult:
        """Train on the log returns of a price history."""
        returns = np.diff(np.log(np.asarray(prices, dtype=float)))
        features, labels = direction_dataset(returns, self.window)
        dims = (self.window + 1, *self.hidden, 1)
        initial = LayeredNetwork.initialise(dims, rng)
        result = train_admm(
            initial,
            features,
            labels,
            betas=self.betas,
            gammas=self.gammas,
            max_epochs=self.sweeps,
            loss=Loss.HINGE,
        )
        self.net = result.net
        _LOGGER.info("Trained price predictor on %s samples", labels.shape[1])
        return result

    def predict(self, prices: npt.ArrayLike) -> int:
        """Predicted direction of the next price move."""
        if self.net is None:
            raise InvalidParameter("The predictor has not been trained")
        returns = np.diff(np.log(np.asarray(prices, dtype=float)))
        features = direction_features(returns[-self.window :], self.window)
        return predict_direction(self.net, features[:, -1])

    def expected_return(self, prices: npt.ArrayLike) -> float:
        """Signed mean absolute log return over the window."""
        returns = np.diff(np.log(np.asarray(prices, dtype=float)))
        magnitude = float(np.mean(np.abs(returns[-self.window :])))
        return self.predict(prices) * magnitude
