"""Two-layer GCN: forward pass, training, checkpoints"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import json
import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from . import utils
from ._types import ConfigError, DimensionError, HiddenShiftError, TrainingDivergedError
from .graph import Graph, normalized_adjacency
from .kernels import (
    ensure_finite,
    masked_cross_entropy,
    masked_cross_entropy_adjoint,
    relu,
    relu_adjoint,
)

logger = logging.getLogger(__name__)

OPTIMIZERS = ["adam", "sgd"]


@dataclass(frozen=True)
class GcnParams:
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.w1.shape[1] != self.w2.shape[0]:
            raise DimensionError(
                f"Weight shapes do not chain: {self.w1.shape} and {self.w2.shape}"
            )

        ensure_finite("params", self.w1, self.w2)
        self.w1.setflags(write=False)
        self.w2.setflags(write=False)

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    def check(self, graph: Graph):
        if self.w1.shape[0] != graph.d or self.w2.shape[1] != graph.c:
            raise DimensionError(
                f"Params are {self.w1.shape[0]}→{self.w2.shape[1]},"
                f" graph has d={graph.d}, c={graph.c}"
            )


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    epochs: int = 200
    weight_decay: float = 5e-4
    seed: int = 0
    optimizer: str = "adam"
    hidden_dim: int = 128
    dropout: float = 0.5

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"Learning rate must be positive, got {self.lr}")

        if self.epochs <= 0:
            raise ConfigError(f"Epochs must be positive, got {self.epochs}")

        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"Unknown optimizer {self.optimizer}")

        if not 0 <= self.dropout < 1:
            raise ConfigError(f"Dropout must be in [0, 1), got {self.dropout}")

        if self.hidden_dim < 1 or self.weight_decay < 0:
            raise ConfigError("Hidden dim must be ≥ 1 and weight decay ≥ 0")


def graph_operator(graph: Graph) -> np.ndarray:
    """Normalized adjacency the GCN propagates with"""
    # Low-rank reconstructions can carry tiny negative weights
    return normalized_adjacency(np.maximum(graph.adjacency, 0.0))


def _check_inputs(a_norm: np.ndarray, x: np.ndarray, rows: int):
    n = a_norm.shape[0]
    if a_norm.shape != (n, n) or x.shape[0] != n or x.shape[1] != rows:
        raise DimensionError(
            f"Incompatible shapes: operator {a_norm.shape}, input {x.shape},"
            f" weights expect {rows} columns"
        )


def forward(
    a_norm: np.ndarray,
    x: np.ndarray,
    params: GcnParams,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    H1 = relu(M X W1), logits = M H1 W2
    :returns: Latent matrix H1 and logits
    """
    _check_inputs(a_norm, x, params.w1.shape[0])
    ensure_finite("forward", a_norm, x)
    h1 = relu(a_norm @ (x @ params.w1))
    logits = a_norm @ (h1 @ params.w2)
    ensure_finite("forward", logits)
    return h1, logits


def extract_latent(a_norm: np.ndarray, x: np.ndarray, params: GcnParams) -> np.ndarray:
    return forward(a_norm, x, params)[0]


def forward_from_latent(a_norm: np.ndarray, h_hat: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Downstream layer only: M Ĥ W2"""
    _check_inputs(a_norm, h_hat, w2.shape[0])
    return a_norm @ (h_hat @ w2)


def predict(graph: Graph, params: GcnParams) -> np.ndarray:
    params.check(graph)
    return forward(graph_operator(graph), graph.features, params)[1].argmax(axis=1)


def accuracy(graph: Graph, params: GcnParams, mask: typing.Optional[np.ndarray] = None) -> float:
    """Fraction of correct predictions on `mask` (test mask by default)"""
    mask = graph.test_mask if mask is None else mask
    index = np.flatnonzero(mask)
    if not index.size:
        raise DimensionError("Mask selects no nodes")

    return float(np.mean(predict(graph, params)[index] == graph.labels[index]))


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class _Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    moments: typing.Dict[str, typing.Tuple[np.ndarray, np.ndarray]] = field(
        default_factory=dict
    )

    def update(self, name: str, weight: np.ndarray, grad: np.ndarray) -> np.ndarray:
        m, v = self.moments.get(name, (np.zeros_like(grad), np.zeros_like(grad)))
        m = self.beta1 * m + (1 - self.beta1) * grad
        v = self.beta2 * v + (1 - self.beta2) * grad**2
        self.moments[name] = (m, v)
        m_hat = m / (1 - self.beta1**self.step)
        v_hat = v / (1 - self.beta2**self.step)
        return weight - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _dropout(rng: np.random.Generator, x: np.ndarray, rate: float) -> np.ndarray:
    if not rate:
        return np.ones_like(x)

    return (rng.random(x.shape) >= rate) / (1.0 - rate)


def train_surrogate(
    graph: Graph,
    config: TrainConfig,
    history: typing.Optional[typing.List[float]] = None,
) -> GcnParams:
    """
    Full-batch training on the masked cross-entropy of the train nodes
    :param history: If passed, receives the training loss of every epoch
    :raises TrainingDivergedError: Loss or gradient became non-finite
    """
    train_index = np.flatnonzero(graph.train_mask)
    if not train_index.size:
        raise DimensionError("Train mask is empty")

    rng = np.random.default_rng(config.seed)
    w1 = glorot(rng, graph.d, config.hidden_dim)
    w2 = glorot(rng, config.hidden_dim, graph.c)
    a_norm = graph_operator(graph)
    x = graph.features
    adam = _Adam(config.lr)

    for epoch in range(config.epochs):
        keep_x = _dropout(rng, x, config.dropout)
        x_in = x * keep_x
        pre = a_norm @ (x_in @ w1)
        h1 = relu(pre)
        keep_h = _dropout(rng, h1, config.dropout)
        h_in = h1 * keep_h
        logits = a_norm @ (h_in @ w2)

        if not np.all(np.isfinite(logits)):
            raise TrainingDivergedError("training", epoch, "logits")

        ce, grad_logits = masked_cross_entropy_adjoint(logits, graph.labels, graph.train_mask)
        loss = ce + 0.5 * config.weight_decay * (np.sum(w1**2) + np.sum(w2**2))
        if not np.isfinite(loss):
            raise TrainingDivergedError("training", epoch, "loss")

        if history is not None:
            history.append(float(loss))

        back = a_norm.T @ grad_logits
        grad_w2 = h_in.T @ back + config.weight_decay * w2
        grad_pre = relu_adjoint(pre, (back @ w2.T) * keep_h)
        grad_w1 = x_in.T @ (a_norm.T @ grad_pre) + config.weight_decay * w1

        if not (np.all(np.isfinite(grad_w1)) and np.all(np.isfinite(grad_w2))):
            raise TrainingDivergedError("training", epoch, "gradient")

        if config.optimizer == "adam":
            adam.step += 1
            w1 = adam.update("w1", w1, grad_w1)
            w2 = adam.update("w2", w2, grad_w2)
        else:
            w1 = w1 - config.lr * grad_w1
            w2 = w2 - config.lr * grad_w2

        if epoch % 50 == 0:
            logger.debug(f"Epoch {epoch}: loss={loss:.4f}")

    params = GcnParams(w1, w2)
    logger.info(
        f"Trained GCN (h={config.hidden_dim}, {config.epochs} epochs):"
        f" train acc {accuracy(graph, params, graph.train_mask):.3f}"
    )
    return params


def save_checkpoint(
    path: str,
    params: GcnParams,
    seed: int,
    config_hash: str,
):
    """One JSON header line, then W1 and W2 as little-endian float64"""
    header = {
        "d": params.w1.shape[0],
        "h": params.hidden_dim,
        "c": params.w2.shape[1],
        "seed": seed,
        "config_hash": config_hash,
        "version": utils.get_version_raw(),
    }
    utils.atomic_write(
        path,
        json.dumps(header, sort_keys=True).encode("utf-8")
        + b"\n"
        + params.w1.astype("<f8").tobytes()
        + params.w2.astype("<f8").tobytes(),
    )


def load_checkpoint(path: str) -> typing.Tuple[GcnParams, dict]:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        body = f.read()

    d, h, c = header["d"], header["h"], header["c"]
    if len(body) != 8 * (d * h + h * c):
        raise HiddenShiftError(f"Checkpoint {path} is truncated")

    weights = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return GcnParams(weights[: d * h].reshape(d, h), weights[d * h :].reshape(h, c)), header


__all__ = [
    "GcnParams",
    "TrainConfig",
    "forward",
    "extract_latent",
    "forward_from_latent",
    "masked_cross_entropy",
    "predict",
    "accuracy",
    "train_surrogate",
    "save_checkpoint",
    "load_checkpoint",
    "graph_operator",
]
