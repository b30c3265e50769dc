"""Adversarial latent representation via class-masked combination weights"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging
import typing
from dataclasses import dataclass

import numpy as np

from ._types import ConfigError, NonFiniteError
from .gcn import GcnParams, extract_latent, forward_from_latent, graph_operator, predict
from .graph import UNKNOWN, Graph, attacker_labels
from .kernels import masked_cross_entropy_adjoint, row_kl, row_kl_adjoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerturbConfig:
    iterations: int = 300
    lr: float = 0.3
    beta: float = 0.2
    eps_den: float = 1e-8
    pseudo_labels: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError(f"Iterations must be nonnegative, got {self.iterations}")

        if self.lr <= 0:
            raise ConfigError(f"Learning rate must be positive, got {self.lr}")

        if self.beta < 0 or self.eps_den < 0:
            raise ConfigError("Regularization and denominator guard must be ≥ 0")


def same_class_mask(labels: np.ndarray) -> np.ndarray:
    known = labels != UNKNOWN
    return (labels[:, None] == labels[None, :]) & known[:, None] & known[None, :]


def tau_clip(
    alpha: np.ndarray,
    labels: np.ndarray,
    same: typing.Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Same-class known pairs keep their nonnegative weight,
    unknown rows become one-hot self rows, everything else is zeroed
    :param same: Precomputed `same_class_mask(labels)`
    """
    same = same_class_mask(labels) if same is None else same
    out = np.where(same, np.maximum(alpha, 0.0), 0.0)
    unknown = np.flatnonzero(labels == UNKNOWN)
    out[unknown] = 0.0
    out[unknown, unknown] = 1.0
    return out


def combine_representations(
    alpha: np.ndarray,
    h: np.ndarray,
    eps_den: float = 1e-8,
) -> np.ndarray:
    """Row i = Σ_j α_ij H_j / (Σ_j α_ij + eps_den)"""
    return (alpha @ h) / (alpha.sum(axis=1) + eps_den)[:, None]


def similarity(h_a: np.ndarray, h_b: np.ndarray) -> float:
    """Negated mean row-wise KL of row softmaxes, ≤ 0 and 0 only for equal rows"""
    return -row_kl(h_a, h_b)


class SemanticObjective:
    """
    loss₁(α) = −CE(M Ĥ(α) W2) − β·sim(H, Ĥ(α)), with everything that does
    not depend on α computed once
    """

    def __init__(
        self,
        a_norm: np.ndarray,
        h: np.ndarray,
        w2: np.ndarray,
        labels: np.ndarray,
        mask: np.ndarray,
        beta: float,
        eps_den: float = 1e-8,
    ):
        self.a_norm = a_norm
        self.h = h
        self.w2 = w2
        self.labels = labels
        self.mask = mask
        self.beta = beta
        self.eps_den = eps_den

    def _cross_entropy(self, logits: np.ndarray) -> typing.Tuple[float, np.ndarray]:
        # Nothing known to misclassify
        if not self.mask.any():
            return 0.0, np.zeros_like(logits)

        return masked_cross_entropy_adjoint(logits, self.labels, self.mask)

    def evaluate(
        self,
        alpha: np.ndarray,
    ) -> typing.Tuple[typing.Dict[str, float], np.ndarray]:
        """Loss parts (ce, sim, loss) and the gradient w.r.t. α"""
        row_sum = alpha.sum(axis=1) + self.eps_den
        h_hat = (alpha @ self.h) / row_sum[:, None]
        logits = forward_from_latent(self.a_norm, h_hat, self.w2)
        ce, grad_logits = self._cross_entropy(logits)
        kl, _, grad_kl = row_kl_adjoint(self.h, h_hat)

        grad_h_hat = -(self.a_norm.T @ grad_logits @ self.w2.T) + self.beta * grad_kl
        grad_row = -(grad_h_hat * h_hat).sum(axis=1) / row_sum
        grad = (grad_h_hat / row_sum[:, None]) @ self.h.T + grad_row[:, None]
        return {"ce": ce, "sim": -kl, "loss": -ce + self.beta * kl}, grad

    def __call__(self, alpha: np.ndarray) -> typing.Tuple[float, np.ndarray]:
        parts, grad = self.evaluate(alpha)
        return parts["loss"], grad


def _objective(
    graph: Graph,
    params: GcnParams,
    beta: float,
    eps_den: float,
    pseudo_labels: bool,
) -> typing.Tuple[SemanticObjective, np.ndarray]:
    a_norm = graph_operator(graph)
    h = extract_latent(a_norm, graph.features, params)
    labels = attacker_labels(graph)
    mask = graph.train_mask

    if pseudo_labels:
        labels = np.where(graph.train_mask, labels, predict(graph, params))
        mask = np.ones(graph.n, dtype=bool)

    return SemanticObjective(a_norm, h, params.w2, labels, mask, beta, eps_den), labels


def loss1(
    alpha: np.ndarray,
    graph: Graph,
    params: GcnParams,
    beta: float,
    eps_den: float = 1e-8,
    pseudo_labels: bool = False,
) -> float:
    objective, _ = _objective(graph, params, beta, eps_den, pseudo_labels)
    return objective(alpha)[0]


def optimize_alpha(
    graph: Graph,
    params: GcnParams,
    config: PerturbConfig,
    trace: typing.Optional[typing.List[typing.Dict[str, float]]] = None,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """
    Gradient descent on loss₁ from the identity, clipping after every step
    :param trace: If passed, receives (iteration, ce, sim, loss) rows
    :returns: Best α seen and its combined representation
    :raises NonFiniteError: Gradient became non-finite, with the iteration index
    """
    objective, labels = _objective(
        graph, params, config.beta, config.eps_den, config.pseudo_labels
    )
    same = same_class_mask(labels)
    alpha = np.eye(graph.n)
    best_alpha, best_loss = alpha, np.inf

    for iteration in range(config.iterations + 1):
        parts, grad = objective.evaluate(alpha)

        if trace is not None:
            trace.append({"iteration": iteration, **parts})

        if parts["loss"] < best_loss:
            best_alpha, best_loss = alpha, parts["loss"]

        if iteration == config.iterations:
            break

        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("optimize_alpha", iteration, "loss₁ gradient")

        alpha = tau_clip(alpha - config.lr * grad, labels, same)
        empty = np.flatnonzero(alpha.sum(axis=1) == 0)
        if empty.size:
            logger.warning(f"Reset {empty.size} all-zero α rows to self weight")
            alpha[empty, empty] = 1.0

    h_hat = combine_representations(best_alpha, objective.h, config.eps_den)
    logger.info(
        f"α optimisation: loss₁ {best_loss:.4f} after {config.iterations} iterations"
    )
    return best_alpha, h_hat


def noisy_latent(
    h: np.ndarray,
    target_kl: float,
    seed: int,
    max_iter: int = 60,
    rtol: float = 1e-3,
) -> typing.Tuple[np.ndarray, float]:
    """
    relu(H + σZ) with a fixed Gaussian Z and σ bisected so that the mean row
    KL from H matches `target_kl`
    :returns: Noisy latent and the σ used
    """
    if target_kl <= 0:
        return np.array(h), 0.0

    noise = np.random.default_rng(seed).standard_normal(h.shape)

    def divergence(sigma: float) -> float:
        return row_kl(h, np.maximum(h + sigma * noise, 0.0))

    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if divergence(hi) >= target_kl:
            break

        lo, hi = hi, hi * 2
    else:
        logger.warning(f"Noise never reached KL {target_kl:.3e}, using σ={hi:.3e}")
        return np.maximum(h + hi * noise, 0.0), hi

    sigma = hi
    for _ in range(max_iter):
        sigma = (lo + hi) / 2
        gap = divergence(sigma) - target_kl
        if abs(gap) <= rtol * target_kl:
            break

        if gap > 0:
            hi = sigma
        else:
            lo = sigma

    logger.debug(f"Latent noise σ={sigma:.4e} for KL {target_kl:.4e}")
    return np.maximum(h + sigma * noise, 0.0), sigma
