"""
Dense kernels with their adjoints.
Every `*_adjoint` takes the upstream gradient and returns the gradient
with respect to the kernel's input(s).
"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging
import typing

import numpy as np
from scipy.special import log_softmax, softmax

from ._types import DimensionError, NonFiniteError
from .graph import UNKNOWN

logger = logging.getLogger(__name__)

LossFn = typing.Callable[[np.ndarray], typing.Tuple[float, np.ndarray]]


def ensure_finite(stage: str, *arrays: np.ndarray, step: typing.Optional[int] = None):
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(stage, step)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_adjoint(pre: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return grad * (pre > 0)


def normalized_adjacency_adjoint(
    adjacency: np.ndarray,
    grad: np.ndarray,
    frozen_degree: bool = False,
) -> np.ndarray:
    """
    Gradient of a loss w.r.t. every entry of `adjacency`, given the gradient
    `grad` w.r.t. M = D̃^{-1/2}(A+I)D̃^{-1/2}.
    Entries are treated as independent; degrees are row sums of A+I.
    :param frozen_degree: Treat the degrees as constants
    """
    n = adjacency.shape[0]
    if grad.shape != (n, n):
        raise DimensionError(f"Gradient shape {grad.shape} does not match n={n}")

    a_tilde = adjacency + np.eye(n)
    degree = a_tilde.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    out = grad * inv_sqrt[:, None] * inv_sqrt[None, :]

    if frozen_degree:
        return out

    weighted = grad * (inv_sqrt[:, None] * a_tilde * inv_sqrt[None, :])
    grad_degree = -0.5 / degree * (weighted.sum(axis=1) + weighted.sum(axis=0))
    return out + grad_degree[:, None]


def pair_gradient(grad_adjacency: np.ndarray, delta: np.ndarray, pairs) -> np.ndarray:
    """Chain rule through Â = A + C ⊙ S(s) onto the upper-triangle vector s"""
    return pairs.gather(delta * (grad_adjacency + grad_adjacency.T))


def _check_mask(labels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    index = np.flatnonzero(mask)
    if not index.size:
        raise DimensionError("Mask selects no nodes")

    if np.any(labels[index] == UNKNOWN):
        raise ValueError("Mask selects nodes with unknown labels")

    return index


def masked_cross_entropy(
    logits: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
) -> float:
    """Mean of −log softmax(logits)[label] over the masked nodes"""
    index = _check_mask(labels, mask)
    ensure_finite("cross_entropy", logits)
    log_probs = log_softmax(logits[index], axis=1)
    return float(-log_probs[np.arange(index.size), labels[index]].mean())


def masked_cross_entropy_adjoint(
    logits: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
) -> typing.Tuple[float, np.ndarray]:
    """Value and gradient w.r.t. the full logits matrix"""
    index = _check_mask(labels, mask)
    ensure_finite("cross_entropy", logits)
    log_probs = log_softmax(logits[index], axis=1)
    rows = np.arange(index.size)
    value = float(-log_probs[rows, labels[index]].mean())

    local = np.exp(log_probs)
    local[rows, labels[index]] -= 1.0
    grad = np.zeros_like(logits)
    grad[index] = local / index.size
    return value, grad


def row_kl(h_a: np.ndarray, h_b: np.ndarray) -> float:
    """(1/n) Σ_i KL(softmax(h_a)_i ‖ softmax(h_b)_i)"""
    if h_a.shape != h_b.shape:
        raise DimensionError(f"Shapes differ: {h_a.shape} vs {h_b.shape}")

    ensure_finite("similarity", h_a, h_b)
    log_p = log_softmax(h_a, axis=1)
    log_q = log_softmax(h_b, axis=1)
    # Clamp tiny negative roundoff, KL is nonnegative
    return max(float((np.exp(log_p) * (log_p - log_q)).sum() / h_a.shape[0]), 0.0)


def row_kl_adjoint(
    h_a: np.ndarray,
    h_b: np.ndarray,
) -> typing.Tuple[float, np.ndarray, np.ndarray]:
    """Value of `row_kl` and its gradients w.r.t. both arguments"""
    if h_a.shape != h_b.shape:
        raise DimensionError(f"Shapes differ: {h_a.shape} vs {h_b.shape}")

    ensure_finite("similarity", h_a, h_b)
    n = h_a.shape[0]
    log_p = log_softmax(h_a, axis=1)
    log_q = log_softmax(h_b, axis=1)
    p, q = np.exp(log_p), softmax(h_b, axis=1)
    ratio = log_p - log_q
    value = float((p * ratio).sum() / n)

    grad_a = p * (ratio - (p * ratio).sum(axis=1, keepdims=True)) / n
    grad_b = (q - p) / n
    return max(value, 0.0), grad_a, grad_b


def finite_difference_check(
    loss_fn: LossFn,
    point: np.ndarray,
    step: float = 1e-6,
    samples: int = 64,
    seed: int = 0,
    floor: float = 1e-6,
) -> typing.Dict[str, float]:
    """
    Compare the analytic gradient returned by `loss_fn` against central
    differences on a random subset of coordinates
    :param loss_fn: Returns (value, gradient) at a point
    :param floor: Lower bound of the relative error denominator
    :returns: {"max_rel_err", "max_abs_err", "checked"}
    """
    if step <= 0:
        raise ValueError("Step must be positive")

    point = np.array(point, dtype=np.float64)
    _, analytic = loss_fn(point)
    ensure_finite("finite_difference", analytic)

    rng = np.random.default_rng(seed)
    flat = point.reshape(-1)
    coords = rng.choice(flat.size, size=min(samples, flat.size), replace=False)

    max_rel, max_abs = 0.0, 0.0
    for k in coords:
        shifted = flat.copy()
        shifted[k] += step
        plus, _ = loss_fn(shifted.reshape(point.shape))
        shifted[k] -= 2 * step
        minus, _ = loss_fn(shifted.reshape(point.shape))

        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise NonFiniteError("finite_difference", int(k))

        numeric = (plus - minus) / (2 * step)
        exact = float(analytic.reshape(-1)[k])
        error = abs(numeric - exact)
        max_abs = max(max_abs, error)
        max_rel = max(max_rel, error / max(abs(numeric), abs(exact), floor))

    logger.debug(f"Gradient check over {coords.size} coordinates: {max_rel=:.3e}")
    return {"max_rel_err": max_rel, "max_abs_err": max_abs, "checked": int(coords.size)}
