"""Comparison attacks and preprocessing defenses"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging
import typing

import numpy as np

from ._types import AttackResult, BudgetError, DimensionError, NonFiniteError
from .gcn import GcnParams, predict
from .graph import (
    AttackBudget,
    Graph,
    apply_perturbation,
    complement_delta,
    flip_count,
    normalized_adjacency,
    pair_index,
    relaxed_adjacency,
)
from .kernels import (
    masked_cross_entropy_adjoint,
    normalized_adjacency_adjoint,
    pair_gradient,
    relu,
    relu_adjoint,
)
from .mapping import MapConfig, pgd_minimize, sample_binary

logger = logging.getLogger(__name__)


def _result(graph: Graph, attacked: np.ndarray, method: str, **trace) -> AttackResult:
    return AttackResult(attacked, method, flip_count(graph.adjacency, attacked), trace)


def random_attack(graph: Graph, budget: AttackBudget, seed: int) -> AttackResult:
    """Exactly ε distinct uniformly chosen pair flips"""
    pairs = pair_index(graph.n)
    if budget.epsilon_flips > pairs.size:
        raise BudgetError(
            f"Budget {budget.epsilon_flips} exceeds the {pairs.size} node pairs"
        )

    chosen = np.random.default_rng(seed).choice(pairs.size, budget.epsilon_flips, replace=False)
    s = np.zeros(pairs.size)
    s[chosen] = 1.0
    return _result(graph, apply_perturbation(graph.adjacency, s), "random")


def attack_labels(graph: Graph, params: GcnParams) -> np.ndarray:
    """Train labels where known to the attacker, surrogate predictions elsewhere"""
    return np.where(graph.train_mask, graph.labels, predict(graph, params))


class CrossEntropyObjective:
    """−CE of the surrogate on Â(s) over all nodes, as a function of pair variables s"""

    def __init__(
        self,
        graph: Graph,
        params: GcnParams,
        labels: np.ndarray,
        frozen_degree: bool = False,
    ):
        self.adjacency = graph.adjacency
        self.delta = complement_delta(graph.adjacency)
        self.pairs = pair_index(graph.n)
        self.xw = graph.features @ params.w1
        self.w2 = params.w2
        self.labels = labels
        self.mask = np.ones(graph.n, dtype=bool)
        self.frozen_degree = frozen_degree

    @property
    def size(self) -> int:
        return self.pairs.size

    def _logits(self, a_hat: np.ndarray):
        a_norm = normalized_adjacency(a_hat)
        pre = a_norm @ self.xw
        hw = relu(pre) @ self.w2
        return a_norm, pre, hw, a_norm @ hw

    def value(self, s: np.ndarray) -> float:
        a_hat = relaxed_adjacency(self.adjacency, self.delta, s, self.pairs)
        logits = self._logits(a_hat)[-1]
        return -masked_cross_entropy_adjoint(logits, self.labels, self.mask)[0]

    def adjacency_gradient(self, a_hat: np.ndarray) -> typing.Tuple[float, np.ndarray]:
        """CE and its gradient w.r.t. every entry of Â"""
        a_norm, pre, hw, logits = self._logits(a_hat)
        ce, grad_logits = masked_cross_entropy_adjoint(logits, self.labels, self.mask)
        grad_pre = relu_adjoint(pre, a_norm.T @ grad_logits @ self.w2.T)
        grad_norm = grad_logits @ hw.T + grad_pre @ self.xw.T
        return ce, normalized_adjacency_adjoint(a_hat, grad_norm, self.frozen_degree)

    def __call__(self, s: np.ndarray) -> typing.Tuple[float, np.ndarray]:
        a_hat = relaxed_adjacency(self.adjacency, self.delta, s, self.pairs)
        ce, grad_adjacency = self.adjacency_gradient(a_hat)
        return -ce, -pair_gradient(grad_adjacency, self.delta, self.pairs)


def flip_scores(graph: Graph, params: GcnParams) -> np.ndarray:
    """First-order CE increase of flipping each pair of the clean graph"""
    objective = CrossEntropyObjective(graph, params, attack_labels(graph, params))
    _, grad_adjacency = objective.adjacency_gradient(graph.adjacency)
    return pair_gradient(grad_adjacency, objective.delta, objective.pairs)


def grad_greedy_attack(graph: Graph, params: GcnParams, budget: AttackBudget) -> AttackResult:
    """
    One-shot gradient ranking: flip the ε pairs whose flip direction increases
    the loss the most. A simplified stand-in for gradient-argmax attacks.
    """
    scores = flip_scores(graph, params)
    order = np.argsort(-scores, kind="stable")[: budget.epsilon_flips]
    chosen = order[scores[order] > 0]
    s = np.zeros_like(scores)
    s[chosen] = 1.0

    if chosen.size < budget.epsilon_flips:
        logger.info(
            f"Only {chosen.size} pairs have a loss-increasing flip,"
            f" budget was {budget.epsilon_flips}"
        )

    return _result(graph, apply_perturbation(graph.adjacency, s), "grad-greedy")


def pgd_ce_attack(
    graph: Graph,
    params: GcnParams,
    budget: AttackBudget,
    map_config: MapConfig,
    seed: int,
    workers: int = 1,
) -> AttackResult:
    """PGD topology attack: the same projection and sampling, on −CE"""
    if not budget.epsilon_flips:
        return _result(graph, np.array(graph.adjacency), "pgd-ce", loss=[])

    objective = CrossEntropyObjective(
        graph,
        params,
        attack_labels(graph, params),
        map_config.frozen_degree,
    )
    trace = []
    s = pgd_minimize(
        objective,
        objective.size,
        budget.epsilon_flips,
        map_config,
        trace,
        stage="pgd_ce",
    )
    chosen = sample_binary(
        s,
        map_config.samples,
        budget.epsilon_flips,
        objective.value,
        seed,
        workers,
    )
    return _result(graph, apply_perturbation(graph.adjacency, chosen), "pgd-ce", loss=trace)


def _is_binary(x: np.ndarray) -> bool:
    return bool(np.all((x == 0) | (x == 1)))


def edge_similarity(features: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Jaccard similarity for binary features, cosine similarity otherwise"""
    a, b = features[rows], features[cols]

    if _is_binary(features):
        inter = np.count_nonzero(a * b, axis=1)
        union = np.count_nonzero(a + b, axis=1)
        return np.divide(inter, union, out=np.zeros(rows.size), where=union > 0)

    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return np.divide((a * b).sum(axis=1), norms, out=np.zeros(rows.size), where=norms > 0)


def jaccard_defense(graph: Graph, threshold: float) -> Graph:
    """Drop every edge whose endpoint features are less similar than `threshold`"""
    rows, cols = np.nonzero(np.triu(graph.adjacency, 1))
    drop = edge_similarity(graph.features, rows, cols) < threshold

    adjacency = np.array(graph.adjacency)
    adjacency[rows[drop], cols[drop]] = 0.0
    adjacency[cols[drop], rows[drop]] = 0.0
    logger.debug(f"Jaccard pruning removed {int(drop.sum())} of {rows.size} edges")
    return graph.with_adjacency(adjacency, weighted=graph.weighted)


def low_rank_approximation(matrix: np.ndarray, rank: int) -> np.ndarray:
    """Best rank-k approximation via truncated singular value decomposition"""
    if not 1 <= rank <= min(matrix.shape):
        raise DimensionError(f"Rank must be in 1..{min(matrix.shape)}, got {rank}")

    if not np.all(np.isfinite(matrix)):
        raise NonFiniteError("svd")

    u, sigma, vt = np.linalg.svd(matrix)
    return (u[:, :rank] * sigma[:rank]) @ vt[:rank]


def svd_defense(graph: Graph, rank: int, binarize: bool = False) -> Graph:
    """
    Replace the adjacency with its rank-k reconstruction, clamped to be
    nonnegative with zero diagonal. The result is a weighted graph unless
    `binarize` rounds it back to edges.
    """
    if rank > graph.n:
        logger.warning(f"SVD rank {rank} exceeds the {graph.n} nodes, using {graph.n}")
        rank = graph.n

    approx = low_rank_approximation(graph.adjacency, rank)
    approx = (approx + approx.T) / 2

    negative = int(np.count_nonzero(approx < 0))
    if negative:
        logger.debug(f"Clamped {negative} negative entries of the rank-{rank} reconstruction")

    approx = np.maximum(approx, 0.0)
    np.fill_diagonal(approx, 0.0)

    if binarize:
        return graph.with_adjacency((approx >= 0.5).astype(np.float64))

    return graph.with_adjacency(approx, weighted=True)
