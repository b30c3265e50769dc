"""Contextual stochastic block model graphs and the Bayes reference classifier"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging
import math
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ._types import ConfigError, DimensionError
from .graph import Graph

logger = logging.getLogger(__name__)


def default_feat_dim(n: int) -> int:
    """n / (ln n)², rounded; 21 for n = 1000"""
    return max(1, round(n / math.log(n) ** 2)) if n > 1 else 1


@dataclass(frozen=True)
class CsbmParams:
    n: int = 1000
    p_in: float = 0.006326
    q_out: float = 0.001481
    sigma: float = 1.0
    feat_dim: int = 21
    mean_scale: float = 0.5
    train_ratio: float = 0.2

    def __post_init__(self):
        if self.n < 1 or self.feat_dim < 1:
            raise ConfigError("CSBM needs n ≥ 1 and feat_dim ≥ 1")

        if not 0 <= self.q_out <= self.p_in <= 1:
            raise ConfigError(
                f"Need 0 ≤ q_out ≤ p_in ≤ 1, got p_in={self.p_in}, q_out={self.q_out}"
            )

        if self.sigma < 0 or not 0 <= self.train_ratio <= 1:
            raise ConfigError("Need sigma ≥ 0 and train_ratio in [0, 1]")

    @property
    def feature_mean(self) -> float:
        """Magnitude M·σ/(2√d) of the class mean"""
        return self.mean_scale * self.sigma / (2 * math.sqrt(self.feat_dim))

    @property
    def mean_vector(self) -> np.ndarray:
        return np.full(self.feat_dim, self.feature_mean / math.sqrt(self.feat_dim))

    @property
    def expected_edges(self) -> float:
        half = self.n / 2
        return 2 * half * (half - 1) / 2 * self.p_in + half * half * self.q_out


def csbm_sample(params: CsbmParams, seed: int) -> Graph:
    """
    Two-class CSBM sample: y ~ Ber(1/2), x | y ~ N((2y−1)μ, σ²I),
    edges Ber(p_in) within and Ber(q_out) across classes
    """
    rng = np.random.default_rng(seed)
    n = params.n
    labels = (rng.random(n) < 0.5).astype(np.int64)
    features = (2 * labels - 1)[:, None] * params.mean_vector[None, :]
    features = features + params.sigma * rng.standard_normal((n, params.feat_dim))

    rows, cols = np.triu_indices(n, k=1)
    probability = np.where(labels[rows] == labels[cols], params.p_in, params.q_out)
    keep = rng.random(rows.size) < probability
    adjacency = np.zeros((n, n))
    adjacency[rows[keep], cols[keep]] = 1.0
    adjacency[cols[keep], rows[keep]] = 1.0

    order = rng.permutation(n)
    train = np.zeros(n, dtype=bool)
    train[order[: int(round(params.train_ratio * n))]] = True

    graph = Graph(adjacency, features, labels, 2, train, ~train)
    logger.debug(f"CSBM sample {seed=}: |E|={graph.num_edges}")
    return graph


def _check_params(params: CsbmParams):
    for name in ("p_in", "q_out"):
        value = getattr(params, name)
        if not 0 < value < 1:
            raise ValueError(f"Bayes classifier needs {name} in (0, 1), got {value}")

    if params.sigma <= 0:
        raise ValueError(f"Bayes classifier needs sigma > 0, got {params.sigma}")


def score_difference(
    adjacency: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    params: CsbmParams,
) -> np.ndarray:
    """Log-likelihood of class 1 minus class 0 for every node, self excluded"""
    _check_params(params)
    mean = params.mean_vector
    features_term = (
        norm.logpdf(features, loc=mean, scale=params.sigma).sum(axis=1)
        - norm.logpdf(features, loc=-mean, scale=params.sigma).sum(axis=1)
    )

    ones = (labels == 1).astype(np.float64)
    zeros = (labels == 0).astype(np.float64)
    linked = (adjacency > 0).astype(np.float64)
    np.fill_diagonal(linked, 0.0)

    neighbors_1, neighbors_0 = linked @ ones, linked @ zeros
    total_1, total_0 = ones.sum() - ones, zeros.sum() - zeros

    log_ratio_edge = math.log(params.p_in) - math.log(params.q_out)
    log_ratio_gap = math.log1p(-params.p_in) - math.log1p(-params.q_out)
    structure_term = (neighbors_1 - neighbors_0) * log_ratio_edge + (
        (total_1 - neighbors_1) - (total_0 - neighbors_0)
    ) * log_ratio_gap

    return features_term + structure_term


def bayes_classify(
    adjacency: np.ndarray,
    features: np.ndarray,
    other_labels: np.ndarray,
    params: CsbmParams,
) -> np.ndarray:
    """Reference prediction per node; ties go to class 0"""
    return (score_difference(adjacency, features, other_labels, params) > 0).astype(np.int64)


def bayes_accuracy(graph: Graph, params: CsbmParams) -> float:
    predicted = bayes_classify(graph.adjacency, graph.features, graph.labels, params)
    return float(np.mean(predicted == graph.labels))


def bayes_maintain(clean: Graph, attacked: Graph, params: CsbmParams) -> float:
    """Fraction of nodes the reference classifier gets right on both graphs"""
    if clean.n != attacked.n or not np.array_equal(clean.features, attacked.features):
        raise DimensionError("Clean and attacked graphs must share nodes and features")

    before = bayes_classify(clean.adjacency, clean.features, clean.labels, params)
    after = bayes_classify(attacked.adjacency, attacked.features, clean.labels, params)
    return float(np.mean((before == clean.labels) & (after == clean.labels)))


@dataclass
class SemanticRow:
    attack: str
    gcn_accuracy: float
    gcn_stderr: float
    bayes_maintain: float
    bayes_stderr: float
    seeds: typing.List[int] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.bayes_maintain <= 1:
            raise ValueError(f"bayes_maintain out of range: {self.bayes_maintain}")


@dataclass
class SemanticReport:
    budget_ratio: float
    clean_gcn_accuracy: float
    clean_bayes_accuracy: float
    rows: typing.List[SemanticRow] = field(default_factory=list)

    def row(self, attack: str) -> typing.Optional[SemanticRow]:
        return next((row for row in self.rows if row.attack == attack), None)

    def as_dict(self) -> dict:
        return {
            "budget_ratio": self.budget_ratio,
            "clean_gcn_accuracy": self.clean_gcn_accuracy,
            "clean_bayes_accuracy": self.clean_bayes_accuracy,
            "rows": [vars(row) for row in self.rows],
        }
