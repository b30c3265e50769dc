"""
Mapping a target latent representation back onto graph structure:
box/budget projection, PGD over relaxed pair variables, randomized rounding
"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import itertools
import logging
import math
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._types import AttackResult, ConfigError, NonFiniteError, ProjectionError
from .gcn import GcnParams, graph_operator
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
from .kernels import normalized_adjacency_adjoint, pair_gradient, relu, relu_adjoint, row_kl_adjoint
from .semantic import PerturbConfig, optimize_alpha

logger = logging.getLogger(__name__)

Objective = typing.Callable[[np.ndarray], typing.Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class MapConfig:
    iterations: int = 300
    q: float = 20.0
    samples: int = 20
    tol: float = 1e-6
    max_bisect: int = 100
    frozen_degree: bool = False
    prefixes: int = 8

    def __post_init__(self):
        if self.iterations < 0 or self.q <= 0 or self.samples < 1:
            raise ConfigError("Need iterations ≥ 0, q > 0 and at least one sample")

        if self.prefixes < 0:
            raise ConfigError(f"Prefix count must be nonnegative, got {self.prefixes}")

        if self.tol <= 0 or self.max_bisect < 1:
            raise ConfigError("Bisection needs a positive tolerance and iteration cap")


def clip_box(x):
    """min(1, max(0, x)), elementwise for arrays"""
    return np.clip(x, 0.0, 1.0)


def bisect_mu(
    a: np.ndarray,
    epsilon: float,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> float:
    """
    Shift μ > 0 with ε − tol ≤ Σ clip_box(a − μ) ≤ ε, searched on [0, max(a)]
    :raises ProjectionError: Non-finite input, nothing to project,
                             or tolerance not reached
    """
    if not np.all(np.isfinite(a)):
        raise ProjectionError("Cannot bracket the shift of a non-finite vector")

    if clip_box(a).sum() <= epsilon:
        raise ProjectionError("Vector is already within budget, no shift needed")

    lo, hi = 0.0, float(np.max(a))
    for _ in range(max_iter):
        mu = (lo + hi) / 2
        excess = clip_box(a - mu).sum() - epsilon
        if -tol <= excess <= 0:
            return mu

        if excess > 0:
            lo = mu
        else:
            hi = mu

    raise ProjectionError(f"Bisection did not reach {tol=} in {max_iter} iterations")


def project_budget(
    a: np.ndarray,
    epsilon: float,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> np.ndarray:
    """Euclidean projection onto {s ∈ [0,1]^N, Σs ≤ ε}"""
    if not np.all(np.isfinite(a)):
        raise ProjectionError("Cannot project a non-finite vector")

    if epsilon < 0:
        raise ProjectionError(f"Budget must be nonnegative, got {epsilon}")

    clipped = clip_box(a)
    if not epsilon:
        return np.zeros_like(clipped)

    if clipped.sum() <= epsilon:
        return clipped

    return clip_box(a - bisect_mu(a, epsilon, tol, max_iter))


class StructureObjective:
    """
    loss₂(s) = mean row KL(softmax(H(Â(s))) ‖ softmax(Ĥ)),
    H(Â) = relu(M(Â) X W1), Â(s) = A + C ⊙ S(s)
    """

    def __init__(
        self,
        graph: Graph,
        params: GcnParams,
        h_hat: np.ndarray,
        frozen_degree: bool = False,
    ):
        self.adjacency = graph.adjacency
        self.delta = complement_delta(graph.adjacency)
        self.pairs = pair_index(graph.n)
        self.xw = graph.features @ params.w1
        self.h_hat = h_hat
        self.frozen_degree = frozen_degree

    @property
    def size(self) -> int:
        return self.pairs.size

    def latent(self, s: np.ndarray) -> np.ndarray:
        a_hat = relaxed_adjacency(self.adjacency, self.delta, s, self.pairs)
        return relu(normalized_adjacency(a_hat) @ self.xw)

    def value(self, s: np.ndarray) -> float:
        return row_kl_adjoint(self.latent(s), self.h_hat)[0]

    def __call__(self, s: np.ndarray) -> typing.Tuple[float, np.ndarray]:
        a_hat = relaxed_adjacency(self.adjacency, self.delta, s, self.pairs)
        pre = normalized_adjacency(a_hat) @ self.xw
        value, grad_h, _ = row_kl_adjoint(relu(pre), self.h_hat)
        grad_norm = relu_adjoint(pre, grad_h) @ self.xw.T
        grad_adjacency = normalized_adjacency_adjoint(a_hat, grad_norm, self.frozen_degree)
        return value, pair_gradient(grad_adjacency, self.delta, self.pairs)


def loss2(
    s: np.ndarray,
    graph: Graph,
    params: GcnParams,
    h_hat: np.ndarray,
) -> float:
    return StructureObjective(graph, params, h_hat).value(s)


def pgd_minimize(
    objective: Objective,
    size: int,
    epsilon: float,
    config: MapConfig,
    trace: typing.Optional[typing.List[typing.Dict[str, float]]] = None,
    stage: str = "pgd_map",
) -> np.ndarray:
    """
    Projected gradient descent from s = 0 with steps q/√(t+1)
    :returns: The iterate with the smallest objective
    :raises NonFiniteError: Gradient became non-finite, with the iteration index
    """
    s = np.zeros(size)
    best_s, best_loss = s, np.inf

    for t in range(config.iterations + 1):
        value, grad = objective(s)

        if trace is not None:
            trace.append({"iteration": t, "loss": value, "mass": float(s.sum())})

        if value < best_loss:
            best_s, best_loss = s, value

        if t == config.iterations:
            break

        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(stage, t, "gradient")

        s = project_budget(
            s - config.q / math.sqrt(t + 1) * grad,
            epsilon,
            config.tol,
            config.max_bisect,
        )

    logger.debug(f"{stage}: best loss {best_loss:.6f}, mass {best_s.sum():.3f}")
    return best_s


def pgd_map(
    graph: Graph,
    params: GcnParams,
    h_hat: np.ndarray,
    config: MapConfig,
    epsilon: float,
    trace: typing.Optional[typing.List[typing.Dict[str, float]]] = None,
) -> np.ndarray:
    objective = StructureObjective(graph, params, h_hat, config.frozen_degree)
    return pgd_minimize(objective, objective.size, epsilon, config, trace)


def top_entries(s: np.ndarray, count: int) -> np.ndarray:
    """Binary vector with the `count` largest positive entries of `s`, stable on ties"""
    out = np.zeros_like(s)
    order = np.argsort(-s, kind="stable")[:count]
    out[order[s[order] > 0]] = 1.0
    return out


def sample_binary(
    s: np.ndarray,
    samples: int,
    epsilon: float,
    loss_fn: typing.Callable[[np.ndarray], float],
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """
    Draw `samples` binary vectors d_i = [s_i > p_i], p ~ U(0,1), and keep the
    feasible one with the smallest loss. Draw k uses its own (seed, k) stream.
    Falls back to the top-⌊ε⌋ entries of `s` when no draw is feasible.
    """
    limit = int(math.floor(epsilon))
    feasible = []
    for k in range(samples):
        support = np.flatnonzero(s > np.random.default_rng([seed, k]).random(s.shape))
        if support.size <= limit:
            feasible.append(support)

    if not feasible:
        logger.warning(
            f"None of {samples} draws fit the budget of {limit} flips,"
            " taking the largest entries"
        )
        return top_entries(s, limit)

    def dense(support: np.ndarray) -> np.ndarray:
        out = np.zeros_like(s, dtype=np.float64)
        out[support] = 1.0
        return out

    def evaluate(support: np.ndarray) -> float:
        return loss_fn(dense(support))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            losses = list(pool.map(evaluate, feasible))
    else:
        losses = [evaluate(support) for support in feasible]

    logger.debug(f"{len(feasible)}/{samples} draws feasible, best loss {min(losses):.6f}")
    return dense(feasible[int(np.argmin(losses))])


def prefix_counts(limit: int, prefixes: int) -> typing.List[int]:
    """Evenly spaced flip counts 1..limit, at most `prefixes` of them"""
    if limit < 1 or prefixes < 1:
        return []

    return sorted({max(1, round(limit * j / prefixes)) for j in range(1, prefixes + 1)})


def round_structure(
    s: np.ndarray,
    config: MapConfig,
    epsilon: float,
    loss_fn: typing.Callable[[np.ndarray], float],
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """
    Binary vector with the smallest loss among the best random draw, the
    unperturbed graph and the top-k entries of `s` for `prefix_counts` sizes.
    Ties keep the earlier candidate in that order.
    """
    limit = int(math.floor(epsilon))
    candidates = [("sampled", sample_binary(s, config.samples, epsilon, loss_fn, seed, workers))]
    candidates.append(("clean", np.zeros_like(s, dtype=np.float64)))
    candidates.extend(
        (f"top-{count}", top_entries(s, count)) for count in prefix_counts(limit, config.prefixes)
    )

    best_name, best = candidates[0]
    best_loss = loss_fn(best)
    for name, candidate in candidates[1:]:
        value = loss_fn(candidate)
        if value < best_loss:
            best_name, best, best_loss = name, candidate, value

    logger.debug(f"Rounding kept {best_name} with loss {best_loss:.6f}, {int(best.sum())} flips")
    return best


def brute_force_optimum(
    loss_fn: typing.Callable[[np.ndarray], float],
    size: int,
    epsilon: int,
) -> typing.Tuple[float, np.ndarray]:
    """Exhaustive minimum over binary vectors with at most ε ones, tiny sizes only"""
    best_value, best = math.inf, np.zeros(size)
    for count in range(min(int(epsilon), size) + 1):
        for chosen in itertools.combinations(range(size), count):
            candidate = np.zeros(size)
            candidate[list(chosen)] = 1.0
            value = loss_fn(candidate)
            if value < best_value:
                best_value, best = value, candidate

    return best_value, best


def optimality_report(
    graph: Graph,
    params: GcnParams,
    h_hat: np.ndarray,
    map_config: MapConfig,
    budget: AttackBudget,
    seed: int,
) -> typing.Dict[str, float]:
    """
    loss₂ reached by PGD plus sampling next to the exhaustive optimum,
    for graphs small enough to enumerate
    """
    objective = StructureObjective(graph, params, h_hat, map_config.frozen_degree)
    chosen, _ = map_to_structure(graph, params, h_hat, map_config, budget, seed)
    found = objective.value(chosen)
    optimum, _ = brute_force_optimum(objective.value, objective.size, budget.epsilon_flips)

    if optimum > 0:
        ratio = found / optimum
    else:
        ratio = 1.0 if found <= 0 else math.inf

    logger.info(f"PGD loss₂ {found:.6f}, optimum {optimum:.6f}, ratio {ratio:.4f}")
    return {"found": found, "optimum": optimum, "ratio": ratio}


def planted_latent(
    graph: Graph,
    params: GcnParams,
    pair: typing.Union[int, typing.Sequence[int]],
) -> np.ndarray:
    """Layer-1 latent of `graph` with the pair or pairs `pair` flipped"""
    s = np.zeros(pair_index(graph.n).size)
    s[np.atleast_1d(pair)] = 1.0
    flipped = graph.with_adjacency(apply_perturbation(graph.adjacency, s))
    return relu(graph_operator(flipped) @ (graph.features @ params.w1))


def map_to_structure(
    graph: Graph,
    params: GcnParams,
    h_hat: np.ndarray,
    map_config: MapConfig,
    budget: AttackBudget,
    seed: int,
    workers: int = 1,
    trace: typing.Optional[typing.List[typing.Dict[str, float]]] = None,
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """PGD then rounding; returns the binary pair vector and the attacked adjacency"""
    epsilon = budget.epsilon_flips
    objective = StructureObjective(graph, params, h_hat, map_config.frozen_degree)
    s = pgd_minimize(objective, objective.size, epsilon, map_config, trace)
    chosen = round_structure(s, map_config, epsilon, objective.value, seed, workers)
    return chosen, apply_perturbation(graph.adjacency, chosen)


def ahsg_attack(
    graph: Graph,
    surrogate: GcnParams,
    perturb_config: PerturbConfig,
    map_config: MapConfig,
    budget: AttackBudget,
    seed: int,
    workers: int = 1,
) -> AttackResult:
    """
    Latent perturbation followed by structure mapping
    :returns: Attacked adjacency with both loss trajectories in the trace
    """
    if not budget.epsilon_flips:
        return AttackResult(np.array(graph.adjacency), "ahsg", 0, {"loss1": [], "loss2": []})

    loss1_trace, loss2_trace = [], []
    _, h_hat = optimize_alpha(graph, surrogate, perturb_config, loss1_trace)
    chosen, attacked = map_to_structure(
        graph,
        surrogate,
        h_hat,
        map_config,
        budget,
        seed,
        workers,
        loss2_trace,
    )
    flips = flip_count(graph.adjacency, attacked)
    logger.info(f"ahsg flipped {flips} of {budget.epsilon_flips} allowed pairs")
    return AttackResult(
        attacked,
        "ahsg",
        flips,
        {
            "loss1": loss1_trace,
            "loss2": loss2_trace,
            "final_loss2": StructureObjective(graph, surrogate, h_hat).value(chosen),
        },
    )
