"""Graph data model, dataset directories and edge-flip algebra"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import dataclasses
import functools
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import utils
from ._types import BudgetError, DimensionError, GraphFormatError

logger = logging.getLogger(__name__)

UNKNOWN = -1

EDGES_FILE = "graph.edges"
FEATURES_FILE = "features.txt"
LABELS_FILE = "labels.txt"
SPLITS_FILE = "splits.txt"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class Graph:
    """
    Undirected graph with node features, partial labels and a train/test split.
    `weighted` graphs come out of low-rank preprocessing only: their adjacency
    is real and nonnegative instead of binary.
    """

    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    c: int
    train_mask: np.ndarray
    test_mask: np.ndarray
    weighted: bool = False

    def __post_init__(self):
        adjacency, n = self.adjacency, self.adjacency.shape[0]

        if adjacency.ndim != 2 or adjacency.shape != (n, n):
            raise DimensionError(f"Adjacency must be square, got {adjacency.shape}")

        if self.features.shape[0] != n:
            raise DimensionError(
                f"Features have {self.features.shape[0]} rows for {n} nodes"
            )

        for name in ("labels", "train_mask", "test_mask"):
            if getattr(self, name).shape != (n,):
                raise DimensionError(f"{name} must have length {n}")

        if not np.array_equal(adjacency, adjacency.T):
            raise GraphFormatError("Adjacency is not symmetric")

        if np.any(np.diag(adjacency) != 0):
            raise GraphFormatError("Adjacency has self-loops")

        if self.weighted:
            if np.any(adjacency < 0) or not np.all(np.isfinite(adjacency)):
                raise GraphFormatError("Weighted adjacency must be finite and nonnegative")
        elif not np.all((adjacency == 0) | (adjacency == 1)):
            raise GraphFormatError("Adjacency must be binary")

        if np.any(self.train_mask & self.test_mask):
            raise GraphFormatError("Train and test masks overlap")

        if np.any(self.labels[self.train_mask] == UNKNOWN):
            raise GraphFormatError("Every train node needs a known label")

        if np.any(self.labels >= self.c) or np.any(self.labels < UNKNOWN):
            raise GraphFormatError(f"Labels must be in 0..{self.c - 1} or unknown")

        for name in ("adjacency", "features", "labels", "train_mask", "test_mask"):
            getattr(self, name).setflags(write=False)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of unordered edges"""
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    def with_adjacency(self, adjacency: np.ndarray, weighted: bool = False) -> "Graph":
        return dataclasses.replace(
            self,
            adjacency=np.array(adjacency, dtype=np.float64),
            weighted=weighted,
        )


@dataclass(frozen=True)
class AttackBudget:
    epsilon_flips: int
    source_ratio: Optional[float] = None

    def __post_init__(self):
        if self.epsilon_flips < 0:
            raise BudgetError(f"Budget must be nonnegative, got {self.epsilon_flips}")


class PairIndex:
    """Bijection between unordered pairs i<j and flat indices 0..n(n-1)/2-1"""

    def __init__(self, n: int):
        self.n = n
        self.size = n * (n - 1) // 2
        self.rows, self.cols = np.triu_indices(n, k=1)

    def pack(self, i: int, j: int) -> int:
        if i == j:
            raise ValueError("Self pairs have no index")

        i, j = min(i, j), max(i, j)
        return i * self.n - i * (i + 1) // 2 + (j - i - 1)

    def unpack(self, k: int) -> Tuple[int, int]:
        return int(self.rows[k]), int(self.cols[k])

    def gather(self, matrix: np.ndarray) -> np.ndarray:
        """Upper-triangle entries of `matrix` in pair order"""
        return matrix[self.rows, self.cols]

    def scatter(self, values: np.ndarray) -> np.ndarray:
        """Symmetric n×n matrix with `values` on both triangles"""
        out = np.zeros((self.n, self.n), dtype=np.result_type(values, np.float64))
        out[self.rows, self.cols] = values
        out[self.cols, self.rows] = values
        return out


@functools.lru_cache(maxsize=8)
def pair_index(n: int) -> PairIndex:
    return PairIndex(n)


def _read_lines(path: str) -> List[Tuple[int, List[str]]]:
    if not os.path.isfile(path):
        raise GraphFormatError("Missing file", path)

    with open(path, "r", encoding="utf-8") as f:
        return [
            (number, line.split())
            for number, line in enumerate(f, start=1)
            if line.strip()
        ]


def _int(token: str, path: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"Expected an integer, got {token!r}", path, line)


def _resolve(directory: str, name: str) -> str:
    """File inside `directory`, or inside the manifest's source dataset"""
    path = os.path.join(directory, name)
    if os.path.isfile(path) or name == EDGES_FILE:
        return path

    manifest = os.path.join(directory, MANIFEST_FILE)
    if os.path.isfile(manifest):
        with open(manifest, "r", encoding="utf-8") as f:
            source = json.load(f).get("source")

        if source:
            return os.path.join(source, name)

    return path


def _load_features(path: str) -> np.ndarray:
    lines = _read_lines(path)
    if not lines:
        raise GraphFormatError("Empty features file", path)

    number, header = lines[0]
    if len(header) != 2:
        raise GraphFormatError("Header must be 'n d'", path, number)

    n, d = (_int(token, path, number) for token in header)
    rows = lines[1:]
    if len(rows) != n:
        raise GraphFormatError(f"Expected {n} feature rows, got {len(rows)}", path)

    features = np.empty((n, d), dtype=np.float64)
    for i, (number, tokens) in enumerate(rows):
        if len(tokens) != d:
            raise GraphFormatError(f"Expected {d} values, got {len(tokens)}", path, number)

        try:
            features[i] = [float(token) for token in tokens]
        except ValueError:
            raise GraphFormatError("Malformed real", path, number)

    return features


def _load_edges(path: str, n: int) -> np.ndarray:
    adjacency = np.zeros((n, n), dtype=np.float64)
    for number, tokens in _read_lines(path):
        if len(tokens) != 2:
            raise GraphFormatError("Edge line must be 'u v'", path, number)

        u, v = (_int(token, path, number) for token in tokens)
        if u == v:
            raise GraphFormatError(f"Self-loop on node {u}", path, number)

        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"Node id out of range 0..{n - 1}", path, number)

        if adjacency[u, v]:
            raise GraphFormatError(f"Duplicate edge {u} {v}", path, number)

        adjacency[u, v] = adjacency[v, u] = 1.0

    return adjacency


def _load_labels(path: str, n: int) -> Tuple[np.ndarray, int]:
    lines = _read_lines(path)
    if not lines:
        raise GraphFormatError("Empty labels file", path)

    number, header = lines[0]
    if len(header) != 1:
        raise GraphFormatError("Header must be the class count", path, number)

    c = _int(header[0], path, number)
    labels = np.full(n, UNKNOWN, dtype=np.int64)
    for number, tokens in lines[1:]:
        if len(tokens) != 2:
            raise GraphFormatError("Label line must be 'node label'", path, number)

        node, label = (_int(token, path, number) for token in tokens)
        if not 0 <= node < n:
            raise GraphFormatError(f"Node id out of range 0..{n - 1}", path, number)

        if not 0 <= label < c:
            raise GraphFormatError(f"Label {label} out of range 0..{c - 1}", path, number)

        labels[node] = label

    return labels, c


def _load_splits(path: str, n: int) -> Tuple[np.ndarray, np.ndarray]:
    train, test = np.zeros(n, dtype=bool), np.zeros(n, dtype=bool)
    for number, tokens in _read_lines(path):
        if len(tokens) != 2 or tokens[1] not in {"train", "test"}:
            raise GraphFormatError("Split line must be 'node train|test'", path, number)

        node = _int(tokens[0], path, number)
        if not 0 <= node < n:
            raise GraphFormatError(f"Node id out of range 0..{n - 1}", path, number)

        target, other = (train, test) if tokens[1] == "train" else (test, train)
        if other[node]:
            raise GraphFormatError(f"Node {node} is both train and test", path, number)

        target[node] = True

    return train, test


def load_graph(directory_path: str) -> Graph:
    """
    Read a dataset directory (graph.edges, features.txt, labels.txt, splits.txt)
    :raises GraphFormatError: Missing file or malformed line, with line number
    """
    features = _load_features(_resolve(directory_path, FEATURES_FILE))
    n = features.shape[0]
    adjacency = _load_edges(_resolve(directory_path, EDGES_FILE), n)
    labels, c = _load_labels(_resolve(directory_path, LABELS_FILE), n)
    train, test = _load_splits(_resolve(directory_path, SPLITS_FILE), n)

    graph = Graph(adjacency, features, labels, c, train, test)
    logger.info(
        f"Loaded {directory_path}: n={graph.n}, |E|={graph.num_edges},"
        f" d={graph.d}, c={graph.c}"
    )
    return graph


def edge_lines(adjacency: np.ndarray) -> str:
    rows, cols = np.nonzero(np.triu(adjacency, 1))
    return "".join(f"{u} {v}\n" for u, v in zip(rows.tolist(), cols.tolist()))


def save_graph(
    graph: Graph,
    directory_path: str,
    manifest: Optional[Dict] = None,
    edges_only: bool = False,
):
    """
    Write `graph` as a dataset directory.
    With `edges_only`, features/labels/splits are expected to come from
    `manifest["source"]` on reload.
    """
    if graph.weighted:
        raise GraphFormatError("Weighted graphs have no edge-list form")

    utils.atomic_write(os.path.join(directory_path, EDGES_FILE), edge_lines(graph.adjacency))

    if not edges_only:
        utils.atomic_write(
            os.path.join(directory_path, FEATURES_FILE),
            f"{graph.n} {graph.d}\n"
            + "".join(
                " ".join(repr(float(x)) for x in row) + "\n"
                for row in graph.features.tolist()
            ),
        )
        utils.atomic_write(
            os.path.join(directory_path, LABELS_FILE),
            f"{graph.c}\n"
            + "".join(
                f"{node} {label}\n"
                for node, label in enumerate(graph.labels.tolist())
                if label != UNKNOWN
            ),
        )
        utils.atomic_write(
            os.path.join(directory_path, SPLITS_FILE),
            "".join(
                f"{node} {'train' if graph.train_mask[node] else 'test'}\n"
                for node in range(graph.n)
                if graph.train_mask[node] or graph.test_mask[node]
            ),
        )

    if manifest is not None:
        if edges_only and not manifest.get("source"):
            raise GraphFormatError("Edge-only output needs a source dataset in the manifest")

        utils.atomic_write(
            os.path.join(directory_path, MANIFEST_FILE),
            utils.stable_json(manifest),
        )


def normalized_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """D̃^{-1/2}(A+I)D̃^{-1/2}; isolated nodes keep degree 1 from the self-loop"""
    a_tilde = adjacency + np.eye(adjacency.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    out = inv_sqrt[:, None] * a_tilde * inv_sqrt[None, :]
    # Row and column scaling round differently, force exact symmetry
    return (out + out.T) / 2


def complement_delta(adjacency: np.ndarray) -> np.ndarray:
    """C = 11ᵀ − I − 2A: +1 where a flip adds an edge, −1 where it removes one"""
    n = adjacency.shape[0]
    return np.ones((n, n)) - np.eye(n) - 2 * adjacency


def relaxed_adjacency(
    adjacency: np.ndarray,
    delta: np.ndarray,
    s: np.ndarray,
    pairs: Optional[PairIndex] = None,
) -> np.ndarray:
    """Â(s) = A + C ⊙ S(s) for continuous s"""
    pairs = pairs or pair_index(adjacency.shape[0])
    return adjacency + delta * pairs.scatter(s)


def apply_perturbation(adjacency: np.ndarray, s_binary: np.ndarray) -> np.ndarray:
    """Flip exactly the pairs where `s_binary` is 1"""
    pairs = pair_index(adjacency.shape[0])
    if s_binary.shape != (pairs.size,):
        raise DimensionError(
            f"Perturbation vector must have {pairs.size} entries, got {s_binary.shape}"
        )

    out = np.array(adjacency, dtype=np.float64)
    chosen = np.flatnonzero(s_binary)
    rows, cols = pairs.rows[chosen], pairs.cols[chosen]
    out[rows, cols] = 1.0 - out[rows, cols]
    out[cols, rows] = out[rows, cols]
    return out


def budget_from_ratio(graph: Graph, ratio: float) -> AttackBudget:
    if not 0 <= ratio <= 1:
        raise BudgetError(f"Budget ratio must be in [0, 1], got {ratio}")

    # A tiny nudge keeps products like 0.1 * 5270 = 526.9999... from losing a flip
    return AttackBudget(
        epsilon_flips=int(math.floor(ratio * graph.num_edges + 1e-9)),
        source_ratio=ratio,
    )


def flip_count(adjacency: np.ndarray, attacked: np.ndarray) -> int:
    if adjacency.shape != attacked.shape:
        raise DimensionError(f"Shapes differ: {adjacency.shape} vs {attacked.shape}")

    return int(np.count_nonzero(np.triu(adjacency != attacked, 1)))


def attacker_labels(graph: Graph) -> np.ndarray:
    """Labels the attacker may use: train labels, everything else unknown"""
    return np.where(graph.train_mask, graph.labels, UNKNOWN)
