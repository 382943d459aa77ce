"""Connected Erdos-Renyi networks and their left-stochastic combination matrix."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_RETRY_BUDGET = 10_000


class NetworkGenerationError(RuntimeError):
    pass


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_er_graph(L: int, p: float, seed=None) -> np.ndarray:
    """Sample a symmetric 0/1 adjacency matrix, each pair linked with prob. ``p``."""
    if L < 2:
        raise ValueError(f"need at least 2 nodes, got L={L}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    rng = _as_rng(seed)
    iu = np.triu_indices(L, k=1)
    draws = rng.random(iu[0].size) < p
    adj = np.zeros((L, L), dtype=np.int8)
    adj[iu] = draws
    return adj + adj.T


def is_connected(adjacency) -> bool:
    """Depth-first search from node 0; True iff every node is reached."""
    adj = np.asarray(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("adjacency must be a square matrix")
    L = adj.shape[0]
    if L == 0:
        return False
    seen = np.zeros(L, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for u in np.flatnonzero(adj[v]):
            if not seen[u]:
                seen[u] = True
                stack.append(u)
    return bool(seen.all())


def build_combination_matrix(adjacency, self_loops: bool = True) -> np.ndarray:
    """Column-normalise ``adjacency`` (plus identity) into a left-stochastic A.

    With ``self_loops`` every node weights its closed neighbourhood equally,
    ``a_ji = 1 / (d_i + 1)``.
    """
    adj = np.asarray(adjacency, dtype=float)
    W = adj + np.eye(adj.shape[0]) if self_loops else adj.copy()
    col = W.sum(axis=0)
    if np.any(col == 0):
        raise RuntimeError("combination matrix has an empty column")
    return W / col


@dataclass(frozen=True)
class Network:
    adjacency: np.ndarray
    combination: np.ndarray
    retries: int = 0
    self_loops: bool = True
    neighborhoods: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int8)
        A = np.asarray(self.combination, dtype=float)
        if adj.shape != A.shape or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency and combination must be square and equal-sized")
        if np.any(adj != adj.T) or np.any(np.diag(adj)):
            raise ValueError("adjacency must be symmetric with a zero diagonal")
        for arr in (adj, A):
            arr.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "combination", A)
        object.__setattr__(
            self, "neighborhoods", tuple(tuple(np.flatnonzero(row)) for row in adj)
        )

    @property
    def L(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=0).astype(int)

    @property
    def edges(self) -> list[list[int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return [[int(a), int(b)] for a, b in zip(i, j)]

    @classmethod
    def from_adjacency(cls, adjacency, self_loops=True, retries=0) -> "Network":
        return cls(
            adjacency=np.asarray(adjacency, dtype=np.int8),
            combination=build_combination_matrix(adjacency, self_loops),
            retries=retries,
            self_loops=self_loops,
        )

    @classmethod
    def from_edges(cls, L, edges, self_loops=True) -> "Network":
        adj = np.zeros((L, L), dtype=np.int8)
        for i, j in edges:
            adj[i, j] = adj[j, i] = 1
        return cls.from_adjacency(adj, self_loops)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "edges": self.edges,
            "combination": self.combination.ravel().tolist(),
            "self_loops": self.self_loops,
            "retries": self.retries,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        L = int(doc["L"])
        adj = np.zeros((L, L), dtype=np.int8)
        for i, j in doc["edges"]:
            adj[i, j] = adj[j, i] = 1
        if "combination" in doc:
            A = np.asarray(doc["combination"], dtype=float).reshape(L, L)
        else:
            A = build_combination_matrix(adj, doc.get("self_loops", True))
        return cls(adj, A, retries=int(doc.get("retries", 0)),
                   self_loops=bool(doc.get("self_loops", True)))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Network":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_connected_network(
    L: int,
    p: float | None = None,
    seed=None,
    self_loops: bool = True,
    max_retries: int = DEFAULT_RETRY_BUDGET,
) -> Network:
    """Resample ER graphs until one is connected, then normalise it.

    ``p`` defaults to ``ln(L) / L``. ``retries`` on the result counts the
    rejected draws.
    """
    if p is None:
        p = np.log(L) / L
    rng = _as_rng(seed)
    for attempt in range(max_retries):
        adj = generate_er_graph(L, p, rng)
        if is_connected(adj):
            logger.info("connected ER graph L=%d p=%.4f after %d retries", L, p, attempt)
            return Network.from_adjacency(adj, self_loops=self_loops, retries=attempt)
    raise NetworkGenerationError(
        f"no connected graph with L={L}, p={p} after {max_retries} draws"
    )
