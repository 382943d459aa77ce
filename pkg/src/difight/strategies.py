"""Randomised node-selection strategies and their communication profiles.

Four strategies pick the nodes that take part in a diffusion step:

* ``RP``   - one node ``v`` drawn from ``p_v``;
* ``RNP``  - one node plus its neighbourhood;
* ``RGP``  - a group of ``r`` distinct nodes drawn from ``p_C``;
* ``RGNP`` - a group of ``r`` nodes plus the union of their neighbourhoods.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .network import Network

KINDS = ("RP", "RNP", "RGP", "RGNP")
MAX_ENUMERATED_L = 20


@dataclass(frozen=True)
class SelectionStrategy:
    """A selection rule with its distribution.

    ``weights`` is ``None`` for the uniform default, a length-L node
    distribution for RP/RNP, or a distribution over the r-subsets of the
    nodes in ``itertools.combinations`` order for RGP/RGNP.
    """

    kind: str
    r: int = 1
    weights: tuple | None = None

    def __post_init__(self):
        kind = self.kind.upper().replace("_", "")
        if kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind in ("RP", "RNP"):
            object.__setattr__(self, "r", 1)
        elif self.r < 1:
            raise ValueError("group order r must be at least 1")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if min(w) <= 0 or not np.isclose(sum(w), 1.0, atol=1e-12):
                raise ValueError("selection probabilities must be positive and sum to 1")
            object.__setattr__(self, "weights", w)

    @property
    def grouped(self) -> bool:
        return self.kind in ("RGP", "RGNP")

    @property
    def with_neighbors(self) -> bool:
        return self.kind in ("RNP", "RGNP")

    @property
    def label(self) -> str:
        return f"{self.kind}_{self.r}" if self.grouped else self.kind

    def validate(self, L: int) -> None:
        if self.grouped and self.r > L:
            raise ValueError(f"group order r={self.r} exceeds the node count L={L}")
        if self.weights is None:
            return
        if self.grouped:
            if L > MAX_ENUMERATED_L:
                raise ValueError(f"non-uniform group weights need L <= {MAX_ENUMERATED_L}")
            expected = comb(L, self.r)
        else:
            expected = L
        if len(self.weights) != expected:
            raise ValueError(f"expected {expected} selection weights, got {len(self.weights)}")

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "r": self.r}
        doc["distribution"] = "uniform" if self.weights is None else list(self.weights)
        return doc

    @classmethod
    def from_dict(cls, doc) -> "SelectionStrategy":
        dist = doc.get("distribution", "uniform")
        weights = None if dist in (None, "uniform") else tuple(dist)
        return cls(doc["kind"], int(doc.get("r", 1)), weights)


def _closed(network: Network) -> np.ndarray:
    return network.adjacency.astype(bool) | np.eye(network.L, dtype=bool)


def _partial_shuffle(rng, L, r, size):
    # vectorised partial Fisher-Yates: first r slots of each row are the group
    perm = np.tile(np.arange(L), (size, 1))
    rows = np.arange(size)
    for i in range(r):
        j = rng.integers(i, L, size=size)
        perm[rows, i], perm[rows, j] = perm[rows, j], perm[rows, i].copy()
    return perm[:, :r]


def sample_groups(strategy: SelectionStrategy, network: Network, rng, size: int) -> np.ndarray:
    """Draw ``size`` participation sets as a ``(size, L)`` boolean mask."""
    L = network.L
    strategy.validate(L)
    chosen = np.zeros((size, L), dtype=bool)
    rows = np.arange(size)
    if not strategy.grouped:
        if strategy.weights is None:
            v = rng.integers(0, L, size=size)
        else:
            v = rng.choice(L, size=size, p=strategy.weights)
        chosen[rows, v] = True
    elif strategy.weights is None:
        members = _partial_shuffle(rng, L, strategy.r, size)
        chosen[rows[:, None], members] = True
    else:
        groups = np.array(list(itertools.combinations(range(L), strategy.r)))
        pick = rng.choice(len(groups), size=size, p=strategy.weights)
        chosen[rows[:, None], groups[pick]] = True
    if strategy.with_neighbors:
        chosen = (chosen.astype(np.int32) @ _closed(network).astype(np.int32)) > 0
    return chosen


def sample_group(strategy: SelectionStrategy, network: Network, rng) -> tuple[int, ...]:
    """One participation set ``G`` as sorted node indices."""
    return tuple(int(v) for v in np.flatnonzero(sample_groups(strategy, network, rng, 1)[0]))


def participation_probabilities(strategy: SelectionStrategy, network: Network) -> np.ndarray:
    """Probability ``pi_v`` that each node takes part in a given step."""
    L = network.L
    strategy.validate(L)
    d = network.degrees
    r = strategy.r
    if strategy.weights is None:
        if strategy.kind == "RP":
            return np.full(L, 1.0 / L)
        if strategy.kind == "RNP":
            return (1.0 + d) / L
        if strategy.kind == "RGP":
            return np.full(L, comb(L - 1, r - 1) / comb(L, r))
        pi = np.ones(L)
        for v in range(L):
            outside = L - (d[v] + 1)
            if outside >= r:
                pi[v] = 1.0 - comb(outside, r) / comb(L, r)
        return pi
    w = np.asarray(strategy.weights)
    if strategy.kind == "RP":
        return w.copy()
    if strategy.kind == "RNP":
        return _closed(network).astype(float) @ w
    closed = _closed(network)
    pi = np.zeros(L)
    for pC, group in zip(w, itertools.combinations(range(L), r)):
        members = np.zeros(L, dtype=bool)
        members[list(group)] = True
        if strategy.kind == "RGNP":
            members = closed[list(group)].any(axis=0)
        pi += pC * members
    return pi


def participation_probability(strategy, network, v: int) -> float:
    return float(participation_probabilities(strategy, network)[v])


def message_length(algo: str, K: int, N: int) -> int:
    """Scalars per neighbour message: support + values (+ gradient for DiFIGHT)."""
    from .engine import Algorithm

    algo = Algorithm.parse(algo)
    if algo is Algorithm.DIFIGHT:
        return 2 * K + N
    if algo in (Algorithm.MODIFIGHT, Algorithm.CONSENSUS):
        return 2 * K
    return 0


@dataclass(frozen=True)
class ParticipationProfile:
    """Per-node participation and expected values moved per step.

    ``transmit``/``receive`` are absolute counts (already multiplied by
    ``L_algo``). ``transmit_alternative`` is an alternative RNP transmit
    formula ``sum_{u in N_v} pi_u + sum_{u in N_v, w in N_u} p_w``; it is
    not what a direct count produces and is informational only.
    """

    pi: np.ndarray
    transmit: np.ndarray
    receive: np.ndarray
    L_algo: int
    transmit_alternative: np.ndarray | None = None

    def to_dict(self) -> dict:
        doc = {
            "L_algo": self.L_algo,
            "pi": self.pi.tolist(),
            "transmit": self.transmit.tolist(),
            "receive": self.receive.tolist(),
        }
        if self.transmit_alternative is not None:
            doc["transmit_table_alternative"] = self.transmit_alternative.tolist()
        return doc


def expected_comms(strategy: SelectionStrategy | None, network: Network, algo: str,
                   K: int, N: int) -> ParticipationProfile:
    """Long-run values transmitted/received per step by every node.

    ``strategy=None`` is the deterministic case where all nodes take part.
    """
    L_algo = message_length(algo, K, N)
    d = network.degrees.astype(float)
    if strategy is None:
        pi = np.ones(network.L)
    else:
        pi = participation_probabilities(strategy, network)
    adj = network.adjacency.astype(float)
    alt = None
    if strategy is not None and strategy.kind == "RNP":
        p = np.full(network.L, 1.0 / network.L) if strategy.weights is None \
            else np.asarray(strategy.weights)
        alt = (adj @ pi + adj @ (adj @ p)) * L_algo
    return ParticipationProfile(
        pi=pi,
        transmit=(adj @ pi) * L_algo,
        receive=pi * d * L_algo,
        L_algo=L_algo,
        transmit_alternative=alt,
    )
