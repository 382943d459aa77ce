"""Synchronous execution of the diffusion IHT family and its baselines."""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .cost import DEFAULT_CURVATURE_SAMPLES, default_step_size, stack_costs
from .network import Network
from .rng import child_seeds
from .signals import hard_threshold_array
from .strategies import SelectionStrategy, message_length, sample_groups

EARLY_STOP_TOL = 1e-12
GROUP_BATCH = 4096


class DivergenceError(FloatingPointError):
    def __init__(self, iteration):
        super().__init__(f"non-finite estimate at iteration {iteration}")
        self.iteration = iteration


class Algorithm(str, enum.Enum):
    DIFIGHT = "DiFIGHT"
    MODIFIGHT = "MoDiFIGHT"
    CONSENSUS = "ConsensusIHT"
    NONCOOPERATIVE = "NonCooperativeIHT"
    CENTRALIZED = "CentralizedIHT"

    @classmethod
    def parse(cls, name) -> "Algorithm":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("_", "").replace("-", "")
        for algo in cls:
            if key in (algo.value.lower(), algo.value.lower().removesuffix("iht")):
                return algo
        if key in ("noncoop", "local"):
            return cls.NONCOOPERATIVE
        raise ValueError(f"unknown algorithm {name!r}")

    @property
    def diffusion(self) -> bool:
        return self in (Algorithm.DIFIGHT, Algorithm.MODIFIGHT)


@dataclass
class CommCounters:
    """Cumulative values sent/received and gradient evaluations per node."""

    transmit: np.ndarray
    receive: np.ndarray
    gradient_evals: np.ndarray

    @classmethod
    def zeros(cls, L):
        return cls(np.zeros(L, dtype=np.int64), np.zeros(L, dtype=np.int64),
                   np.zeros(L, dtype=np.int64))


def _check_state(costs, X, mu):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(costs):
        raise ValueError(f"expected {len(costs)} estimates, got array of shape {X.shape}")
    for c in costs:
        if c.N != X.shape[1]:
            raise ValueError(f"cost of node {c.node} has N={c.N}, estimates have N={X.shape[1]}")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (len(costs),))
    return X, mu


def _local_steps(costs, X, mu, nodes, counters):
    """``psi_v = x_v - mu_v grad f_v(x_v)`` for the listed nodes, zero elsewhere."""
    psi = np.zeros_like(X)
    for v in nodes:
        psi[v] = X[v] - mu[v] * costs[v].gradient(X[v])
    if counters is not None:
        counters.gradient_evals[list(nodes)] += 1
    return psi


def _count(network, times_in_G, L_algo, counters):
    # a participant receives from all its neighbours; each neighbour transmits once
    if counters is None or L_algo == 0:
        return
    times_in_G = np.asarray(times_in_G, dtype=np.int64)
    counters.receive += times_in_G * network.degrees * L_algo
    counters.transmit += (network.adjacency.astype(np.int64) @ times_in_G) * L_algo


def step_randomized(network: Network, costs, X, mu, K: int, G, algo="DiFIGHT",
                    counters: CommCounters | None = None) -> np.ndarray:
    """One step in which only the nodes of ``G`` refresh their estimate.

    Nodes in ``G`` or adjacent to it form their local intermediate; members
    of ``G`` combine the intermediates of their closed neighbourhood and
    hard-threshold; everyone else keeps the previous estimate.
    """
    X, mu = _check_state(costs, X, mu)
    algo = Algorithm.parse(algo)
    L = network.L
    if L != len(costs):
        raise ValueError("network size does not match the number of costs")
    in_G = np.zeros(L, dtype=bool)
    in_G[list(G)] = True
    A = network.combination
    X_new = X.copy()
    if not in_G.any():
        return X_new
    if algo is Algorithm.CONSENSUS:
        phi = A.T @ X
        for v in np.flatnonzero(in_G):
            X_new[v] = hard_threshold_array(phi[v] - mu[v] * costs[v].gradient(phi[v]), K)
        if counters is not None:
            counters.gradient_evals[in_G] += 1
    elif algo.diffusion:
        active = in_G | (network.adjacency.astype(bool) & in_G[None, :]).any(axis=1)
        psi = _local_steps(costs, X, mu, np.flatnonzero(active), counters)
        if algo is Algorithm.MODIFIGHT:
            psi = hard_threshold_array(psi, K)
        combined = A.T @ psi
        X_new[in_G] = hard_threshold_array(combined[in_G], K)
    else:
        raise ValueError(f"{algo.value} has no combination step")
    _count(network, in_G, message_length(algo, K, X.shape[1]), counters)
    return X_new


def step_difight(network, costs, X, mu, K, counters=None) -> np.ndarray:
    """Adapt-then-combine step: ``x_i <- H_K(sum_j a_ji (x_j - mu_j grad f_j(x_j)))``."""
    return step_randomized(network, costs, X, mu, K, range(network.L), "DiFIGHT", counters)


def step_modifight(network, costs, X, mu, K, counters=None) -> np.ndarray:
    """As :func:`step_difight` but each node thresholds its intermediate first."""
    return step_randomized(network, costs, X, mu, K, range(network.L), "MoDiFIGHT", counters)


def step_consensus_iht(network, costs, X, mu, K, counters=None) -> np.ndarray:
    """Average neighbours' estimates, then take a local IHT step from the average."""
    return step_randomized(network, costs, X, mu, K, range(network.L), "ConsensusIHT",
                           counters)


def step_local_iht(costs, X, mu, K, counters=None) -> np.ndarray:
    """Independent IHT step at every node (no exchange)."""
    X, mu = _check_state(costs, X, mu)
    psi = _local_steps(costs, X, mu, range(len(costs)), counters)
    return hard_threshold_array(psi, K)


@dataclass
class AlgorithmSpec:
    kind: Algorithm
    K: int
    mu: np.ndarray | float | None = None
    n_it: int = 500
    strategy: SelectionStrategy | None = None
    early_stop_tol: float | None = EARLY_STOP_TOL
    record_every: int = 0
    log_groups: bool = True

    def __post_init__(self):
        self.kind = Algorithm.parse(self.kind)
        if self.n_it < 0:
            raise ValueError("n_it must be nonnegative")
        if self.mu is not None and np.any(np.asarray(self.mu) <= 0):
            raise ValueError("step sizes must be positive")


@dataclass
class RunTrace:
    """Per-iteration record of a run.

    ``h[n]`` is the vector of per-node errors ``|x_i^n - x*|``; ``msd[n]`` is
    ``mean_i |x_i^n - x*|^2 / |x*|^2``. ``transmit_total[n]`` and
    ``receive_total[n]`` are network-wide cumulative counts after ``n`` steps.
    """

    algorithm: str
    strategy: str | None
    h: np.ndarray
    msd: np.ndarray
    transmit_total: np.ndarray
    receive_total: np.ndarray
    counters: CommCounters
    estimates: np.ndarray
    mu: np.ndarray
    stop_reason: str
    seed: object = None
    groups: list = field(default_factory=list)
    history: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.h) - 1

    def iterations_to(self, threshold: float) -> float:
        """First ``n`` with relative MSD below ``threshold`` (``inf`` if never)."""
        hit = np.flatnonzero(self.msd < threshold)
        return float(hit[0]) if hit.size else float("inf")

    def csv_rows(self):
        L = self.h.shape[1]
        yield ["n", *[f"h_{i}" for i in range(L)], "msd", "T_total", "R_total"]
        for n in range(len(self.h)):
            yield [n, *map(repr, self.h[n].tolist()), repr(float(self.msd[n])),
                   int(self.transmit_total[n]), int(self.receive_total[n])]

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        csv.writer(buf, lineterminator="\n").writerows(self.csv_rows())
        return buf.getvalue() if fh is None else None

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "strategy": self.strategy,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "final_msd": float(self.msd[-1]),
            "final_h": self.h[-1].tolist(),
            "transmit": self.counters.transmit.tolist(),
            "receive": self.counters.receive.tolist(),
            "gradient_evals": self.counters.gradient_evals.tolist(),
            "mu": self.mu.tolist(),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=1)


def default_step_sizes(costs, K, seed=None, samples=DEFAULT_CURVATURE_SAMPLES) -> np.ndarray:
    seeds = child_seeds(seed, len(costs))
    return np.array([default_step_size(c, K, s, samples) for c, s in zip(costs, seeds)])


def run(spec: AlgorithmSpec, network: Network, costs, x_star, seed=None,
        x0=None) -> RunTrace:
    """Iterate the chosen algorithm from ``x0`` (zeros by default).

    Deterministic runs stop early once no estimate moves by more than
    ``spec.early_stop_tol``; randomised runs always take ``n_it`` steps.
    ``seed`` drives both default step-size estimation and group sampling;
    participation sets are drawn in batches of ``GROUP_BATCH`` steps.
    """
    x_star = np.asarray(x_star, dtype=float)
    costs = list(costs)
    algo = spec.kind
    if algo is Algorithm.CENTRALIZED:
        costs = [stack_costs(costs)]
    L = len(costs)
    if algo not in (Algorithm.CENTRALIZED, Algorithm.NONCOOPERATIVE) and network.L != L:
        raise ValueError("network size does not match the number of costs")
    mu_seed, group_seed = child_seeds(seed, 2)
    if spec.mu is None:
        mu = default_step_sizes(costs, spec.K, mu_seed)
    else:
        mu = np.broadcast_to(np.asarray(spec.mu, dtype=float), (L,)).copy()
    rng = np.random.default_rng(group_seed)
    strategy = spec.strategy if algo not in (Algorithm.CENTRALIZED,
                                             Algorithm.NONCOOPERATIVE) else None

    X = np.zeros((L, x_star.size)) if x0 is None else np.array(x0, dtype=float)
    X, mu = _check_state(costs, X, mu)
    mu = np.array(mu)
    counters = CommCounters.zeros(L)
    ref = float(x_star @ x_star)
    if ref == 0:
        raise ValueError("target signal must be nonzero")

    hs = [np.linalg.norm(X - x_star, axis=1)]
    T_tot, R_tot = [0], [0]
    groups = []
    history = {0: X.copy()} if spec.record_every else {}
    stop = "max_iterations"
    for n in range(spec.n_it):
        if algo is Algorithm.NONCOOPERATIVE or algo is Algorithm.CENTRALIZED:
            X_new = step_local_iht(costs, X, mu, spec.K, counters)
        elif strategy is None:
            X_new = step_randomized(network, costs, X, mu, spec.K, range(L), algo, counters)
        else:
            if n % GROUP_BATCH == 0:
                drawn = sample_groups(strategy, network, rng, min(GROUP_BATCH, spec.n_it - n))
            G = tuple(np.flatnonzero(drawn[n % GROUP_BATCH]).tolist())
            if spec.log_groups:
                groups.append(G)
            X_new = step_randomized(network, costs, X, mu, spec.K, G, algo, counters)
        if not np.all(np.isfinite(X_new)):
            raise DivergenceError(n + 1)
        if np.any(np.count_nonzero(X_new, axis=1) > spec.K):
            raise AssertionError(f"estimate exceeds sparsity {spec.K} at iteration {n + 1}")
        moved = np.max(np.linalg.norm(X_new - X, axis=1))
        X = X_new
        hs.append(np.linalg.norm(X - x_star, axis=1))
        T_tot.append(int(counters.transmit.sum()))
        R_tot.append(int(counters.receive.sum()))
        if spec.record_every and (n + 1) % spec.record_every == 0:
            history[n + 1] = X.copy()
        if strategy is None and spec.early_stop_tol is not None and moved <= spec.early_stop_tol:
            stop = "converged"
            break

    h = np.array(hs)
    return RunTrace(
        algorithm=algo.value,
        strategy=None if strategy is None else strategy.label,
        h=h,
        msd=(h ** 2).mean(axis=1) / ref,
        transmit_total=np.array(T_tot),
        receive_total=np.array(R_tot),
        counters=counters,
        estimates=X,
        mu=mu,
        stop_reason=stop,
        seed=seed if isinstance(seed, (int, type(None))) else str(seed),
        groups=groups,
        history=history,
    )


def simulate_communication(strategy: SelectionStrategy | None, network: Network, algo,
                           K: int, N: int, steps: int, seed=None) -> CommCounters:
    """Message counters of ``steps`` randomised steps without the estimates.

    Counts do not depend on the iterates, so this draws the participation
    sets from the same stream :func:`run` uses for ``seed`` and applies the
    same counting rule; the result equals the counters of the full run.
    """
    L_algo = message_length(algo, K, N)
    counters = CommCounters.zeros(network.L)
    if strategy is None:
        _count(network, np.full(network.L, steps), L_algo, counters)
        return counters
    rng = np.random.default_rng(child_seeds(seed, 2)[1])
    for start in range(0, steps, GROUP_BATCH):
        drawn = sample_groups(strategy, network, rng, min(GROUP_BATCH, steps - start))
        _count(network, drawn.sum(axis=0), L_algo, counters)
    return counters
