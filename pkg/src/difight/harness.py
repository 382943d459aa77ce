"""Monte Carlo driver for recovery-probability and MSD experiments."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cost import LeastSquaresCost, default_step_size, stack_costs
from .engine import Algorithm, AlgorithmSpec, DivergenceError, default_step_sizes, run
from .network import Network, generate_connected_network
from .strategies import SelectionStrategy

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["algo", "strategy", "M_per_node", "M_total", "p_success", "mean_iters",
                 "mean_T_total", "mean_R_total", "mean_msd", "median_msd", "instances",
                 "diverged"]

# spawn-key namespaces for the per-experiment random streams
_NET, _SIGNAL, _MEAS, _STEP, _RUN = range(5)


@dataclass
class ExperimentConfig:
    N: int = 200
    K: int = 10
    L: int = 10
    M: int | list = 30
    noise: float = 0.0
    algorithms: list = field(default_factory=lambda: ["DiFIGHT", "MoDiFIGHT",
                                                       "ConsensusIHT", "NonCooperativeIHT",
                                                       "CentralizedIHT"])
    strategy: dict | None = None
    instances: int = 100
    n_it: int | None = None
    seed: int = 0
    success_threshold: float = 1e-4
    p: float | None = None
    self_loops: bool = True
    curvature_samples: int = 500
    workers: int = 1

    def __post_init__(self):
        if not 1 <= self.K <= self.N:
            raise ValueError("need 1 <= K <= N")
        if min(self.M_list) < 1:
            raise ValueError("M must be at least 1")
        if self.instances < 1:
            raise ValueError("instances must be at least 1")
        self.algorithms = [Algorithm.parse(a).value for a in self.algorithms]

    @property
    def M_list(self) -> list:
        return list(self.M) if isinstance(self.M, (list, tuple)) else [self.M]

    @property
    def selection(self) -> SelectionStrategy | None:
        return None if self.strategy is None else SelectionStrategy.from_dict(self.strategy)

    @property
    def iterations(self) -> int:
        if self.n_it is not None:
            return self.n_it
        return 500 if self.strategy is None else 2000

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _stream(config, *key):
    return np.random.SeedSequence(config.seed, spawn_key=key)


def experiment_network(config: ExperimentConfig) -> Network:
    """The single network shared by every instance of an experiment."""
    return generate_connected_network(config.L, config.p, _stream(config, _NET),
                                      self_loops=config.self_loops)


@dataclass
class Instance:
    x_star: np.ndarray
    costs: list
    index: int
    M: int

    def to_dict(self, K=None) -> dict:
        return {"index": self.index, "M": self.M, "K": K, "x_star": self.x_star.tolist(),
                "measurements": [c.to_dict() for c in self.costs]}

    @classmethod
    def from_dict(cls, doc) -> "Instance":
        costs = [LeastSquaresCost.from_dict(m) for m in doc["measurements"]]
        return cls(np.asarray(doc["x_star"], dtype=float), costs,
                   int(doc.get("index", 0)), int(doc.get("M", costs[0].M)))


def generate_instance(config: ExperimentConfig, index: int, M: int | None = None) -> Instance:
    """Fresh K-sparse Gaussian target and per-node Gaussian measurements.

    The support is uniform over the N indices, nonzero values are N(0, 1),
    and each node gets an ``M x N`` matrix with i.i.d. N(0, 1/M) entries.
    With ``config.noise > 0`` white Gaussian noise of that standard
    deviation is added to every measurement.
    """
    M = config.M_list[0] if M is None else M
    rng = np.random.default_rng(_stream(config, _SIGNAL, index))
    x = np.zeros(config.N)
    support = rng.choice(config.N, config.K, replace=False)
    x[support] = rng.standard_normal(config.K)
    rng = np.random.default_rng(_stream(config, _MEAS, index, M))
    costs = []
    for v in range(config.L):
        Phi = rng.normal(0.0, 1.0 / np.sqrt(M), size=(M, config.N))
        y = Phi @ x
        if config.noise > 0:
            y = y + config.noise * rng.standard_normal(M)
        costs.append(LeastSquaresCost(Phi, y, v))
    return Instance(x, costs, index, M)


def success(estimates, x_star, mode: str = "distributed", threshold: float = 1e-4) -> bool:
    """Relative squared-error recovery test.

    ``centralized``: ``|x - x*|^2 / |x*|^2 < threshold`` for one estimate;
    ``distributed``: the same ratio averaged over all node estimates.
    """
    x_star = np.asarray(x_star, dtype=float)
    ref = float(x_star @ x_star)
    if ref == 0:
        raise ValueError("success ratio undefined for a zero target")
    X = np.atleast_2d(np.asarray(estimates, dtype=float))
    if mode == "centralized":
        if X.shape[0] != 1:
            raise ValueError("centralized mode takes a single estimate")
    elif mode != "distributed":
        raise ValueError(f"unknown success mode {mode!r}")
    err = ((X - x_star) ** 2).sum(axis=1).mean()
    return bool(err / ref < threshold)


def _mode(algo):
    return "centralized" if Algorithm.parse(algo) is Algorithm.CENTRALIZED else "distributed"


def instance_step_sizes(config, inst: Instance) -> dict:
    """Node step sizes and the pooled centralised step size for one instance."""
    mu = default_step_sizes(inst.costs, config.K, _stream(config, _STEP, inst.index, inst.M, 0),
                            config.curvature_samples)
    mu_c = default_step_size(stack_costs(inst.costs), config.K,
                             _stream(config, _STEP, inst.index, inst.M, 1),
                             config.curvature_samples)
    return {"nodes": mu, "centralized": np.array([mu_c])}


def run_algorithm(config, network, inst: Instance, algo, mu=None, strategy="config",
                  record_every=0):
    algo = Algorithm.parse(algo)
    if mu is None:
        mu = instance_step_sizes(config, inst)
    sel = config.selection if strategy == "config" else strategy
    spec = AlgorithmSpec(
        algo, config.K,
        mu=mu["centralized"] if algo is Algorithm.CENTRALIZED else mu["nodes"],
        n_it=config.iterations, strategy=sel, record_every=record_every,
        log_groups=False,
    )
    return run(spec, network, inst.costs, inst.x_star,
               seed=_stream(config, _RUN, inst.index, inst.M))


def _instance_task(args):
    config, network, index, M = args
    inst = generate_instance(config, index, M)
    mu = instance_step_sizes(config, inst)
    out = []
    for algo in config.algorithms:
        row = {"algo": algo, "M": M, "index": index}
        try:
            tr = run_algorithm(config, network, inst, algo, mu)
        except DivergenceError as exc:
            logger.warning("instance %d M=%d %s diverged: %s", index, M, algo, exc)
            row.update(success=False, diverged=True, msd=float("inf"),
                       iters=float("inf"), T=0, R=0)
        else:
            row.update(
                success=success(tr.estimates, inst.x_star, _mode(algo),
                                config.success_threshold),
                diverged=False,
                msd=float(tr.msd[-1]),
                iters=tr.iterations_to(config.success_threshold),
                T=int(tr.transmit_total[-1]),
                R=int(tr.receive_total[-1]),
                curve=tr.msd,
            )
        out.append(row)
    return out


def _map_instances(config, network, tasks):
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            chunks = list(pool.map(_instance_task, tasks))
    else:
        chunks = [_instance_task(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    # order-independent aggregation
    rows.sort(key=lambda r: (r["algo"], r["M"], r["index"]))
    return rows


def _nanmean(values):
    values = [v for v in values if np.isfinite(v)]
    return float(np.mean(values)) if values else float("nan")


def recovery_sweep(config: ExperimentConfig, network: Network | None = None) -> list[dict]:
    """Success probability and cost statistics per algorithm and per-node M."""
    network = experiment_network(config) if network is None else network
    tasks = [(config, network, i, M) for M in config.M_list for i in range(config.instances)]
    rows = _map_instances(config, network, tasks)
    sel = config.selection
    table = []
    for algo in config.algorithms:
        uses_strategy = sel is not None and Algorithm.parse(algo) not in (
            Algorithm.CENTRALIZED, Algorithm.NONCOOPERATIVE)
        for M in config.M_list:
            group = [r for r in rows if r["algo"] == algo and r["M"] == M]
            wins = [r for r in group if r["success"]]
            msd = [r["msd"] for r in group]
            table.append({
                "algo": algo,
                "strategy": sel.label if uses_strategy else "deterministic",
                "M_per_node": M,
                "M_total": M * config.L,
                "p_success": len(wins) / len(group),
                "mean_iters": _nanmean([r["iters"] for r in wins]),
                "mean_T_total": float(np.mean([r["T"] for r in group])),
                "mean_R_total": float(np.mean([r["R"] for r in group])),
                "mean_msd": _nanmean(msd),
                "median_msd": float(np.median(msd)),
                "instances": len(group),
                "diverged": sum(r["diverged"] for r in group),
            })
    return table


@dataclass
class MSDStudy:
    """Instance-averaged relative-MSD curves and per-instance convergence times."""

    curves: dict
    iterations: dict
    strategy: str

    def median_iterations(self, algo) -> float:
        return float(np.median(self.iterations[Algorithm.parse(algo).value]))

    def rows(self):
        for algo, curve in self.curves.items():
            for n, value in enumerate(curve):
                yield {"algo": algo, "strategy": self.strategy, "n": n, "msd": float(value)}


def msd_study(config: ExperimentConfig, network: Network | None = None,
              M: int | None = None) -> MSDStudy:
    """Per-iteration relative MSD averaged over instances at one per-node M.

    Runs that stop early are held at their final value up to ``n_it``.
    """
    network = experiment_network(config) if network is None else network
    M = config.M_list[0] if M is None else M
    tasks = [(config, network, i, M) for i in range(config.instances)]
    rows = _map_instances(config, network, tasks)
    length = config.iterations + 1
    curves, iterations = {}, {}
    for algo in config.algorithms:
        group = [r for r in rows if r["algo"] == algo and "curve" in r]
        padded = [np.pad(r["curve"], (0, length - len(r["curve"])), mode="edge")
                  for r in group]
        curves[algo] = np.mean(padded, axis=0) if padded else np.full(length, np.nan)
        iterations[algo] = [r["iters"] for r in rows if r["algo"] == algo]
    sel = config.selection
    return MSDStudy(curves, iterations, "deterministic" if sel is None else sel.label)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(rows, columns, path=None) -> str:
    """Write dict rows with a header; floats use ``repr`` so output is exact."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
