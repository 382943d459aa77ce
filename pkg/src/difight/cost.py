"""Least-squares node costs, restricted curvature and contraction factors."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .signals import SparseSignal

ENUMERATION_BUDGET = 1_000_000
DEFAULT_CURVATURE_SAMPLES = 500


class CurvatureBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class LeastSquaresCost:
    """``f(z) = ||y - Phi z||^2`` held by one node."""

    Phi: np.ndarray
    y: np.ndarray
    node: int = 0

    def __post_init__(self):
        Phi = np.atleast_2d(np.asarray(self.Phi, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if Phi.shape[0] != y.size:
            raise ValueError(f"Phi has {Phi.shape[0]} rows but y has {y.size} entries")
        Phi.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "y", y)

    @property
    def M(self) -> int:
        return self.Phi.shape[0]

    @property
    def N(self) -> int:
        return self.Phi.shape[1]

    def _check(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.N,):
            raise ValueError(f"expected a vector of length {self.N}, got shape {z.shape}")
        return z

    def value(self, z) -> float:
        r = self.y - self.Phi @ self._check(z)
        return float(r @ r)

    def gradient(self, z) -> np.ndarray:
        z = self._check(z)
        return 2.0 * self.Phi.T @ (self.Phi @ z - self.y)

    def hessian(self) -> np.ndarray:
        return 2.0 * self.Phi.T @ self.Phi

    def to_dict(self) -> dict:
        return {"node": self.node, "M": self.M, "N": self.N,
                "Phi": self.Phi.ravel().tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "LeastSquaresCost":
        Phi = np.asarray(doc["Phi"], dtype=float).reshape(doc["M"], doc["N"])
        return cls(Phi, np.asarray(doc["y"], dtype=float), int(doc.get("node", 0)))


def stack_costs(costs) -> LeastSquaresCost:
    """Pool every node's measurements into a single centralised cost."""
    return LeastSquaresCost(np.vstack([c.Phi for c in costs]),
                            np.concatenate([c.y for c in costs]), node=-1)


@dataclass(frozen=True)
class CurvatureBounds:
    """Restricted eigenvalue range of the Hessian over k-sparse supports.

    ``alpha_k`` may be zero when ``k`` exceeds the number of measurements.
    ``exact=False`` marks bounds estimated from sampled supports; those are
    not certified (the true range can only be wider).
    """

    alpha_k: float
    beta_k: float
    k: int
    exact: bool

    def __post_init__(self):
        if self.alpha_k < 0 or self.beta_k < self.alpha_k:
            raise ValueError(f"invalid curvature bounds ({self.alpha_k}, {self.beta_k})")


def _support_extremes(H, supports):
    # batched eigvalsh over stacks of principal submatrices
    lo, hi = np.inf, -np.inf
    for chunk in supports:
        idx = np.asarray(chunk)
        sub = H[idx[:, :, None], idx[:, None, :]]
        w = np.linalg.eigvalsh(sub)
        lo = min(lo, w[:, 0].min())
        hi = max(hi, w[:, -1].max())
    return lo, hi


def _chunks(iterable, size):
    it = iter(iterable)
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield block


def restricted_curvature(
    cost,
    k: int,
    mode: str = "exact",
    seed=None,
    samples: int = DEFAULT_CURVATURE_SAMPLES,
    budget: int = ENUMERATION_BUDGET,
) -> CurvatureBounds:
    """Extreme eigenvalues of ``2 Phi_S^T Phi_S`` over supports ``|S| = k``.

    ``cost`` is a :class:`LeastSquaresCost` or a Hessian matrix. In exact
    mode every support is enumerated (at most ``budget`` of them); sampled
    mode draws ``samples`` uniform supports from ``seed``.
    """
    H = cost.hessian() if isinstance(cost, LeastSquaresCost) else np.asarray(cost, float)
    N = H.shape[0]
    if not 1 <= k <= N:
        raise ValueError(f"order k must lie in [1, {N}], got {k}")
    if mode == "exact":
        n_supports = comb(N, k)
        if n_supports > budget:
            raise CurvatureBudgetError(
                f"C({N},{k}) = {n_supports} supports exceeds the enumeration budget "
                f"{budget}; use mode='sampled'"
            )
        lo, hi = _support_extremes(H, _chunks(itertools.combinations(range(N), k), 4096))
        exact = True
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        S = np.argsort(rng.random((samples, N)), axis=1)[:, :k]
        lo, hi = _support_extremes(H, _chunks(S, 4096))
        exact = k == N
    else:
        raise ValueError(f"unknown curvature mode {mode!r}")
    # rank-deficient supports give tiny negative rounding
    return CurvatureBounds(max(float(lo), 0.0), float(hi), k, exact)


def support_curvature(cost, T) -> CurvatureBounds:
    """Exact curvature on one support ``T`` (constant Hessian)."""
    H = cost.hessian() if isinstance(cost, LeastSquaresCost) else np.asarray(cost, float)
    T = list(T)
    if not T:
        return CurvatureBounds(0.0, 0.0, 0, True)
    w = np.linalg.eigvalsh(H[np.ix_(T, T)])
    return CurvatureBounds(max(float(w[0]), 0.0), float(w[-1]), len(T), True)


def omega(alpha, beta, mu):
    return abs(1.0 - mu * (beta + alpha) / 2.0) + mu * (beta - alpha) / 2.0


@dataclass(frozen=True)
class ContractionFactor:
    omega: float
    mu: float
    k: int
    mu_star: float
    omega_star: float


def contraction_factor(bounds: CurvatureBounds, mu: float) -> ContractionFactor:
    """Contraction factor of a gradient step of size ``mu`` plus its optimum.

    The optimum is ``mu* = 2 / (alpha + beta)`` with
    ``omega* = (beta - alpha) / (beta + alpha)``.
    """
    if mu <= 0:
        raise ValueError("step size must be positive")
    a, b = bounds.alpha_k, bounds.beta_k
    if a + b > 0:
        mu_star, omega_star = 2.0 / (a + b), (b - a) / (b + a)
    else:
        mu_star, omega_star = np.inf, 1.0
    return ContractionFactor(omega(a, b, mu), mu, bounds.k, mu_star, omega_star)


def default_step_size(cost: LeastSquaresCost, K: int, seed=None,
                      samples: int = DEFAULT_CURVATURE_SAMPLES) -> float:
    """``2 / (alpha + beta)`` from sampled curvature at order 3K."""
    bounds = restricted_curvature(cost, min(3 * K, cost.N), "sampled", seed, samples)
    return 2.0 / (bounds.alpha_k + bounds.beta_k)


@dataclass(frozen=True)
class Lemma1Report:
    rho: float
    rho_prime: float
    bounds: CurvatureBounds
    inner_product: float
    inner_product_bound: float
    restricted_norm: float
    restricted_norm_bound: float

    @property
    def slack_inner(self) -> float:
        return self.inner_product_bound - self.inner_product

    @property
    def slack_norm(self) -> float:
        return self.restricted_norm_bound - self.restricted_norm

    def passed(self, tol: float = 1e-9) -> bool:
        return self.slack_inner >= -tol and self.slack_norm >= -tol


def _dense(v):
    return v.values if isinstance(v, SparseSignal) else np.asarray(v, dtype=float)


def check_lemma1(cost: LeastSquaresCost, rho: float, x, y, z) -> Lemma1Report:
    """Evaluate both restricted inner-product inequalities.

    With ``g = y - z - rho (grad f(y) - grad f(z))`` and ``T`` the union of
    the three supports, checks ``<x, g> <= rho' |x| |y - z|`` and
    ``|g restricted to supp x| <= rho' |y - z|`` using the exact curvature
    of ``f`` on ``T``.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    xv, yv, zv = (_dense(v) for v in (x, y, z))
    if not xv.shape == yv.shape == zv.shape == (cost.N,):
        raise ValueError("x, y, z must all have length N")
    T1 = np.flatnonzero(xv)
    T = np.union1d(np.union1d(T1, np.flatnonzero(yv)), np.flatnonzero(zv))
    bounds = support_curvature(cost, T)
    d1 = (bounds.beta_k + bounds.alpha_k) / 2.0
    d2 = (bounds.beta_k - bounds.alpha_k) / 2.0
    rho_prime = abs(1.0 - rho * d1) + rho * d2
    g = yv - zv - rho * (cost.gradient(yv) - cost.gradient(zv))
    dist = float(np.linalg.norm(yv - zv))
    return Lemma1Report(
        rho=rho,
        rho_prime=rho_prime,
        bounds=bounds,
        inner_product=float(xv @ g),
        inner_product_bound=rho_prime * float(np.linalg.norm(xv)) * dist,
        restricted_norm=float(np.linalg.norm(g[T1])),
        restricted_norm_bound=rho_prime * dist,
    )
