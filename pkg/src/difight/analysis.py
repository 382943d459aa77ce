"""Nonnegative-matrix tools and the error-bound checkers.

The error recursions analysed here have the form ``h <= B h + d`` with a
nonnegative iteration matrix; their limit bounds are finite exactly when the
iteration matrix is stable (spectral radius below one).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cost import (CurvatureBudgetError, contraction_factor, restricted_curvature,
                   support_curvature, omega as omega_formula)
from .signals import top_k_gradient_norm

POWER_MAX_ITER = 100_000
POWER_TOL = 1e-12
DENSE_FALLBACK_MAX_L = 32


class SpectralConvergenceError(ArithmeticError):
    def __init__(self, residual, iterations):
        super().__init__(f"power iteration did not converge after {iterations} "
                         f"iterations (residual {residual:.3e})")
        self.residual = residual


class BoundInconsistencyError(ArithmeticError):
    pass


def _square(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("expected a square matrix")
    return X


def _reach(pattern, start):
    seen = np.zeros(pattern.shape[0], dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(pattern[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def is_irreducible(X) -> bool:
    """True iff the digraph of nonzero entries is strongly connected.

    Checked by forward and backward reachability from node 0.
    """
    X = _square(X)
    if np.any(X < 0):
        raise ValueError("irreducibility is defined for nonnegative matrices")
    if X.shape[0] == 1:
        return bool(X[0, 0] > 0)
    pattern = X > 0
    return bool(_reach(pattern, 0).all() and _reach(pattern.T, 0).all())


@dataclass(frozen=True)
class SpectralResult:
    radius: float
    vector: np.ndarray | None
    iterations: int
    residual: float
    method: str
    second_modulus: float | None = None


def dense_eigenvalues(X) -> np.ndarray:
    """All eigenvalues sorted by decreasing modulus (LAPACK Hessenberg QR)."""
    w = np.linalg.eigvals(_square(X))
    return w[np.argsort(-np.abs(w), kind="stable")]


def _power_iteration(X, tol, max_iter):
    L = X.shape[0]
    shift = 0.5 * X.sum(axis=1).max()
    if shift == 0:
        return 0.0, np.full(L, 1.0 / L), 0, 0.0, True
    Xs = X + shift * np.eye(L)
    v = np.full(L, 1.0 / L)
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = Xs @ v
        v = w / w.sum()
        Xv = X @ v
        if np.all(v > 0):
            # Collatz-Wielandt bracket: min ratio <= r <= max ratio
            ratios = Xv / v
            lo, hi = ratios.min(), ratios.max()
            residual = hi - lo
            r = 0.5 * (lo + hi)
        else:
            r = float(Xv.sum() / v.sum())
            residual = float(np.abs(Xv - r * v).max())
        if residual <= tol * max(1.0, abs(r)):
            return float(r), v, it, float(residual), True
    return float(r), v, max_iter, float(residual), False


def spectral_radius(X, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> SpectralResult:
    """Largest eigenvalue modulus of ``X``.

    Nonnegative inputs use shifted power iteration and return the Perron
    vector (normalised to sum 1, strictly positive for irreducible input).
    Matrices with negative entries, or power iteration that stalls, fall back
    to a dense eigensolve when ``L <= 32``; beyond that a stall raises
    :class:`SpectralConvergenceError`.
    """
    X = _square(X)
    L = X.shape[0]
    dense = dense_eigenvalues(X) if L <= DENSE_FALLBACK_MAX_L else None
    second = float(abs(dense[1])) if dense is not None and L > 1 else None
    if np.all(X >= 0):
        r, v, it, res, ok = _power_iteration(X, tol, max_iter)
        if ok:
            return SpectralResult(r, v, it, res, "power", second)
        if dense is None:
            raise SpectralConvergenceError(res, it)
    if dense is None:
        dense = dense_eigenvalues(X)
    return SpectralResult(float(abs(dense[0])), None, 0, 0.0, "dense", second)


@dataclass(frozen=True)
class BoundContext:
    """Ingredients of the error bounds.

    ``omega`` and ``mu`` are per-node contraction factors and step sizes,
    ``b`` the per-node norms of the 2K-largest gradient entries at the
    target, ``A`` the combination matrix, ``pi`` participation probabilities
    (``None`` for the deterministic algorithms) and ``alpha_algo`` the
    algorithm constant (2 for DiFIGHT, 4 for MoDiFIGHT). ``certified`` is
    False when ``omega`` came from sampled curvature.
    """

    omega: np.ndarray
    mu: np.ndarray
    b: np.ndarray
    A: np.ndarray
    alpha_algo: int = 2
    pi: np.ndarray | None = None
    certified: bool = True

    def __post_init__(self):
        for name in ("omega", "mu", "b", "A"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, arr)
        if self.pi is not None:
            object.__setattr__(self, "pi", np.asarray(self.pi, dtype=float))
        if self.alpha_algo not in (2, 4):
            raise ValueError("alpha_algo must be 2 (DiFIGHT) or 4 (MoDiFIGHT)")

    @property
    def Omega(self):
        return np.diag(self.omega)

    @property
    def M(self):
        return np.diag(self.mu)

    @property
    def P(self):
        return np.diag(self.pi if self.pi is not None else np.ones(len(self.omega)))


def algorithm_constant(algo) -> int:
    from .engine import Algorithm

    algo = Algorithm.parse(algo)
    if algo is Algorithm.DIFIGHT:
        return 2
    if algo is Algorithm.MODIFIGHT:
        return 4
    raise ValueError(f"no error bound for {algo.value}")


def build_context(network, costs, mu, x_star, K, algo="DiFIGHT", pi=None,
                  curvature_mode="auto", seed=None, samples=500) -> BoundContext:
    """Assemble a :class:`BoundContext` from a problem instance.

    ``curvature_mode='auto'`` enumerates order-3K supports exactly when the
    budget allows and falls back to sampling otherwise.
    """
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (len(costs),))
    omegas, certified = [], True
    for c, m in zip(costs, mu):
        k = min(3 * K, c.N)
        mode = curvature_mode
        if mode == "auto":
            try:
                bounds = restricted_curvature(c, k, "exact")
            except CurvatureBudgetError:
                bounds = restricted_curvature(c, k, "sampled", seed, samples)
        else:
            bounds = restricted_curvature(c, k, mode, seed, samples)
        certified &= bounds.exact
        omegas.append(contraction_factor(bounds, m).omega)
    x_star = np.asarray(x_star, dtype=float)
    b = [top_k_gradient_norm(c.gradient(x_star), min(2 * K, c.N)) for c in costs]
    return BoundContext(np.array(omegas), np.array(mu), np.array(b), network.combination,
                        algorithm_constant(algo), pi, certified)


@dataclass
class BoundReport:
    stable: bool
    spectral_radius: float
    conditions: dict
    limit_bound: np.ndarray | None
    iteration_matrix: np.ndarray = field(repr=False)
    certified: bool = True

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "spectral_radius": self.spectral_radius,
            "conditions": self.conditions,
            "bound": None if self.limit_bound is None else self.limit_bound.tolist(),
            "certified": self.certified,
        }


def _limit(iteration_matrix, forcing):
    L = iteration_matrix.shape[0]
    try:
        return np.linalg.solve(np.eye(L) - iteration_matrix, forcing)
    except np.linalg.LinAlgError as exc:
        raise BoundInconsistencyError("I - iteration matrix is singular") from exc


def deterministic_bound(ctx: BoundContext) -> BoundReport:
    """Stability of ``alpha A^T Omega`` and the limit bound on the error vector.

    The bound is ``alpha (I - alpha A^T Omega)^{-1} A^T M b``. Two sufficient
    conditions are reported next to the exact spectral radius: the largest
    weighted column sum ``max_i sum_j omega_j a_ji`` and ``max_j omega_j``,
    each to be compared with ``1 / alpha``.
    """
    a = ctx.alpha_algo
    H = a * ctx.A.T @ ctx.Omega
    rho = spectral_radius(H).radius
    row = float((ctx.A.T @ ctx.omega).max())
    worst = float(ctx.omega.max())
    conditions = {
        "threshold": 1.0 / a,
        "weighted_column_sum": row,
        "weighted_column_sum_holds": row < 1.0 / a,
        "max_omega": worst,
        "max_omega_holds": worst < 1.0 / a,
    }
    stable = rho < 1.0
    bound = _limit(H, a * ctx.A.T @ (ctx.mu * ctx.b)) if stable else None
    return BoundReport(stable, rho, conditions, bound, H, ctx.certified)


def randomized_bound(ctx: BoundContext) -> BoundReport:
    """Mean-error bound ``(I - B Omega)^{-1} B M b`` with ``B = alpha (I - P + P A^T)``."""
    a = ctx.alpha_algo
    L = len(ctx.omega)
    pi = ctx.pi if ctx.pi is not None else np.ones(L)
    P = np.diag(pi)
    B = a * (np.eye(L) - P + P @ ctx.A.T)
    BO = B @ ctx.Omega
    rho = spectral_radius(BO).radius
    mixed = float((ctx.omega * (1 - pi) + pi * (ctx.A.T @ ctx.omega)).max())
    worst = float(ctx.omega.max())
    conditions = {
        "threshold": 1.0 / a,
        "participation_weighted": mixed,
        "participation_weighted_holds": mixed < 1.0 / a,
        "max_omega": worst,
        "max_omega_holds": worst < 1.0 / a,
    }
    stable = rho < 1.0
    bound = _limit(BO, B @ (ctx.mu * ctx.b)) if stable else None
    return BoundReport(stable, rho, conditions, bound, BO, ctx.certified)


@dataclass(frozen=True)
class Lemma3Report:
    limit: np.ndarray
    statement_form: np.ndarray
    final: np.ndarray
    gap: float
    worst_excess: float
    passed: bool


def check_lemma3(B, b, u0=None, steps: int = 10_000, tol: float = 1e-8) -> Lemma3Report:
    """Run ``u <- B u + b`` and compare late iterates with ``(I - B)^{-1} b``.

    The equality recursion dominates every nonnegative sequence obeying the
    inequality. ``statement_form`` is ``(I - B)^{-1} B b``, reported for
    comparison. ``passed`` means every iterate in the last tenth stays
    below the limit plus ``tol``.
    """
    B = _square(B)
    b = np.asarray(b, dtype=float)
    if np.any(B < 0) or np.any(b < 0):
        raise ValueError("B and b must be nonnegative")
    rho = spectral_radius(B).radius
    if rho >= 1:
        raise ValueError(f"B is not stable (spectral radius {rho:.6g})")
    L = B.shape[0]
    u = np.zeros(L) if u0 is None else np.asarray(u0, dtype=float)
    if np.any(u < 0):
        raise ValueError("u0 must be nonnegative")
    limit = np.linalg.solve(np.eye(L) - B, b)
    late_start = steps - max(1, steps // 10)
    worst = -np.inf
    for n in range(steps):
        u = B @ u + b
        if n >= late_start:
            worst = max(worst, float((u - limit).max()))
    return Lemma3Report(
        limit=limit,
        statement_form=np.linalg.solve(np.eye(L) - B, B @ b),
        final=u,
        gap=float(np.abs(u - limit).max()),
        worst_excess=worst,
        passed=worst <= tol,
    )


@dataclass
class EmpiricalReport:
    regime: str
    late_error: np.ndarray
    bound: np.ndarray | None
    excess: float | None
    passed: bool | None


def empirical_vs_theoretical(traces, ctx: BoundContext, randomized: bool = False,
                             late_fraction: float = 0.1, tol: float = 1e-9) -> EmpiricalReport:
    """Compare observed late-iterate errors with the theoretical limit bound.

    ``traces`` is one :class:`RunTrace` (deterministic) or a list of traces
    from independent seeds (randomised; the bound covers the mean error, so
    the late errors are averaged over seeds first). When the stability
    condition fails the report is marked ``condition violated`` and no
    verdict is given.
    """
    if not isinstance(traces, (list, tuple)):
        traces = [traces]
    report = randomized_bound(ctx) if randomized else deterministic_bound(ctx)
    n = min(len(t.h) for t in traces)
    H = np.mean([t.h[:n] for t in traces], axis=0)
    start = max(0, n - max(1, int(late_fraction * n)))
    # liminf over the late window
    late = H[start:].min(axis=0)
    if not report.stable:
        return EmpiricalReport("condition violated", late, None, None, None)
    excess = float((late - report.limit_bound).max())
    regime = "verified" if ctx.certified else "conditional"
    return EmpiricalReport(regime, late, report.limit_bound, excess, excess <= tol)


@dataclass(frozen=True)
class RecursionCheck:
    worst_excess: float
    steps: int
    violations: int
    omega_max: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def check_error_recursion(network, costs, mu, x_star, K, estimates, alpha_algo=2,
                          omega=None, b=None, tol=1e-9) -> RecursionCheck:
    """Check ``h^{n+1} <= alpha A^T (Omega h^n + M b)`` along a recorded run.

    ``estimates`` is the sequence of ``(L, N)`` estimate arrays. With
    ``omega=None`` each pair ``(i, j)`` and step uses the contraction factor
    from the exact curvature of ``f_j`` on
    ``supp x_i^{n+1} | supp x_j^n | supp x*``, which never exceeds the
    order-3K factor, so passing this check implies the fixed-omega form.
    """
    x_star = np.asarray(x_star, dtype=float)
    A = network.combination
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (len(costs),))
    if b is None:
        b = np.array([top_k_gradient_norm(c.gradient(x_star), min(2 * K, c.N))
                      for c in costs])
    star = set(np.flatnonzero(x_star))
    worst, violations, omax = -np.inf, 0, 0.0
    L = len(costs)
    for X, X_next in zip(estimates[:-1], estimates[1:]):
        h = np.linalg.norm(X - x_star, axis=1)
        h_next = np.linalg.norm(X_next - x_star, axis=1)
        for i in range(L):
            rhs = 0.0
            for j in np.flatnonzero(A[:, i]):
                if omega is None:
                    T = sorted(star | set(np.flatnonzero(X_next[i])) | set(np.flatnonzero(X[j])))
                    cb = support_curvature(costs[j], T)
                    w = omega_formula(cb.alpha_k, cb.beta_k, mu[j])
                else:
                    w = omega[j]
                omax = max(omax, w)
                rhs += A[j, i] * (w * h[j] + mu[j] * b[j])
            rhs *= alpha_algo
            excess = h_next[i] - rhs
            worst = max(worst, excess)
            if excess > tol * max(1.0, rhs):
                violations += 1
    return RecursionCheck(float(worst), len(estimates) - 1, violations, float(omax))
