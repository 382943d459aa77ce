"""Sparse vectors, supports and the hard thresholding operator.

Indices are 0-based throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SparseSignal:
    """A length-N vector with at most ``K`` nonzeros stored densely.

    ``support`` holds the sorted indices of the nonzero entries.
    """

    values: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        support = tuple(sorted(int(i) for i in self.support))
        if len(set(support)) != len(support):
            raise ValueError("support contains duplicate indices")
        if support and (support[0] < 0 or support[-1] >= values.size):
            raise ValueError("support index out of range")
        outside = np.ones(values.size, dtype=bool)
        outside[list(support)] = False
        if np.any(values[outside] != 0):
            raise ValueError("nonzero value outside the declared support")
        object.__setattr__(self, "support", support)

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def sparsity(self) -> int:
        return len(self.support)

    @classmethod
    def from_dense(cls, x) -> "SparseSignal":
        x = np.asarray(x, dtype=float)
        return cls(x.copy(), tuple(np.flatnonzero(x)))


def _check_order(K, N):
    if K < 0 or K > N:
        raise ValueError(f"sparsity order must lie in [0, {N}], got {K}")


def top_k_indices(x, K: int) -> np.ndarray:
    """Indices of the ``K`` largest-magnitude entries of ``x``.

    Ties at the cut keep the lower index (stable sort on descending
    magnitude). Works row-wise on 2-D input.
    """
    x = np.asarray(x, dtype=float)
    _check_order(K, x.shape[-1])
    order = np.argsort(-np.abs(x), axis=-1, kind="stable")
    return order[..., :K]


def hard_threshold_array(x, K: int) -> np.ndarray:
    """Dense H_K: keep the K largest magnitudes of ``x`` (row-wise for 2-D)."""
    x = np.asarray(x, dtype=float)
    keep = top_k_indices(x, K)
    out = np.zeros_like(x)
    if x.ndim == 1:
        out[keep] = x[keep]
    else:
        rows = np.arange(x.shape[0])[:, None]
        out[rows, keep] = x[rows, keep]
    return out


def hard_threshold(x, K: int) -> SparseSignal:
    """Best K-term approximation of ``x`` in the Euclidean norm.

    Raises ``ValueError`` when ``K`` is outside ``[0, len(x)]``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("hard_threshold expects a 1-D vector")
    return SparseSignal.from_dense(hard_threshold_array(x, K))


def validate_support(S, N: int) -> tuple[int, ...]:
    S = tuple(sorted(int(i) for i in S))
    if len(set(S)) != len(S):
        raise ValueError("support contains duplicate indices")
    if S and (S[0] < 0 or S[-1] >= N):
        raise ValueError(f"support index out of range for length {N}")
    return S


def restrict(x, S) -> np.ndarray:
    """Zero every entry of ``x`` outside ``S`` (same length as ``x``)."""
    x = np.asarray(x, dtype=float)
    S = validate_support(S, x.size)
    out = np.zeros_like(x)
    out[list(S)] = x[list(S)]
    return out


def top_k_gradient_norm(g, k: int) -> float:
    """Euclidean norm of the ``k`` largest-magnitude entries of ``g``."""
    return float(np.linalg.norm(hard_threshold_array(g, k)))
