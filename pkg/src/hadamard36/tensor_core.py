"""Bipartite index bookkeeping, realignments and elementary matrix builders.

A matrix of order ``N = d**2`` is addressed by a four-index ``X[jk; lm]``
where the composite row index ``(j, k)`` maps to ``j*d + k`` (the same
row-major convention as :func:`numpy.kron`).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import isqrt
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class BipartiteShape:
    """Local dimension ``d`` and global dimension ``N = d**2``."""

    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"local dimension must be an integer >= 2, got {self.d!r}")

    @property
    def N(self) -> int:
        return self.d * self.d

    @classmethod
    def from_order(cls, n: int) -> "BipartiteShape":
        d = isqrt(n)
        if d * d != n:
            raise ValueError(f"matrix order {n} is not a perfect square")
        return cls(d)


def _shape_for(X: np.ndarray, shape: BipartiteShape | None) -> BipartiteShape:
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    if shape is None:
        return BipartiteShape.from_order(X.shape[0])
    if X.shape[0] != shape.N:
        raise ValueError(f"matrix of order {X.shape[0]} does not match d={shape.d}")
    return shape


def as_matrix(X) -> np.ndarray:
    """Return ``X`` as a complex 2-d array, rejecting NaN/Inf entries."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d array, got {X.ndim} dimensions")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    return X


def compose_index(j: int, k: int, shape: BipartiteShape) -> int:
    if not (0 <= j < shape.d and 0 <= k < shape.d):
        raise ValueError(f"local index ({j}, {k}) out of range for d={shape.d}")
    return j * shape.d + k


def decompose_index(flat: int, shape: BipartiteShape) -> tuple[int, int]:
    if not 0 <= flat < shape.N:
        raise ValueError(f"flat index {flat} out of range for N={shape.N}")
    return divmod(flat, shape.d)


def _four_index(X, shape):
    X = np.asarray(X)
    shape = _shape_for(X, shape)
    d = shape.d
    return X.reshape(d, d, d, d), shape


def reshuffle(X, shape: BipartiteShape | None = None) -> np.ndarray:
    """Reshuffling: ``Y[jk; lm] = X[jl; km]``."""
    T, shape = _four_index(X, shape)
    return T.transpose(0, 2, 1, 3).reshape(shape.N, shape.N)


def partial_transpose(X, shape: BipartiteShape | None = None) -> np.ndarray:
    """Partial transpose on the second factor: ``Y[jk; lm] = X[jm; lk]``."""
    T, shape = _four_index(X, shape)
    return T.transpose(0, 3, 2, 1).reshape(shape.N, shape.N)


def kron(A, B) -> np.ndarray:
    """``(A ⊗ B)[(j,k),(l,m)] = A[j,l] * B[k,m]`` under :func:`compose_index`."""
    return np.kron(np.asarray(A), np.asarray(B))


def fourier_unimodular(d: int) -> np.ndarray:
    """Fourier matrix with entries ``exp(2πi jk/d)``."""
    if d < 1:
        raise ValueError("d must be positive")
    jk = np.outer(np.arange(d), np.arange(d)) % d
    return np.exp(2j * np.pi * jk / d)


def fourier_unitary(d: int) -> np.ndarray:
    return fourier_unimodular(d) / np.sqrt(d)


def shift_X(d: int) -> np.ndarray:
    """Cyclic shift ``X|k> = |k+1 mod d>``."""
    return np.roll(np.eye(d), 1, axis=0)


def anti_diagonal_A(d: int) -> np.ndarray:
    return np.fliplr(np.eye(d))


def controlled_shift_P(d: int) -> np.ndarray:
    """Generalised CNOT ``sum_j |j><j| ⊗ X^j``, i.e. ``|j,k> -> |j, k+j mod d>``."""
    X = shift_X(d)
    P = np.zeros((d * d, d * d))
    for j in range(d):
        proj = np.zeros((d, d))
        proj[j, j] = 1.0
        P += np.kron(proj, np.linalg.matrix_power(X, j))
    return P


def permutation_matrix(perm) -> np.ndarray:
    """Matrix sending basis vector ``e_i`` to ``e_{perm[i]}``."""
    perm = np.asarray(perm, dtype=int)
    n = len(perm)
    if sorted(perm.tolist()) != list(range(n)):
        raise ValueError("not a permutation of 0..n-1")
    P = np.zeros((n, n))
    P[perm, np.arange(n)] = 1.0
    return P


class UnitarityCheck(NamedTuple):
    passed: bool
    residual: float


def unitarity_residual(U, scale: float = 1.0) -> float:
    """``max |(U/s)(U/s)^† - I|``."""
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {U.shape}")
    if np.isnan(U).any():
        raise ValueError("matrix contains NaN entries")
    V = U / scale
    return float(np.abs(V @ V.conj().T - np.eye(U.shape[0])).max())


def is_unitary(U, scale: float = 1.0, tol: float = 1e-10) -> UnitarityCheck:
    r = unitarity_residual(U, scale)
    return UnitarityCheck(bool(r <= tol), r)


@dataclass(frozen=True)
class TwoUnitarityReport:
    residual_U: float
    residual_R: float
    residual_Gamma: float
    tol: float

    @property
    def residual(self) -> float:
        return max(self.residual_U, self.residual_R, self.residual_Gamma)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def __bool__(self):
        return self.passed


def is_two_unitary(U, shape: BipartiteShape | None = None, scale: float = 1.0,
                   tol: float = 1e-10) -> TwoUnitarityReport:
    U = np.asarray(U)
    shape = _shape_for(U, shape)
    return TwoUnitarityReport(
        unitarity_residual(U, scale),
        unitarity_residual(reshuffle(U, shape), scale),
        unitarity_residual(partial_transpose(U, shape), scale),
        tol,
    )
