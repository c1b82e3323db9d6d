"""SVD, polar projection onto the unitary group and thresholded numerical rank."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

# default rank cut is sigma_max * max(shape) * eps * RANK_MULTIPLIER
RANK_MULTIPLIER = 64


class KernelError(RuntimeError):
    pass


class RankDeficientWarning(UserWarning):
    """Polar factor requested for a (numerically) singular matrix."""


class SvdResult(NamedTuple):
    W: np.ndarray
    s: np.ndarray
    Vh: np.ndarray


def svd(M) -> SvdResult:
    """Full SVD ``M = W @ diag(s) @ Vh`` with ``s`` sorted descending."""
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("svd input has non-finite entries")
    try:
        W, s, Vh = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise KernelError(f"SVD did not converge for a {M.shape} matrix: {exc}") from exc
    return SvdResult(W, s, Vh)


def default_threshold(s: np.ndarray, shape: tuple[int, int]) -> float:
    if len(s) == 0:
        return 0.0
    return float(s[0] * max(shape) * np.finfo(float).eps * RANK_MULTIPLIER)


@dataclass(frozen=True)
class RankReport:
    singular_values: np.ndarray
    threshold: float
    rank: int
    nullity: int

    @property
    def gap_ratio(self) -> float:
        """Ratio of the last kept to the first discarded singular value."""
        s = self.singular_values
        if self.rank == 0 or self.rank >= len(s):
            return float("inf")
        if s[self.rank] == 0:
            return float("inf")
        return float(s[self.rank - 1] / s[self.rank])


def numeric_rank(M, threshold_policy: Callable[[np.ndarray, tuple], float] | None = None
                 ) -> RankReport:
    """Count singular values above ``threshold_policy(s, M.shape)``.

    Columns beyond the number of singular values (wide matrices) count
    towards the nullity.
    """
    M = np.asarray(M)
    s = np.linalg.svd(M, compute_uv=False)
    policy = threshold_policy or default_threshold
    tau = policy(s, M.shape)
    rank = int(np.count_nonzero(s > tau))
    return RankReport(s, tau, rank, M.shape[1] - rank)


def polar_project(X, rank_tol: float | None = None) -> np.ndarray:
    """Closest unitary to ``X`` in Frobenius norm, ``W @ Vh`` from the SVD.

    Emits :class:`RankDeficientWarning` when a singular value falls below
    the rank threshold; the (non-unique) projection is still returned.
    """
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"polar projection needs a square matrix, got {X.shape}")
    W, s, Vh = svd(X)
    tau = default_threshold(s, X.shape) if rank_tol is None else rank_tol
    if s[-1] <= tau:
        warnings.warn(
            f"polar projection of a rank-deficient matrix (sigma_min={s[-1]:.3e}); "
            "the unitary factor is not unique",
            RankDeficientWarning, stacklevel=2)
    return W @ Vh
