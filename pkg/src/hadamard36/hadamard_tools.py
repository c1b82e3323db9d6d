"""Complex Hadamard predicates: Hadamard check, Butson detection, dephasing,
symmetry and the defect."""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import NamedTuple

import numpy as np

from .linalg_kernels import numeric_rank

DEFAULT_Q_MAX = 240
# defect integers are only reported across a singular-value gap at least this wide
MIN_GAP_RATIO = 1e3


class ChmCheck(NamedTuple):
    passed: bool
    unimodularity_residual: float
    orthogonality_residual: float


def is_chm(H, tol: float = 1e-10) -> ChmCheck:
    """Unimodular entries and ``H H^† = n I``."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    n = H.shape[0]
    r_mod = float(np.abs(np.abs(H) - 1).max())
    r_orth = float(np.abs(H @ H.conj().T / n - np.eye(n)).max())
    return ChmCheck(bool(r_mod <= tol and r_orth <= tol), r_mod, r_orth)


def is_symmetric(H, tol: float = 1e-10) -> bool:
    H = np.asarray(H)
    return bool(np.abs(H - H.T).max() <= tol)


@dataclass(frozen=True)
class ButsonMatrix:
    """Exact form of a Butson matrix: entries ``exp(2πi m_jk / q)``."""

    q: int
    exponents: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.exponents)
        if self.q < 2:
            raise ValueError("q must be at least 2")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("exponent array must be square")
        if not np.issubdtype(m.dtype, np.integer):
            raise TypeError("exponents must be integers")
        if m.min() < 0 or m.max() >= self.q:
            raise ValueError(f"exponents must lie in [0, {self.q})")

    @property
    def n(self) -> int:
        return self.exponents.shape[0]

    @property
    def minimal_q(self) -> int:
        g = self.q
        for v in np.unique(self.exponents):
            g = gcd(g, int(v))
        return self.q // g

    def realize(self) -> np.ndarray:
        return np.exp(2j * np.pi * self.exponents / self.q)


def to_butson(H, q_max: int = DEFAULT_Q_MAX, tol: float = 1e-8) -> ButsonMatrix | None:
    """Smallest ``q <= q_max`` whose ``q``-th roots of unity hold every entry.

    ``tol`` is measured in units of the lattice spacing ``2π/q``. Returns
    ``None`` when ``H`` is not unimodular or no ``q`` fits.
    """
    H = np.asarray(H)
    if np.abs(np.abs(H) - 1).max() > tol:
        return None
    turns = np.angle(H) / (2 * np.pi)
    for q in range(2, q_max + 1):
        x = turns * q
        r = np.rint(x)
        if np.abs(x - r).max() <= tol:
            return ButsonMatrix(q, (r.astype(np.int64) % q))
    return None


class Dephased(NamedTuple):
    H: np.ndarray
    left: np.ndarray
    right: np.ndarray


def dephase(H, return_factors: bool = False):
    """Normalise so the first row and column are all ones.

    The result is ``diag(left) @ H @ diag(right)`` with unimodular
    ``left`` and ``right``; pass ``return_factors=True`` to get them.
    """
    H = np.asarray(H, dtype=complex)
    left = 1 / H[:, 0]
    right = H[0, 0] / H[0, :]
    out = left[:, None] * H * right[None, :]
    if return_factors:
        return Dephased(out, left, right)
    return out


@dataclass(frozen=True)
class DefectReport:
    defect: int | None
    nullity: int
    trivial_dimension: int
    gap_ratio: float
    singular_values: np.ndarray

    @property
    def status(self) -> str:
        return "ok" if self.defect is not None else "indeterminate"


def defect_system(H) -> np.ndarray:
    """Real linear system whose kernel holds the first-order phase deformations.

    Unknowns are the real phase perturbations ``R`` (row-major, ``n*n``);
    for each row pair ``j < k`` the orthogonality of rows ``j`` and ``k`` is
    linearised to ``sum_m H_jm conj(H_km) (R_jm - R_km) = 0``.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    jj, kk = np.triu_indices(n, 1)
    C = H[jj] * H[kk].conj()
    rows = np.arange(len(jj))
    A = np.zeros((len(jj), n, n), dtype=complex)
    A[rows, jj, :] = C
    A[rows, kk, :] = -C
    A = A.reshape(len(jj), n * n)
    return np.vstack([A.real, A.imag])


def defect(H, min_gap: float = MIN_GAP_RATIO) -> DefectReport:
    """Defect = dimension of the deformation kernel minus the ``2n - 1``
    enphasing directions. Returns ``defect=None`` when the singular spectrum
    has no clear gap at the rank cut."""
    H = np.asarray(H)
    n = H.shape[0]
    report = numeric_rank(defect_system(H))
    trivial = 2 * n - 1
    gap = report.gap_ratio
    value = report.nullity - trivial if gap >= min_gap else None
    return DefectReport(value, report.nullity, trivial, gap, report.singular_values)


def random_monomial(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random monomial unitary as (permutation, unimodular phases)."""
    return rng.permutation(n), np.exp(2j * np.pi * rng.random(n))


def monomial_conjugate(H, rng) -> np.ndarray:
    """``M1 @ H @ M2`` for random monomial ``M1, M2``."""
    H = np.asarray(H)
    n = H.shape[0]
    p1, d1 = random_monomial(n, rng)
    p2, d2 = random_monomial(n, rng)
    return (d1[:, None] * H[p1][:, p2]) * d2[None, :]
