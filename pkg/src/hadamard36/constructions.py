"""Generators for the order-36 two-unitary Hadamard matrices and their relatives.

Phase parameters are measured in sixths of a turn: a value ``v`` contributes
the phase ``exp(iπ v / 3)``. Index sets in the data files are 1-based, as
printed in the tables they were transcribed from.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .tensor_core import (
    BipartiteShape,
    anti_diagonal_A,
    controlled_shift_P,
    fourier_unimodular,
    fourier_unitary,
    is_two_unitary,
    kron,
    partial_transpose,
    permutation_matrix,
    reshuffle,
    shift_X,
    unitarity_residual,
)

N36 = 36
SHAPE6 = BipartiteShape(6)
PARAM_NAMES = tuple("abcdefghijklmnopqrs")


class DataIntegrityError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def _manifest() -> dict:
    return json.loads(resources.files(__package__).joinpath("data/MANIFEST.json").read_text())


@lru_cache(maxsize=None)
def read_data(name: str) -> str:
    """Text of a packaged data file, checked against the manifest digest."""
    raw = resources.files(__package__).joinpath("data", name).read_bytes()
    expected = _manifest()["sha256"].get(name)
    if expected is None:
        raise DataIntegrityError(f"{name} is not listed in the data manifest")
    if hashlib.sha256(raw).hexdigest() != expected:
        raise DataIntegrityError(f"checksum mismatch for data file {name}")
    return raw.decode()


def _json(name):
    return json.loads(read_data(name))


def base_matrix_B() -> np.ndarray:
    """36x36 integer phase array (sixths of a turn) of the base matrix."""
    B = np.array([[int(v) for v in line.split()]
                  for line in read_data("base_B.txt").splitlines() if line.strip()])
    assert B.shape == (N36, N36)
    return B


def _stencil(name: str, symbols: str) -> dict[str, np.ndarray]:
    grid = [line.split() for line in read_data(name).splitlines() if line.strip()]
    grid = np.array(grid)
    return {s: (grid == s).astype(float) for s in symbols}


def as_params(alpha) -> np.ndarray:
    """Validate a 19-vector of affine parameters; ``None`` means all zeros."""
    if alpha is None:
        return np.zeros(len(PARAM_NAMES))
    if isinstance(alpha, dict):
        unknown = set(alpha) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameter names {sorted(unknown)}")
        return np.array([float(alpha.get(p, 0.0)) for p in PARAM_NAMES])
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (len(PARAM_NAMES),):
        raise ValueError(f"expected {len(PARAM_NAMES)} affine parameters, got shape {alpha.shape}")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("affine parameters must be finite")
    return alpha


def _row_mask(rows) -> np.ndarray:
    M = np.zeros((N36, N36))
    for r in rows:
        M[r - 1, :] += 1
    return M


@lru_cache(maxsize=None)
def _masks(row_sets: str) -> tuple[np.ndarray, ...]:
    table = _json("affine_masks.json")
    M = {p: np.zeros((N36, N36)) for p in PARAM_NAMES}

    C = {}
    C.update(_stencil(table["stencils"]["C_jk"], "jk"))
    C.update(_stencil(table["stencils"]["C_lm"], "lm"))
    for p, sign in table["stencils"]["sign"].items():
        M[p] += sign * np.tile(C[p], table["stencils"]["tiling"])

    for p, cols in table["column_masks"].items():
        for c in cols:
            M[p][:, c - 1] += 1
    for p, blk in table["block_masks"].items():
        cols = [t - 1 for t in range(1, N36 + 1) if t % 3 == blk["column_residue_mod3"]]
        for r in blk["rows"]:
            M[p][r - 1, cols] += 1
    key = "row_masks" if row_sets == "repaired" else "row_masks_as_printed"
    for p, rows in table[key].items():
        M[p] += _row_mask(rows)

    for m in M.values():
        m.setflags(write=False)
    return tuple(M[p] for p in PARAM_NAMES)


def parameter_masks(row_sets: str = "repaired") -> dict[str, np.ndarray]:
    """Coefficient matrix of each affine parameter in ``A(alpha)``.

    ``row_sets="printed"`` uses the row sets of parameters n..s exactly as
    transcribed; the default uses the repaired sets (see
    :func:`repair_row_masks`).
    """
    if row_sets not in ("repaired", "printed"):
        raise ValueError("row_sets must be 'repaired' or 'printed'")
    return dict(zip(PARAM_NAMES, _masks(row_sets)))


def affine_A(alpha=None, row_sets: str = "repaired") -> np.ndarray:
    """Additive parameter matrix ``A(alpha) = sum_p alpha_p * mask_p``."""
    alpha = as_params(alpha)
    masks = _masks(row_sets)
    return np.tensordot(alpha, np.array(masks), axes=1)


def hadamard36_phases(alpha=None, row_sets: str = "repaired") -> np.ndarray:
    """Phases ``B + A(alpha)`` in sixths of a turn."""
    return base_matrix_B() + affine_A(alpha, row_sets)


def hadamard36(alpha=None, row_sets: str = "repaired") -> np.ndarray:
    """Unimodular ``exp(iπ/3 B) ∘ exp(iπ/3 A(alpha))``; divide by 6 for the
    two-unitary normalisation."""
    return np.exp(1j * np.pi * hadamard36_phases(alpha, row_sets) / 3)


def sigma_params() -> np.ndarray:
    """Parameters that make :func:`hadamard36` symmetric."""
    return np.array(_json("special_params.json")["sigma"], dtype=float)


def delta_params(gamma: float) -> np.ndarray:
    """Parameters giving a constant diagonal phase ``π gamma / 3``."""
    table = _json("special_params.json")["delta"]
    return np.array(table["constant"], dtype=float) + gamma * np.array(table["gamma_coefficient"])


# --- repair of the transcribed row masks ------------------------------------

@dataclass
class RepairResult:
    row_sets: dict[str, list[int]]
    edits: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    candidates: dict[str, list[tuple[int, ...]]] = field(default_factory=dict)


def _row_phase_residual(H0: np.ndarray, rows, values=(0.37, 1.91)) -> float:
    worst = 0.0
    idx = np.asarray(rows) - 1
    for v in values:
        H = H0.copy()
        H[idx] *= np.exp(1j * np.pi * v / 3)
        for Y in (reshuffle(H, SHAPE6), partial_transpose(H, SHAPE6)):
            worst = max(worst, unitarity_residual(Y))
    return worst


def repair_row_masks(max_edits: int = 2, tol: float = 1e-10) -> RepairResult:
    """Search for minimal edits of the printed row sets of parameters n..s.

    A candidate set passes when a phase on those rows keeps ``H(0)/6``
    two-unitary (checked at two parameter values). For each set the
    search tries 0, 1, ... ``max_edits`` replaced entries and stops at
    the first edit distance with any passing candidate. Raises when a set
    has no passing candidate within ``max_edits``.
    """
    printed = _json("affine_masks.json")["row_masks_as_printed"]
    H0 = hadamard36() / 6
    result = RepairResult({})
    for p, rows in printed.items():
        hits = []
        for k in range(max_edits + 1):
            outside = [r for r in range(1, N36 + 1) if r not in rows]
            for pos in itertools.combinations(range(len(rows)), k):
                keep = [r for i, r in enumerate(rows) if i not in pos]
                for new in itertools.combinations(outside, k):
                    cand = tuple(sorted(keep + list(new)))
                    if _row_phase_residual(H0, cand) <= tol:
                        hits.append(cand)
            if hits:
                break
        if not hits:
            raise RuntimeError(f"no repair of row set {p} within {max_edits} edits")
        hits = sorted(set(hits))
        result.candidates[p] = hits
        chosen = list(hits[0])
        result.row_sets[p] = chosen
        removed = sorted(set(rows) - set(chosen))
        added = sorted(set(chosen) - set(rows))
        if removed:
            result.edits[p] = list(zip(removed, added))
    return result


# --- biunimodular construction ------------------------------------------------

@dataclass(frozen=True)
class BiunimodularVector:
    numerators: tuple[int, ...]
    denominator: int

    @property
    def turns(self) -> np.ndarray:
        return np.array(self.numerators) / self.denominator

    def realize(self) -> np.ndarray:
        return np.exp(2j * np.pi * self.turns)


def lambda_vectors() -> tuple[BiunimodularVector, BiunimodularVector, BiunimodularVector]:
    table = _json("biunimodular.json")
    return tuple(BiunimodularVector(tuple(table[k]["numerators"]), table[k]["denominator"])
                 for k in ("lambda_1", "lambda_2", "lambda_3"))


def check_biunimodular(v, tol: float = 1e-10) -> tuple[bool, float]:
    """``v`` and ``(F6 ⊗ F6) v / 6`` both unimodular (unimodular Fourier)."""
    v = np.asarray(v)
    if v.shape != (N36,):
        raise ValueError(f"expected a vector of length {N36}")
    F = fourier_unimodular(6)
    w = kron(F, F) @ v / 6
    r = max(float(np.abs(np.abs(v) - 1).max()), float(np.abs(np.abs(w) - 1).max()))
    return r <= tol, r


def build_K() -> np.ndarray:
    F, I = fourier_unitary(6), np.eye(6)
    return kron(F, I) @ controlled_shift_P(6) @ kron(F, I)


def build_L() -> np.ndarray:
    F, I = fourier_unitary(6), np.eye(6)
    return kron(F, I) @ controlled_shift_P(6) @ kron(F.conj().T, I)


def build_U(j: int) -> np.ndarray:
    """Unitary ``K diag(exp(2πi Λ_j)) L`` for ``j`` in 1..3."""
    if j not in (1, 2, 3):
        raise ValueError("j must be 1, 2 or 3")
    lam = lambda_vectors()[j - 1]
    return build_K() @ np.diag(lam.realize()) @ build_L()


def u3_mask(a: float = 1.0) -> np.ndarray:
    table = _json("biunimodular.json")["u3_family_mask"]
    R = np.zeros((N36, N36))
    for r in table["rows"]:
        R[r - 1, [c - 1 for c in table["columns"]]] = a
    return R


def u3_family(a: float) -> np.ndarray:
    """``U3 ∘ exp(2πi R(a))``; ``a`` is in turns, so ``a = 1`` gives back U3."""
    return build_U(3) * np.exp(2j * np.pi * u3_mask(a))


def xa_identity() -> np.ndarray:
    """``X A ⊗ I``, the permutation relating K and L."""
    return kron(shift_X(6) @ anti_diagonal_A(6), np.eye(6))


# --- d = 3 reference ----------------------------------------------------------

def find_p9_oracle(d: int = 3, find_all: bool = False, tol: float = 1e-10):
    """Permutations ``P`` making ``(F_d ⊗ F_d) P / d`` two-unitary.

    Depth-first over column images, ordered so that once every column
    with a given second index ``m`` is placed the corresponding block of
    the reshuffled Gram matrix can be checked; partial failures prune the
    branch. Returns the lexicographically smallest hit, or every hit
    (sorted) with ``find_all=True``.
    """
    shape = BipartiteShape(d)
    n = shape.N
    F = fourier_unimodular(d)
    FF = kron(F, F) / d
    # columns (k, m) sharing m complete one column block of the reshuffle
    order = [k * d + m for m in range(d) for k in range(d)]
    hits = []

    def reshuffle_block_ok(perm, m_done):
        U = np.zeros((n, n), dtype=complex)
        for col, img in perm.items():
            U[:, col] = FF[:, img]
        R = reshuffle(U, shape)
        cols = [l * d + m for m in range(m_done + 1) for l in range(d)]
        G = R[:, cols].conj().T @ R[:, cols]
        return np.abs(G - np.eye(len(cols))).max() <= 1e-9

    def dfs(pos, perm, used):
        if pos == n:
            p = tuple(perm[i] for i in range(n))
            U = FF @ permutation_matrix(p)
            if is_two_unitary(U, shape, tol=tol).passed:
                hits.append(p)
            return
        col = order[pos]
        for img in range(n):
            if img in used:
                continue
            perm[col] = img
            used.add(img)
            if (pos + 1) % d != 0 or reshuffle_block_ok(perm, (pos + 1) // d - 1):
                dfs(pos + 1, perm, used)
            used.discard(img)
            del perm[col]

    dfs(0, {}, set())
    if not hits:
        raise RuntimeError(f"no permutation makes (F{d} x F{d})P two-unitary")
    hits.sort()
    return hits if find_all else hits[0]


@lru_cache(maxsize=None)
def _p9() -> tuple[int, ...]:
    return find_p9_oracle(3)


def p9_permutation() -> tuple[int, ...]:
    """Cached result of :func:`find_p9_oracle` for ``d = 3``."""
    return _p9()


def ame43_reference() -> np.ndarray:
    """Unimodular ``(F3 ⊗ F3) P9``; two-unitary at scale 3."""
    F = fourier_unimodular(3)
    return kron(F, F) @ permutation_matrix(p9_permutation())


def seed_permutation_6() -> tuple[int, ...]:
    """Default d=6 seed permutation shipped as an external input file."""
    return tuple(_json("seed_permutation_6.json")["permutation"])
