"""Sinkhorn-type search for two-unitary matrices and the Hadamard-isation objective.

The fixed-point map realigns a matrix (reshuffle, partial transpose) and
projects it back onto the unitary group. The chopped variant additionally
zeroes entries whose modulus does not exceed ``epsilon``.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from .linalg_kernels import RankDeficientWarning, polar_project
from .tensor_core import (
    BipartiteShape,
    kron,
    partial_transpose,
    permutation_matrix,
    reshuffle,
    unitarity_residual,
)

ORDERS = ("RG", "GR")


@dataclass(frozen=True)
class IterConfig:
    eta: float = 0.05
    epsilon: float = 0.0
    epsilon_schedule: tuple[float, float, int] | None = None
    t_max: int = 2000
    tol: float = 1e-9
    realign_order: str = "RG"
    rng_seed: int = 0
    stall_step: float = 1e-14

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")
        if self.realign_order not in ORDERS:
            raise ValueError(f"realign_order must be one of {ORDERS}")
        if self.epsilon_schedule is not None:
            start, end, steps = self.epsilon_schedule
            if not (0 <= start <= 1 and 0 <= end <= 1) or steps < 1:
                raise ValueError("epsilon_schedule must be (start, end, steps) with values in [0, 1]")
            object.__setattr__(self, "epsilon_schedule", (float(start), float(end), int(steps)))

    def epsilon_at(self, t: int) -> float:
        """Chop threshold at step ``t``; a schedule ramps linearly then holds."""
        if self.epsilon_schedule is None:
            return self.epsilon
        start, end, steps = self.epsilon_schedule
        return start + (end - start) * min(t / steps, 1.0)


@dataclass
class IterTrace:
    residual_U: list[float] = field(default_factory=list)
    residual_R: list[float] = field(default_factory=list)
    residual_Gamma: list[float] = field(default_factory=list)
    zeroed: list[int] = field(default_factory=list)
    step: list[float] = field(default_factory=list)
    rank_warnings: int = 0
    seed_distance: float | None = None
    status: str = "running"

    @property
    def iterations(self) -> int:
        return len(self.step)

    @property
    def final_residual(self) -> float:
        if not self.step:
            return float("inf")
        return max(self.residual_U[-1], self.residual_R[-1], self.residual_Gamma[-1])

    def to_dict(self) -> dict:
        out = asdict(self)
        out["iterations"] = self.iterations
        return out


def _realign(X, shape, order):
    if order == "RG":
        return partial_transpose(reshuffle(X, shape), shape)
    if order == "GR":
        return reshuffle(partial_transpose(X, shape), shape)
    raise ValueError(f"unknown realignment order {order!r}")


def map_M(X, shape: BipartiteShape | None = None, order: str = "RG") -> np.ndarray:
    """Polar projection of the realigned matrix."""
    return polar_project(_realign(np.asarray(X), shape, order))


def chop(X, epsilon: float) -> np.ndarray:
    """Zero entries with ``|x| <= epsilon``; others are left untouched."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    X = np.asarray(X)
    return np.where(np.abs(X) <= epsilon, 0, X)


def map_M_eps(X, config: IterConfig, t: int = 0, shape: BipartiteShape | None = None):
    Y = map_M(X, shape, config.realign_order)
    eps = config.epsilon_at(t)
    return chop(Y, eps) if eps > 0 else Y


def seed(P, eta: float, rng) -> np.ndarray:
    """Perturbed permutation ``P @ expm(i eta G)`` with real Gaussian ``G``."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    P = np.asarray(P)
    G = rng.standard_normal(P.shape)
    return P @ expm(1j * eta * G)


def run(seed_matrix, shape: BipartiteShape | None, config: IterConfig):
    """Iterate the chopped map until two-unitary within ``config.tol``.

    Returns ``(X, trace)``. The trace status is ``converged``, ``stalled``
    (step below ``config.stall_step`` with the residual above tolerance) or
    ``max_iter``.
    """
    X = np.asarray(seed_matrix, dtype=complex)
    if shape is None:
        shape = BipartiteShape.from_order(X.shape[0])
    trace = IterTrace()
    for t in range(config.t_max):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RankDeficientWarning)
            Xn = map_M_eps(X, config, t, shape)
        trace.rank_warnings += sum(issubclass(w.category, RankDeficientWarning) for w in caught)
        trace.residual_U.append(unitarity_residual(Xn))
        trace.residual_R.append(unitarity_residual(reshuffle(Xn, shape)))
        trace.residual_Gamma.append(unitarity_residual(partial_transpose(Xn, shape)))
        trace.zeroed.append(int(np.count_nonzero(Xn == 0)))
        trace.step.append(float(np.linalg.norm(Xn - X)))
        X = Xn
        if trace.final_residual <= config.tol:
            trace.status = "converged"
            return X, trace
        if trace.step[-1] < config.stall_step:
            trace.status = "stalled"
            return X, trace
    trace.status = "max_iter"
    return X, trace


def run_from_permutation(perm, shape: BipartiteShape, config: IterConfig):
    """Seed near ``perm`` using ``config.rng_seed`` and run."""
    P = permutation_matrix(perm)
    X0 = seed(P, config.eta, config.rng_seed)
    X, trace = run(X0, shape, config)
    trace.seed_distance = float(np.linalg.norm(X0 - P))
    return X, trace


def run_many(perm, shape: BipartiteShape, config: IterConfig, rng_seeds, max_workers=None):
    """Independent runs, one per rng seed; results keyed by seed."""
    def one(s):
        cfg = IterConfig(**{**asdict(config), "rng_seed": int(s)})
        return int(s), run_from_permutation(perm, shape, cfg)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return dict(pool.map(one, rng_seeds))


# --- Hadamard-isation objective ---------------------------------------------

def z_objective(Y, V1, V2) -> float:
    """``sqrt(sum (|((V1 ⊗ V2) Y)_jk| - 1)^2)``."""
    M = kron(V1, V2) @ np.asarray(Y)
    return float(np.sqrt(((np.abs(M) - 1) ** 2).sum()))


def _z_and_grad(Y, V1, V2):
    d = V1.shape[0]
    M = kron(V1, V2) @ Y
    a = np.abs(M)
    z = float(np.sqrt(((a - 1) ** 2).sum()))
    GM = (a - 1) * M / np.maximum(a, 1e-300)
    GW = (GM @ Y.conj().T).reshape(d, d, d, d)
    g1 = np.einsum("abcd,bd->ac", GW, V2.conj())
    g2 = np.einsum("abcd,ac->bd", GW, V1.conj())

    def tangent(V, g):
        S = V.conj().T @ g
        return V @ (S - S.conj().T) / 2

    return z, tangent(V1, g1), tangent(V2, g2)


@dataclass(frozen=True)
class ZConfig:
    restarts: int = 32
    budget: int = 3000
    kappa: float = 0.5
    learning_rate: float = 0.1
    target: float = 1e-8
    realign: bool = False
    rng_seed: int = 0


@dataclass
class ZResult:
    V1: np.ndarray
    V2: np.ndarray
    value: float
    variant: str
    restart_values: list[float]
    restart_variants: list[str]


def _descend(Y, V1, V2, cfg: ZConfig, rng):
    d = V1.shape[0]
    z, g1, g2 = _z_and_grad(Y, V1, V2)
    lr = cfg.learning_rate
    for _ in range(cfg.budget):
        xi1 = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / (2 * d)
        xi2 = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / (2 * d)
        W1 = polar_project(V1 - lr * (g1 + cfg.kappa * z * xi1))
        W2 = polar_project(V2 - lr * (g2 + cfg.kappa * z * xi2))
        zn, h1, h2 = _z_and_grad(Y, W1, W2)
        if zn < z:
            V1, V2, z, g1, g2 = W1, W2, zn, h1, h2
            lr *= 1.2
        else:
            lr *= 0.5
        if z < cfg.target or lr < 1e-12:
            break
    return V1, V2, z


def minimize_Z(Y, config: ZConfig | None = None) -> ZResult:
    """Search local unitaries ``V1, V2`` making ``(V1 ⊗ V2) Y`` unimodular.

    Each restart draws Haar-random ``V1, V2`` and repeatedly proposes
    ``V_j -> Π(V_j - lr (grad_j + kappa * Z * xi_j))`` with Gaussian ``xi_j``,
    accepting only improvements; the step grows on success and halves on
    failure. With ``realign=True`` restarts cycle through ``Y``, ``Y^R`` and
    ``Y^Γ``. Stops early once a restart reaches ``config.target``.
    """
    cfg = config or ZConfig()
    Y = np.asarray(Y, dtype=complex)
    shape = BipartiteShape.from_order(Y.shape[0])
    variants = {"Y": Y}
    if cfg.realign:
        variants["R"] = reshuffle(Y, shape)
        variants["Gamma"] = partial_transpose(Y, shape)
    names = list(variants)
    rng = np.random.default_rng(cfg.rng_seed)
    best = None
    values, used = [], []
    for r in range(cfg.restarts):
        name = names[r % len(names)]
        V1 = unitary_group.rvs(shape.d, random_state=rng)
        V2 = unitary_group.rvs(shape.d, random_state=rng)
        V1, V2, z = _descend(variants[name], V1, V2, cfg, rng)
        values.append(z)
        used.append(name)
        if best is None or z < best[2]:
            best = (V1, V2, z, name)
        if z < cfg.target:
            break
    return ZResult(best[0], best[1], best[2], best[3], values, used)
