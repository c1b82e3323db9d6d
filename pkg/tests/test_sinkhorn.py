import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from hadamard36 import constructions as C
from hadamard36.sinkhorn import (
    IterConfig,
    ZConfig,
    chop,
    map_M,
    map_M_eps,
    minimize_Z,
    run,
    run_from_permutation,
    run_many,
    seed,
    z_objective,
)
from hadamard36.tensor_core import (
    BipartiteShape,
    fourier_unimodular,
    is_two_unitary,
    is_unitary,
    kron,
    partial_transpose,
    permutation_matrix,
    reshuffle,
)

D3 = BipartiteShape(3)


def test_config_validation():
    for bad in (dict(eta=0), dict(eta=1), dict(epsilon=1.5), dict(t_max=0),
                dict(realign_order="XY"), dict(epsilon_schedule=(0, 2, 10))):
        with pytest.raises(ValueError):
            IterConfig(**bad)


def test_epsilon_ramp():
    cfg = IterConfig(epsilon_schedule=(0.0, 0.5, 10))
    assert [cfg.epsilon_at(t) for t in (0, 5, 10, 100)] == [0.0, 0.25, 0.5, 0.5]
    assert IterConfig(epsilon=0.2).epsilon_at(7) == 0.2


def test_map_keeps_two_unitary_on_the_manifold(H0):
    U = H0 / 6
    V = map_M(U)
    assert is_unitary(V, tol=1e-10).passed
    assert is_two_unitary(V, tol=1e-10).passed
    np.testing.assert_allclose(V, partial_transpose(reshuffle(U)), atol=1e-10)


def test_map_of_identity_is_unitary():
    V = map_M(np.eye(36))
    assert is_unitary(V, tol=1e-11).passed
    # R then Γ sends the identity to the swap
    swap = np.eye(36)[[k * 6 + j for j in range(6) for k in range(6)]]
    np.testing.assert_array_equal(V, swap)


def test_orders_differ(rng):
    X = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    a, b = map_M(X, order="RG"), map_M(X, order="GR")
    assert np.abs(a - b).max() > 1e-3


@settings(max_examples=30, deadline=None)
@given(seed_=st.integers(0, 2**32 - 1), eps=st.floats(0, 1))
def test_chop_idempotent(seed_, eps):
    rng = np.random.default_rng(seed_)
    X = (rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))) / 3
    Y = chop(X, eps)
    np.testing.assert_array_equal(chop(Y, eps), Y)
    keep = np.abs(X) > eps
    np.testing.assert_array_equal(Y[keep], X[keep])
    assert not np.any(Y[~keep])


def test_chop_examples(H0):
    X = np.array([[0, 0.5], [1e-300, 1]])
    np.testing.assert_array_equal(chop(X, 0) == 0, [[True, False], [False, False]])
    U = unitary_group.rvs(6, random_state=1)
    assert not np.any(chop(U, 1))
    np.testing.assert_array_equal(chop(H0 / 6, 0.1), H0 / 6)
    with pytest.raises(ValueError):
        chop(X, -0.1)


def test_map_eps_zero_is_map(rng):
    X = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    np.testing.assert_array_equal(map_M_eps(X, IterConfig()), map_M(X))


def test_seed_properties():
    P = permutation_matrix(C.p9_permutation())
    a, b = seed(P, 0.05, 3), seed(P, 0.05, 3)
    np.testing.assert_array_equal(a, b)
    for s in range(20):
        eta = 0.01
        X = seed(P, eta, s)
        assert np.linalg.norm(X - P) <= 2 * eta * 9
        assert np.linalg.matrix_rank(X) == 9
        assert np.linalg.matrix_rank(partial_transpose(reshuffle(X))) == 9


def test_run_d3_converges_and_is_reproducible():
    cfg = IterConfig(eta=0.05, epsilon=0, t_max=2000, tol=1e-9, rng_seed=0)
    X, trace = run_from_permutation(C.p9_permutation(), D3, cfg)
    assert trace.status == "converged"
    assert trace.final_residual <= 1e-9
    assert is_two_unitary(X, tol=1e-9).passed
    assert len(trace.residual_U) == len(trace.residual_R) == len(trace.residual_Gamma) == trace.iterations
    X2, trace2 = run_from_permutation(C.p9_permutation(), D3, cfg)
    np.testing.assert_array_equal(X, X2)
    assert trace.to_dict() == trace2.to_dict()
    json.dumps(trace.to_dict())


def test_ramp_keeps_zero_pattern_on_fixed_point():
    cfg = IterConfig(epsilon_schedule=(0.0, 0.5, 300), rng_seed=0)
    X, trace = run_from_permutation(C.p9_permutation(), D3, cfg)
    assert trace.status == "converged"
    assert trace.zeroed[-1] > 0
    Y = map_M_eps(X, cfg, t=10**6)
    # one more step moves entries by the fixed realignment and zeroes nothing else
    np.testing.assert_array_equal(Y == 0, partial_transpose(reshuffle(X)) == 0)
    assert is_two_unitary(Y, tol=1e-9).passed


def test_run_d2_does_not_converge():
    cfg = IterConfig(t_max=300, rng_seed=0)
    _, trace = run_from_permutation(range(4), BipartiteShape(2), cfg)
    assert trace.status != "converged"
    assert trace.final_residual > 1e-6


def test_stall_detection():
    # any step counts as a stall when the threshold is infinite
    cfg = IterConfig(t_max=50, stall_step=np.inf)
    _, trace = run(np.eye(4), BipartiteShape(2), cfg)
    assert trace.status == "stalled"
    assert trace.iterations == 1


def test_run_many_matches_single_runs():
    cfg = IterConfig(t_max=200)
    out = run_many(C.p9_permutation(), D3, cfg, [0, 1, 2], max_workers=3)
    assert sorted(out) == [0, 1, 2]
    X1, _ = run_from_permutation(C.p9_permutation(), D3, IterConfig(t_max=200, rng_seed=1))
    np.testing.assert_array_equal(out[1][0], X1)


def test_z_trivial_values(H0):
    I6 = np.eye(6)
    assert z_objective(H0, I6, I6) == pytest.approx(0, abs=1e-13)
    F = fourier_unimodular(6)
    assert z_objective(kron(F, F), I6, I6) == pytest.approx(0, abs=1e-12)


def test_z_covariance(H0, rng):
    Y = H0 / 3
    V1, V2 = (unitary_group.rvs(6, random_state=rng) for _ in range(2))
    W1, W2 = (unitary_group.rvs(6, random_state=rng) for _ in range(2))
    lhs = z_objective(kron(W1, W2) @ Y, V1 @ W1.conj().T, V2 @ W2.conj().T)
    assert lhs == pytest.approx(z_objective(Y, V1, V2), rel=1e-12)


def test_minimize_z_planted(H0):
    rng = np.random.default_rng(42)
    V1, V2 = (unitary_group.rvs(6, random_state=rng) for _ in range(2))
    Y = kron(V1.conj().T, V2.conj().T) @ H0
    assert z_objective(Y, np.eye(6), np.eye(6)) > 1
    res = minimize_Z(Y, ZConfig(rng_seed=0))
    assert res.value < 1e-6
    assert z_objective(Y, res.V1, res.V2) == pytest.approx(res.value, abs=1e-12)


def test_minimize_z_realign_variants(H0):
    res = minimize_Z(H0 / 6, ZConfig(restarts=3, budget=5, realign=True, target=0))
    assert res.restart_variants == ["Y", "R", "Gamma"]
    assert len(res.restart_values) == 3
