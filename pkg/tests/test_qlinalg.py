import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rulab.qlinalg import (DimensionError, ValidationError, as_density, bures_distance, eigh, haar_unitary,
                           ket_to_dm, matrix_log, matrix_sqrt, partial_trace, permute_subsystems,
                           random_density, relative_entropy, tensor, trace_distance, trace_norm,
                           uhlmann_fidelity, von_neumann_entropy, binary_entropy)

X = np.array([[0, 1], [1, 0]], dtype=complex)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)
PLUS = ket_to_dm(np.ones(2) / np.sqrt(2))


def _fid_oracle(r, s):
    # sqrt via eigendecomposition, then nuclear norm through singular values
    w, v = np.linalg.eigh(r)
    sr = v @ np.diag(np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    w, v = np.linalg.eigh(s)
    ss = v @ np.diag(np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    return float(np.sum(np.linalg.svd(sr @ ss, compute_uv=False)))


def test_tensor_basics():
    assert np.allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))
    m = tensor(P0, P1)
    want = np.zeros((4, 4))
    want[1, 1] = 1
    assert np.allclose(m, want)
    ket = np.zeros(4)
    ket[0] = 1
    assert np.allclose(tensor(X, X) @ ket, np.eye(4)[3])


def test_partial_trace_examples():
    rng = np.random.default_rng(3)
    r, s = random_density(2, rng), random_density(3, rng)
    assert np.allclose(partial_trace(np.kron(r, s), 0, [2, 3]), r, atol=1e-12)
    assert np.allclose(partial_trace(np.kron(r, s), 1, [2, 3]), s, atol=1e-12)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(partial_trace(ket_to_dm(bell), 0, [2, 2]), np.eye(2) / 2)
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = h + h.conj().T
    assert abs(np.trace(partial_trace(h, 1, [2, 3])) - np.trace(h)) < 1e-12


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), 0, [2, 3])


def test_permute_subsystems_swaps_factors():
    rng = np.random.default_rng(0)
    a, b = random_density(2, rng), random_density(3, rng)
    assert np.allclose(permute_subsystems(np.kron(a, b), [1, 0], [2, 3]), np.kron(b, a))


def test_fidelity_examples():
    assert uhlmann_fidelity(PLUS, PLUS) == pytest.approx(1.0, abs=1e-12)
    assert uhlmann_fidelity(P0, P1) == pytest.approx(0.0, abs=1e-12)
    assert uhlmann_fidelity(P0, np.eye(2) / 2) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_bures_examples():
    assert bures_distance(PLUS, PLUS) == pytest.approx(0.0, abs=1e-7)
    assert bures_distance(P0, P1) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_trace_norm_examples():
    assert trace_norm(np.zeros((3, 3))) == 0.0
    assert trace_norm(P0 - P1) == pytest.approx(2.0)
    p, q = np.array([0.5, 0.3, 0.2]), np.array([0.1, 0.6, 0.3])
    assert trace_norm(np.diag(p) - np.diag(q)) == pytest.approx(np.sum(np.abs(p - q)))


def test_entropy_examples():
    assert von_neumann_entropy(P0) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2.0)
    assert von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(binary_entropy(0.25))
    assert binary_entropy(0.25) == pytest.approx(-0.25 * math.log2(0.25) - 0.75 * math.log2(0.75))


def test_relative_entropy_examples():
    rng = np.random.default_rng(2)
    r = random_density(3, rng)
    assert relative_entropy(r, r) == pytest.approx(0.0, abs=1e-10)
    assert relative_entropy(P0, P1) == math.inf
    assert relative_entropy(PLUS, np.eye(2) / 2) == pytest.approx(1.0, abs=1e-10)


def test_relative_entropy_joint_convexity():
    rng = np.random.default_rng(11)
    for _ in range(20):
        r1, r2, s1, s2 = (random_density(3, rng) for _ in range(4))
        lam = rng.random()
        lhs = relative_entropy(lam * r1 + (1 - lam) * r2, lam * s1 + (1 - lam) * s2)
        rhs = lam * relative_entropy(r1, s1) + (1 - lam) * relative_entropy(r2, s2)
        assert lhs <= rhs + 1e-8


def test_matrix_functions():
    assert np.allclose(matrix_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(matrix_sqrt(PLUS), PLUS, atol=1e-7)
    w, _ = eigh(np.diag([2.0, 1.0]))
    assert list(w) == [1.0, 2.0]
    assert np.allclose(matrix_log(np.diag([1.0, 4.0])), np.diag([0.0, 2.0]))  # base 2


def test_as_density_rejects_bad_trace():
    with pytest.raises(ValidationError, match="trace"):
        as_density(np.diag([0.5, 0.4]))
    with pytest.raises(ValidationError):
        as_density(np.array([[1.0, 0.3], [0.0, 0.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 4))
def test_fidelity_matches_oracle_and_sandwich(seed, d):
    rng = np.random.default_rng(seed)
    r, s = random_density(d, rng), random_density(d, rng)
    f = uhlmann_fidelity(r, s)
    assert f == pytest.approx(_fid_oracle(r, s), abs=1e-8)
    t = 0.5 * trace_distance(r, s)
    L = bures_distance(r, s)
    assert 1 - f <= t + 1e-9
    assert t <= math.sqrt(max(0.0, 1 - f * f)) + 1e-9
    assert 0.5 * L * L <= t + 1e-9 and t <= L + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    r, s = random_density(3, rng), random_density(3, rng)
    u = haar_unitary(3, rng)
    assert np.allclose(u.conj().T @ u, np.eye(3), atol=1e-12)
    r2, s2 = u @ r @ u.conj().T, u @ s @ u.conj().T
    assert uhlmann_fidelity(r2, s2) == pytest.approx(uhlmann_fidelity(r, s), abs=1e-9)
    assert von_neumann_entropy(r2) == pytest.approx(von_neumann_entropy(r), abs=1e-9)
