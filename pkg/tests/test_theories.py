import numpy as np
import pytest

from rulab import theories as T
from rulab.qlinalg import ValidationError, hermitian_expm, permutation_matrix

X = np.array([[0, 1], [1, 0]], dtype=complex)
H01 = np.diag([0.0, 1.0])

ALL = [
    T.EnergyConserving(H01, np.diag([0.0, 1.0, 2.0])),
    T.EnergyConserving(np.diag([0.0, 1.0, 3.0])),
    T.Incoherent(2, 3),
    T.LocalBipartite(2, 2, 1, 2),
    T.CliffordQubit(1, 1),
    T.CliffordQupit(3, 1, 1),
]


@pytest.mark.parametrize("t", ALL, ids=lambda t: t.variant)
def test_global_phase_is_free(t):
    ok, r = T.is_free(np.exp(0.7j) * np.eye(t.dim), t)
    assert ok and r < 1e-12


def test_x_not_energy_conserving():
    ok, r = T.is_free(X, T.EnergyConserving(H01))
    assert not ok
    assert r == pytest.approx(2.0)


def test_swap_between_matched_levels_is_free():
    t = T.EnergyConserving(H01, H01)
    swap = np.eye(4)[[0, 2, 1, 3]]
    assert T.is_free(swap, t)[0]


def test_nondegenerate_energy_samples_are_diagonal():
    t = T.EnergyConserving(np.diag([0.0, 1.0]), np.diag([0.0, 10.0]))
    u = T.sample_free(t, 4)
    assert np.allclose(u, np.diag(np.diag(u)))


@pytest.mark.parametrize("t", ALL, ids=lambda t: t.variant)
def test_samples_are_free_and_seeded(t):
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert T.free_residual(T.sample_free(t, rng), t) < T.FREE_TOL
    assert np.array_equal(T.sample_free(t, 17), T.sample_free(t, 17))


@pytest.mark.parametrize("t", ALL, ids=lambda t: t.variant)
def test_zero_coordinates_decode_to_identity(t):
    n = T.coordinate_dim(t)
    coords = np.zeros(n if n is not None else 1)
    assert np.allclose(T.decode(T.FreeUnitaryParam(t, coords)), np.eye(t.dim))


@pytest.mark.parametrize("t", ALL, ids=lambda t: t.variant)
def test_project_decode_round_trip(t):
    rng = np.random.default_rng(1)
    for _ in range(10):
        u = T.sample_free(t, rng)
        back = T.decode(T.project(u, t))
        assert np.max(np.abs(back - u)) < 1e-8


def test_local_decode_matches_wire_permutation():
    t = T.LocalBipartite(2, 2, 1, 2)
    rng = np.random.default_rng(2)
    u = T.decode(T.FreeUnitaryParam(t, rng.normal(size=T.coordinate_dim(t))))
    # wires S_A S_B E_A E_B  ->  (S_A E_A)(S_B E_B); the result must be a single tensor product
    p = permutation_matrix([0, 2, 1, 3], [2, 2, 1, 2])
    w = (p @ u @ p.T).reshape(t.d_a, t.d_b, t.d_a, t.d_b)
    r = w.transpose(0, 2, 1, 3).reshape(t.d_a ** 2, t.d_b ** 2)
    sv = np.linalg.svd(r, compute_uv=False)
    assert sv[1] < 1e-10
    a = np.linalg.svd(r)[0][:, 0].reshape(t.d_a, t.d_a) * np.sqrt(t.d_a)
    assert np.allclose(a @ a.conj().T, np.eye(t.d_a), atol=1e-10)


@pytest.mark.parametrize("t", ALL, ids=lambda t: t.variant)
def test_free_algebra_exponential_stays_free(t):
    basis = T.free_algebra_basis(t)
    rng = np.random.default_rng(3)
    v = T.sample_free(t, rng)
    if len(basis) == 0:
        assert isinstance(t, T.CLIFFORD)
        return
    for e in basis:
        assert np.allclose(e, e.conj().T)
    g = np.einsum("k,kij->ij", rng.normal(size=len(basis)), basis)
    assert T.free_residual(v @ hermitian_expm(g), t) < 1e-8


@pytest.mark.parametrize("t", ALL, ids=lambda t: t.variant)
def test_json_round_trip(t):
    t2 = T.theory_from_json(T.theory_to_json(t))
    assert T.theory_to_json(t2) == T.theory_to_json(t)
    assert t2.dim == t.dim


def test_json_rejects_unknown_keys():
    doc = T.theory_to_json(ALL[2])
    doc["extra"] = 1
    with pytest.raises(ValidationError):
        T.theory_from_json(doc)


def test_bad_constructors():
    with pytest.raises(ValidationError):
        T.CliffordQupit(4, 1)
    with pytest.raises(ValidationError):
        T.CliffordQubit(2, 2)
    with pytest.raises(ValidationError):
        T.EnergyConserving(np.array([[0, 1], [0, 0]]))
