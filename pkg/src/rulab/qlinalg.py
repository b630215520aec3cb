"""Dense complex linear algebra and quantum-information primitives.

Matrices are plain ``numpy`` complex arrays. The ``as_*`` helpers validate an
array against the invariants of a density matrix, pure state or unitary and
return a fresh complex copy; every other function is a pure function of its
inputs.

All logarithms are base 2.
"""
from __future__ import annotations

import math

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
UNITARY_TOL = 1e-10
RANK_CUTOFF = 1e-12


class RulabError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(RulabError, ValueError):
    """An input violated a stated invariant."""


class DimensionError(ValidationError):
    """Operands have inconsistent dimensions."""


def _as_complex(m) -> np.ndarray:
    a = np.array(m, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix entries must be finite (no NaN/Inf)")
    return a


def _square(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {m.shape}")
    return m


def hermitian_deviation(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def as_density(m, tol: float = TRACE_TOL) -> np.ndarray:
    """Validate ``m`` as a density matrix and return a complex copy."""
    rho = _square(_as_complex(m), "density matrix")
    dev = hermitian_deviation(rho)
    if dev > HERMITIAN_TOL:
        raise ValidationError(f"density matrix not Hermitian (deviation {dev:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"density matrix trace must be 1, got {tr:.12g}")
    lam_min = np.linalg.eigvalsh(rho).min()
    if lam_min < -PSD_TOL:
        raise ValidationError(f"density matrix not positive semidefinite (eigenvalue {lam_min:.3g})")
    return 0.5 * (rho + rho.conj().T)


def as_pure(v, tol: float = 1e-10) -> np.ndarray:
    """Validate ``v`` as a normalized state vector."""
    psi = _as_complex(v)
    if psi.ndim != 1:
        raise DimensionError(f"pure state must be a vector, got shape {psi.shape}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > tol:
        raise ValidationError(f"pure state norm must be 1, got {nrm:.12g}")
    return psi


def as_unitary(m, tol: float = UNITARY_TOL) -> np.ndarray:
    u = _square(_as_complex(m), "unitary")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if dev > tol:
        raise ValidationError(f"operator not unitary (max |U^dag U - I| = {dev:.3g})")
    return u


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def to_density(state) -> np.ndarray:
    """Accept either a state vector or a density matrix; return a density matrix."""
    a = np.asarray(state, dtype=complex)
    return ket_to_dm(a) if a.ndim == 1 else a


def pure_vector(state, tol: float = 1e-9) -> np.ndarray:
    """Return a state vector for a pure input (vector or rank-one density matrix).

    Raises ValidationError for a mixed state.
    """
    a = np.asarray(state, dtype=complex)
    if a.ndim == 1:
        return a / np.linalg.norm(a)
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    if abs(w[-1] - 1.0) > tol or np.any(np.abs(w[:-1]) > tol):
        raise ValidationError(f"state is not pure (largest eigenvalue {w[-1]:.12g})")
    psi = v[:, -1]
    k = np.flatnonzero(np.abs(psi) > 1e-12)[0]
    return psi * (abs(psi[k]) / psi[k])


# --- products and partial traces -------------------------------------------

def tensor(*ops) -> np.ndarray:
    """Kronecker product; index of (i_a, i_b) is i_a * d_b + i_b."""
    out = np.array([[1.0 + 0j]]) if ops and np.asarray(ops[0]).ndim == 2 else np.array([1.0 + 0j])
    for op in ops:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(m, keep, dims) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` lists the subsystem dimensions in tensor order; ``keep`` is an
    index or a sequence of indices. The kept factors retain their order.
    """
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in dims]
    keep = [keep] if np.isscalar(keep) else sorted(int(k) for k in keep)
    n = len(dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionError(f"matrix of shape {m.shape} does not match dims {dims}")
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"subsystem index out of range: {keep}")
    t = m.reshape(dims + dims)
    trace_out = [i for i in range(n) if i not in keep]
    # contract each traced factor's row index with its column index
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] for i in range(n)]
    for i in trace_out:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(dk, dk)


def permute_subsystems(m, perm, dims) -> np.ndarray:
    """Reorder tensor factors: factor ``perm[k]`` of the input becomes factor ``k``.

    Works for vectors and square matrices.
    """
    m = np.asarray(m, dtype=complex)
    dims = list(dims)
    n = len(dims)
    new_dims = [dims[p] for p in perm]
    if m.ndim == 1:
        return m.reshape(dims).transpose(perm).reshape(-1)
    t = m.reshape(dims + dims)
    t = t.transpose(list(perm) + [n + p for p in perm])
    d = int(np.prod(new_dims))
    return t.reshape(d, d)


def permutation_matrix(perm, dims) -> np.ndarray:
    """Unitary P with P (x_0 ⊗ ... ) P^dag = reordered operator, matching ``permute_subsystems``."""
    d = int(np.prod(dims))
    cols = np.arange(d)
    idx = np.array(np.unravel_index(cols, dims))  # (n, d)
    new_dims = [dims[p] for p in perm]
    new_idx = np.ravel_multi_index(idx[list(perm)], new_dims)
    P = np.zeros((d, d), dtype=complex)
    P[new_idx, cols] = 1.0
    return P


# --- spectral helpers -------------------------------------------------------

def eigh(h, tol: float = HERMITIAN_TOL):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    h = _square(_as_complex(h))
    dev = hermitian_deviation(h)
    if dev > max(tol, tol * np.max(np.abs(h), initial=0.0)):
        raise ValidationError(f"matrix not Hermitian (deviation {dev:.3g})")
    return np.linalg.eigh(0.5 * (h + h.conj().T))


def _clamped_spectrum(h, what: str):
    w, v = eigh(h)
    if w.size and w[0] < -PSD_TOL:
        raise ValidationError(f"{what} requires a positive semidefinite input (eigenvalue {w[0]:.3g})")
    return np.clip(w, 0.0, None), v


def matrix_sqrt(h) -> np.ndarray:
    w, v = _clamped_spectrum(h, "matrix_sqrt")
    return (v * np.sqrt(w)) @ v.conj().T


def matrix_log(h) -> np.ndarray:
    """Base-2 logarithm of a positive definite matrix."""
    w, v = eigh(h)
    if w[0] <= 0:
        raise ValidationError("matrix_log requires a positive definite input")
    return (v * np.log2(w)) @ v.conj().T


def trace_norm(m) -> float:
    m = np.asarray(m, dtype=complex)
    if m.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def operator_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=complex), 2))


# --- fidelities and distances -----------------------------------------------

def uhlmann_fidelity(rho, sigma) -> float:
    """F(rho, sigma) = ||sqrt(rho) sqrt(sigma)||_1, clipped into [0, 1]."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DimensionError(f"fidelity of states with shapes {rho.shape} and {sigma.shape}")
    f = trace_norm(matrix_sqrt(rho) @ matrix_sqrt(sigma))
    return float(min(max(f, 0.0), 1.0))


def bures_distance(rho, sigma) -> float:
    return math.sqrt(max(2.0 * (1.0 - uhlmann_fidelity(rho, sigma)), 0.0))


def trace_distance(rho, sigma) -> float:
    """Full trace-norm distance ||rho - sigma||_1 (no factor 1/2)."""
    return trace_norm(np.asarray(rho) - np.asarray(sigma))


# --- entropies --------------------------------------------------------------

def _entropy_of_probs(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > RANK_CUTOFF]
    return float(max(-np.sum(p * np.log2(p)), 0.0))


def von_neumann_entropy(rho) -> float:
    w, _ = _clamped_spectrum(rho, "von_neumann_entropy")
    return _entropy_of_probs(w)


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def relative_entropy(rho, sigma) -> float:
    """Quantum relative entropy S(rho || sigma) in bits; ``inf`` on support violation."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DimensionError("relative entropy of states with different dimensions")
    wr, vr = _clamped_spectrum(rho, "relative_entropy")
    ws, vs = _clamped_spectrum(sigma, "relative_entropy")
    ker_s = vs[:, ws <= RANK_CUTOFF]
    supp_r = vr[:, wr > RANK_CUTOFF]
    if ker_s.size and supp_r.size:
        overlap = np.abs(ker_s.conj().T @ (supp_r * np.sqrt(wr[wr > RANK_CUTOFF])))
        if np.sum(overlap ** 2) > 1e-10:
            return math.inf
    keep = ws > RANK_CUTOFF
    log_s = (vs[:, keep] * np.log2(ws[keep])) @ vs[:, keep].conj().T
    val = -_entropy_of_probs(wr) - np.trace(rho @ log_s).real
    return float(max(val, 0.0))


# --- random objects (seeded) ------------------------------------------------

def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced (Hilbert-Schmidt for full rank) measure."""
    r = d if rank is None else rank
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def hermitian_expm(h, t: float = 1.0) -> np.ndarray:
    """exp(i t h) for Hermitian h."""
    w, v = np.linalg.eigh(0.5 * (h + np.conj(h).T))
    return (v * np.exp(1j * t * w)) @ v.conj().T


def unitary_log(u) -> np.ndarray:
    """Hermitian K with exp(iK) = u, principal branch."""
    import scipy.linalg

    t, z = scipy.linalg.schur(np.asarray(u, dtype=complex), output="complex")
    ang = np.angle(np.diag(t))
    k = (z * ang) @ z.conj().T
    return 0.5 * (k + k.conj().T)
