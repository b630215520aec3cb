"""Free-unitary sets on system (x) ancilla: membership, sampling and coordinates.

Every theory acts on the joint space S (x) E (system first).  A theory with
a trivial ancilla (d_E = 1) describes free unitaries on the system alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import stab
from .io import matrix_from_json, matrix_to_json
from .qlinalg import (DimensionError, ValidationError, as_unitary, haar_unitary,
                      hermitian_deviation, hermitian_expm, permutation_matrix,
                      trace_norm, unitary_log)
from .optim.sdp import hermitian_basis

FREE_TOL = 1e-8
BLOCK_TOL = 1e-9


class Theory:
    variant = ""

    @property
    def d_s(self) -> int:
        raise NotImplementedError

    @property
    def d_e(self) -> int:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return self.d_s * self.d_e

    def system(self) -> "Theory":
        """The same theory with the ancilla removed."""
        raise NotImplementedError

    def with_ancilla(self, **kw) -> "Theory":
        raise NotImplementedError


def _hermitian(h, what):
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        h = np.diag(h)
    if h.shape[0] != h.shape[1] or h.shape[0] < 1:
        raise ValidationError(f"{what} must be a nonempty square matrix, got shape {h.shape}")
    if hermitian_deviation(h) > 1e-10:
        raise ValidationError(f"{what} must be Hermitian")
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True, eq=False)
class EnergyConserving(Theory):
    """Unitaries commuting with H_tot = H_S (x) I + I (x) H_E."""

    h_s: np.ndarray
    h_e: np.ndarray = None

    variant = "EnergyConserving"

    def __post_init__(self):
        object.__setattr__(self, "h_s", _hermitian(self.h_s, "H_S"))
        h_e = np.zeros((1, 1)) if self.h_e is None else self.h_e
        object.__setattr__(self, "h_e", _hermitian(h_e, "H_E"))

    @property
    def d_s(self):
        return self.h_s.shape[0]

    @property
    def d_e(self):
        return self.h_e.shape[0]

    @cached_property
    def h_tot(self) -> np.ndarray:
        return np.kron(self.h_s, np.eye(self.d_e)) + np.kron(np.eye(self.d_s), self.h_e)

    @cached_property
    def blocks(self) -> list:
        """Eigenspaces of H_tot as (energy, isometry) pairs, grouped within BLOCK_TOL."""
        w, v = np.linalg.eigh(self.h_tot)
        out, start = [], 0
        for k in range(1, len(w) + 1):
            if k == len(w) or w[k] - w[k - 1] > BLOCK_TOL:
                out.append((float(np.mean(w[start:k])), v[:, start:k]))
                start = k
        return out

    def system(self):
        return EnergyConserving(self.h_s)

    def with_ancilla(self, h_e=None, **kw):
        return EnergyConserving(self.h_s, h_e)


@dataclass(frozen=True)
class Incoherent(Theory):
    """Permutations with phases in the product computational basis of S (x) E."""

    d: int
    d_anc: int = 1

    variant = "Incoherent"

    def __post_init__(self):
        if self.d < 1 or self.d_anc < 1:
            raise ValidationError("Incoherent dimensions must be positive")

    @property
    def d_s(self):
        return self.d

    @property
    def d_e(self):
        return self.d_anc

    def system(self):
        return Incoherent(self.d)

    def with_ancilla(self, d_e=1, **kw):
        return Incoherent(self.d, d_e)


@dataclass(frozen=True)
class LocalBipartite(Theory):
    """U_{S_A E_A} (x) U_{S_B E_B}; joint wires ordered S_A, S_B, E_A, E_B."""

    d_sa: int
    d_sb: int
    d_ea: int = 1
    d_eb: int = 1

    variant = "LocalBipartite"

    def __post_init__(self):
        if min(self.d_sa, self.d_sb, self.d_ea, self.d_eb) < 1:
            raise ValidationError("LocalBipartite dimensions must be positive")

    @property
    def d_s(self):
        return self.d_sa * self.d_sb

    @property
    def d_e(self):
        return self.d_ea * self.d_eb

    @property
    def d_a(self):
        return self.d_sa * self.d_ea

    @property
    def d_b(self):
        return self.d_sb * self.d_eb

    @cached_property
    def wire_permutation(self) -> np.ndarray:
        """P with P (x_SA x_SB x_EA x_EB) = x_SA x_EA x_SB x_EB."""
        dims = [self.d_sa, self.d_sb, self.d_ea, self.d_eb]
        return permutation_matrix([0, 2, 1, 3], dims)

    def system(self):
        return LocalBipartite(self.d_sa, self.d_sb)

    def with_ancilla(self, d_ea=1, d_eb=1, **kw):
        return LocalBipartite(self.d_sa, self.d_sb, d_ea, d_eb)


@dataclass(frozen=True)
class CliffordQubit(Theory):
    n_s: int
    n_e: int = 0

    variant = "CliffordQubit"

    def __post_init__(self):
        if self.n_s < 1 or self.n_e < 0 or self.n_s + self.n_e > 3:
            raise ValidationError("CliffordQubit needs n_S >= 1, n_E >= 0 and at most 3 qubits in total")

    @property
    def local_dim(self):
        return 2

    @property
    def n(self):
        return self.n_s + self.n_e

    @property
    def d_s(self):
        return 2 ** self.n_s

    @property
    def d_e(self):
        return 2 ** self.n_e

    def system(self):
        return CliffordQubit(self.n_s)

    def with_ancilla(self, n_e=0, **kw):
        return CliffordQubit(self.n_s, n_e)


@dataclass(frozen=True)
class CliffordQupit(Theory):
    d: int
    n_s: int
    n_e: int = 0

    variant = "CliffordQupit"

    def __post_init__(self):
        if self.d not in stab.ODD_PRIMES:
            raise ValidationError(f"CliffordQupit local dimension must be an odd prime in {stab.ODD_PRIMES}, got {self.d}")
        if self.n_s < 1 or self.n_e < 0 or self.d ** (self.n_s + self.n_e) > 49:
            raise ValidationError("CliffordQupit needs n_S >= 1, n_E >= 0 and total dimension <= 49")

    @property
    def local_dim(self):
        return self.d

    @property
    def n(self):
        return self.n_s + self.n_e

    @property
    def d_s(self):
        return self.d ** self.n_s

    @property
    def d_e(self):
        return self.d ** self.n_e

    def system(self):
        return CliffordQupit(self.d, self.n_s)

    def with_ancilla(self, n_e=0, **kw):
        return CliffordQupit(self.d, self.n_s, n_e)


CLIFFORD = (CliffordQubit, CliffordQupit)


# --- membership ------------------------------------------------------------

def _check_dim(u, t: Theory):
    u = np.asarray(u, dtype=complex)
    if u.shape != (t.dim, t.dim):
        raise DimensionError(f"unitary of shape {u.shape} does not act on the {t.dim}-dim joint space of {t.variant}")
    return u


def _permutation_phase_fit(u):
    rows, cols = linear_sum_assignment(-np.abs(u))
    fit = np.zeros_like(u)
    ph = u[rows, cols]
    fit[rows, cols] = ph / np.maximum(np.abs(ph), 1e-300)
    return fit, rows, cols


def _realign(u, da, db):
    r = u.reshape(da, db, da, db).transpose(0, 2, 1, 3).reshape(da * da, db * db)
    return r


def free_residual(u, t: Theory) -> float:
    u = _check_dim(u, t)
    if isinstance(t, EnergyConserving):
        return trace_norm(t.h_tot @ u - u @ t.h_tot)
    if isinstance(t, Incoherent):
        fit, _, _ = _permutation_phase_fit(u)
        return float(np.max(np.abs(u - fit)))
    if isinstance(t, LocalBipartite):
        p = t.wire_permutation
        s = np.linalg.svd(_realign(p @ u @ p.T, t.d_a, t.d_b), compute_uv=False)
        return float(np.sqrt(np.sum(s[1:] ** 2)))
    if isinstance(t, CLIFFORD):
        return stab.is_clifford(u, t.local_dim, t.n)
    raise ValidationError(f"unknown theory {t!r}")


def is_free(u, t: Theory, tol: float = FREE_TOL):
    """(free?, residual) for the variant's membership test."""
    r = free_residual(u, t)
    return r <= tol, r


# --- sampling --------------------------------------------------------------

def clifford_word_length(t) -> int:
    return 10 * t.n


def sample_free(t: Theory, seed) -> np.ndarray:
    """One free unitary.

    EnergyConserving: independent Haar unitary on every eigenspace of H_tot.
    Incoherent: uniform permutation with independent uniform phases.
    LocalBipartite: independent Haar unitaries on the two local factors.
    Clifford: uniformly random generator word of length 10 n.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(t, EnergyConserving):
        u = np.zeros((t.dim, t.dim), dtype=complex)
        for _, v in t.blocks:
            u += v @ haar_unitary(v.shape[1], rng) @ v.conj().T
        return u
    if isinstance(t, Incoherent):
        perm = rng.permutation(t.dim)
        phases = np.exp(2j * np.pi * rng.random(t.dim))
        u = np.zeros((t.dim, t.dim), dtype=complex)
        u[perm, np.arange(t.dim)] = phases
        return u
    if isinstance(t, LocalBipartite):
        a = haar_unitary(t.d_a, rng)
        b = haar_unitary(t.d_b, rng)
        p = t.wire_permutation
        return p.T @ np.kron(a, b) @ p
    if isinstance(t, CLIFFORD):
        gens = stab.generator_set(t.local_dim, t.n)
        word = rng.integers(0, len(gens), size=clifford_word_length(t))
        return stab.word_to_unitary(word, t.local_dim, t.n)
    raise ValidationError(f"unknown theory {t!r}")


# --- coordinates -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FreeUnitaryParam:
    """Coordinates of one free unitary.

    EnergyConserving: Hermitian-generator coordinates of each eigenspace block, concatenated.
    Incoherent: [Lehmer rank of the permutation, phase_0, ..., phase_{d-1}].
    LocalBipartite: Hermitian-generator coordinates of the (S_A E_A) factor, then of (S_B E_B).
    Clifford: [global phase, g_1 + 1, ..., g_L + 1] with generator indices g; entry 0 is the identity.
    The zero vector always decodes to the identity.
    """

    theory: Theory
    coordinates: np.ndarray

    def to_json(self) -> dict:
        return {"theory": theory_to_json(self.theory),
                "coordinates": [float(x) for x in self.coordinates]}


def _herm_coords(k: np.ndarray) -> np.ndarray:
    basis = hermitian_basis(k.shape[0])
    norms = np.einsum("kij,kji->k", basis, basis).real
    return np.einsum("kij,ji->k", basis, k).real / norms


def _herm_from(x: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(x, hermitian_basis(n), axes=1)


def _lehmer_rank(perm) -> int:
    perm = list(perm)
    rank = 0
    n = len(perm)
    for i in range(n):
        smaller = sum(1 for j in range(i + 1, n) if perm[j] < perm[i])
        rank += smaller * math.factorial(n - 1 - i)
    return rank


def _lehmer_unrank(rank: int, n: int) -> list:
    items = list(range(n))
    out = []
    for i in range(n):
        f = math.factorial(n - 1 - i)
        q, rank = divmod(rank, f)
        out.append(items.pop(q))
    return out


def coordinate_dim(t: Theory) -> int | None:
    """Length of the coordinate vector (None for variable-length Clifford words)."""
    if isinstance(t, EnergyConserving):
        return sum(v.shape[1] ** 2 for _, v in t.blocks)
    if isinstance(t, Incoherent):
        return 1 + t.dim
    if isinstance(t, LocalBipartite):
        return t.d_a ** 2 + t.d_b ** 2
    return None


def decode(p: FreeUnitaryParam) -> np.ndarray:
    t = p.theory
    x = np.asarray(p.coordinates, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValidationError("coordinates must be finite")
    n = coordinate_dim(t)
    if n is not None and len(x) != n:
        raise ValidationError(f"{t.variant} expects {n} coordinates, got {len(x)}")
    if isinstance(t, EnergyConserving):
        u = np.zeros((t.dim, t.dim), dtype=complex)
        pos = 0
        for _, v in t.blocks:
            m = v.shape[1]
            k = _herm_from(x[pos:pos + m * m], m)
            pos += m * m
            u += v @ hermitian_expm(k) @ v.conj().T
        return u
    if isinstance(t, Incoherent):
        r = x[0]
        if r != int(r) or not 0 <= r < math.factorial(t.dim):
            raise ValidationError(f"permutation index must be an integer in [0, {t.dim}!), got {r}")
        perm = _lehmer_unrank(int(r), t.dim)
        u = np.zeros((t.dim, t.dim), dtype=complex)
        u[perm, np.arange(t.dim)] = np.exp(1j * x[1:])
        return u
    if isinstance(t, LocalBipartite):
        na = t.d_a ** 2
        a = hermitian_expm(_herm_from(x[:na], t.d_a))
        b = hermitian_expm(_herm_from(x[na:], t.d_b))
        p_ = t.wire_permutation
        return p_.T @ np.kron(a, b) @ p_
    if isinstance(t, CLIFFORD):
        if len(x) == 0:
            return np.eye(t.dim, dtype=complex)
        gens = stab.generator_set(t.local_dim, t.n)
        w = x[1:]
        if np.any(w != np.round(w)) or np.any(w < 0) or np.any(w > len(gens)):
            raise ValidationError(f"Clifford word entries must be integers in [0, {len(gens)}]")
        word = [int(g) - 1 for g in w if g > 0]
        return np.exp(1j * x[0]) * stab.word_to_unitary(word, t.local_dim, t.n)
    raise ValidationError(f"unknown theory {t!r}")


def free_algebra_basis(t: Theory) -> np.ndarray:
    """Hermitian E_j (shape (m, dim, dim)) with V exp(i sum_j x_j E_j) free whenever V is free.

    Empty for the Clifford theories, whose free set is discrete.
    """
    if isinstance(t, EnergyConserving):
        parts = [np.einsum("ia,kab,jb->kij", v, hermitian_basis(v.shape[1]), v.conj()) for _, v in t.blocks]
        return np.concatenate(parts)
    if isinstance(t, Incoherent):
        return hermitian_basis(t.dim)[: t.dim]
    if isinstance(t, LocalBipartite):
        p_ = t.wire_permutation
        ea = [np.kron(e, np.eye(t.d_b)) for e in hermitian_basis(t.d_a)]
        # the identity direction is shared by both factors; keep it once
        eb = [np.kron(np.eye(t.d_a), e) for e in hermitian_basis(t.d_b)[1:]]
        return np.array([p_.T @ e @ p_ for e in ea + eb])
    if isinstance(t, CLIFFORD):
        return np.zeros((0, t.dim, t.dim), dtype=complex)
    raise ValidationError(f"unknown theory {t!r}")


def project(u, t: Theory) -> FreeUnitaryParam:
    """Coordinates of a free unitary ``u`` (raises if ``u`` is not free)."""
    u = as_unitary(_check_dim(u, t), tol=1e-8)
    ok, r = is_free(u, t)
    if not ok:
        raise ValidationError(f"unitary is not free in {t.variant} (residual {r:.3e})")
    if isinstance(t, EnergyConserving):
        parts = []
        for _, v in t.blocks:
            parts.append(_herm_coords(unitary_log(v.conj().T @ u @ v)))
        return FreeUnitaryParam(t, np.concatenate(parts))
    if isinstance(t, Incoherent):
        fit, rows, cols = _permutation_phase_fit(u)
        perm = np.empty(t.dim, dtype=int)
        perm[cols] = rows
        phases = np.angle(u[perm, np.arange(t.dim)])
        return FreeUnitaryParam(t, np.concatenate([[float(_lehmer_rank(perm))], phases]))
    if isinstance(t, LocalBipartite):
        p_ = t.wire_permutation
        w = p_ @ u @ p_.T
        uu, s, vh = np.linalg.svd(_realign(w, t.d_a, t.d_b))
        # realigned w = vec(a) vec(b)^T with unit singular vectors carrying opposite phases
        a = uu[:, 0].reshape(t.d_a, t.d_a) * np.sqrt(t.d_a)
        b = vh[0].reshape(t.d_b, t.d_b) * np.sqrt(t.d_b)
        return FreeUnitaryParam(t, np.concatenate([_herm_coords(unitary_log(a)),
                                                   _herm_coords(unitary_log(b))]))
    if isinstance(t, CLIFFORD):
        word, phase = stab.clifford_word(u, t.local_dim, t.n)
        return FreeUnitaryParam(t, np.array([phase] + [g + 1 for g in word], dtype=float))
    raise ValidationError(f"unknown theory {t!r}")


# --- JSON ------------------------------------------------------------------

def theory_to_json(t: Theory) -> dict:
    if isinstance(t, EnergyConserving):
        return {"variant": t.variant, "H_S": matrix_to_json(t.h_s), "H_E": matrix_to_json(t.h_e)}
    if isinstance(t, Incoherent):
        return {"variant": t.variant, "d_S": t.d, "d_E": t.d_anc}
    if isinstance(t, LocalBipartite):
        return {"variant": t.variant, "d_SA": t.d_sa, "d_SB": t.d_sb, "d_EA": t.d_ea, "d_EB": t.d_eb}
    if isinstance(t, CliffordQubit):
        return {"variant": t.variant, "n_S": t.n_s, "n_E": t.n_e}
    if isinstance(t, CliffordQupit):
        return {"variant": t.variant, "d": t.d, "n_S": t.n_s, "n_E": t.n_e}
    raise ValidationError(f"unknown theory {t!r}")


_FIELDS = {
    "EnergyConserving": ({"H_S"}, {"H_E"}),
    "Incoherent": ({"d_S"}, {"d_E"}),
    "LocalBipartite": ({"d_SA", "d_SB"}, {"d_EA", "d_EB"}),
    "CliffordQubit": ({"n_S"}, {"n_E"}),
    "CliffordQupit": ({"d", "n_S"}, {"n_E"}),
}


def theory_from_json(doc) -> Theory:
    if not isinstance(doc, dict) or "variant" not in doc:
        raise ValidationError("theory document must be an object with a 'variant' tag")
    v = doc["variant"]
    if v not in _FIELDS:
        raise ValidationError(f"unknown theory variant {v!r}; expected one of {sorted(_FIELDS)}")
    req, opt = _FIELDS[v]
    keys = set(doc) - {"variant"}
    if not req <= keys:
        raise ValidationError(f"{v} requires fields {sorted(req)}")
    if keys - req - opt:
        raise ValidationError(f"unknown keys for {v}: {sorted(keys - req - opt)}")

    def num(k, default=None):
        val = doc.get(k, default)
        if not isinstance(val, int) or isinstance(val, bool):
            raise ValidationError(f"{v}.{k} must be an integer")
        return val

    if v == "EnergyConserving":
        h_e = matrix_from_json(doc["H_E"]) if "H_E" in doc else None
        return EnergyConserving(matrix_from_json(doc["H_S"]), h_e)
    if v == "Incoherent":
        return Incoherent(num("d_S"), num("d_E", 1))
    if v == "LocalBipartite":
        return LocalBipartite(num("d_SA"), num("d_SB"), num("d_EA", 1), num("d_EB", 1))
    if v == "CliffordQubit":
        return CliffordQubit(num("n_S"), num("n_E", 0))
    return CliffordQupit(num("d"), num("n_S"), num("n_E", 0))
