"""Stabilizer formalism: qubit stabilizer states, Clifford generators, Weyl
operators and discrete Wigner functions for odd-prime qudits.

Conventions (odd prime d): omega = exp(2*pi*i/d), X|j> = |j+1>, Z|j> = omega^j |j>,
D_(a,b) = omega^(2^{-1} a b) X^a Z^b (the same operator as
omega^(-2^{-1} a b) Z^a X^b), A_0 = (1/d) sum_u D_u and
A_u = D_u A_0 D_u^dag.  For qubits the Pauli labelled (a, b) is
i^(a b) X^a Z^b, so (1, 1) is Y.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qlinalg import DimensionError, ValidationError, tensor

ODD_PRIMES = (3, 5, 7)


def _omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def _check_qubits(n: int) -> None:
    if not 1 <= n <= 3:
        raise ValidationError(f"qubit count must be in 1..3, got {n}")


def _check_odd_prime(d: int) -> None:
    if d not in ODD_PRIMES:
        raise ValidationError(f"d must be an odd prime in {ODD_PRIMES}, got {d}")


# --- single-site operators ---------------------------------------------------

def shift(d: int) -> np.ndarray:
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def clock(d: int) -> np.ndarray:
    return np.diag(_omega(d) ** np.arange(d))


def weyl(a: int, b: int, d: int) -> np.ndarray:
    """Single-site Weyl (qudit) or Hermitian Pauli (qubit) operator with label (a, b)."""
    a, b = a % d, b % d
    op = np.linalg.matrix_power(shift(d), a) @ np.linalg.matrix_power(clock(d), b)
    if d == 2:
        return (1j ** (a * b)) * op
    inv2 = pow(2, -1, d)
    return _omega(d) ** ((inv2 * a * b) % d) * op


def local_op(op: np.ndarray, site: int, n: int, d: int) -> np.ndarray:
    ops = [np.eye(d, dtype=complex)] * n
    ops[site] = op
    return tensor(*ops)


def weyl_n(a, b, d: int) -> np.ndarray:
    return tensor(*[weyl(x, z, d) for x, z in zip(a, b)])


@lru_cache(maxsize=None)
def _weyl_table(d: int, n: int):
    """All d^(2n) labels with their operators stacked as an array."""
    labels = list(itertools.product(range(d), repeat=2 * n))
    ops = np.stack([weyl_n(lab[:n], lab[n:], d) for lab in labels])
    return labels, ops


def weyl_decompose(c: np.ndarray, d: int, n: int):
    """Best single Weyl/Pauli match of ``c``: (label a, label b, coefficient, residual)."""
    labels, ops = _weyl_table(d, n)
    dim = d ** n
    coef = np.einsum("kji,ji->k", ops.conj(), c) / dim  # Tr(D_u^dag C) / dim
    k = int(np.argmax(np.abs(coef)))
    resid = float(np.max(np.abs(c - coef[k] * ops[k])))
    lab = labels[k]
    return np.array(lab[:n]), np.array(lab[n:]), complex(coef[k]), resid


# --- generators ----------------------------------------------------------------

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PHASE = np.diag([1, 1j]).astype(complex)


def cnot(control: int, target: int, n: int) -> np.ndarray:
    return sum_gate(control, target, n, 2)


def sum_gate(control: int, target: int, n: int, d: int) -> np.ndarray:
    """|.., a_c, .., a_t, ..> -> |.., a_c, .., a_t + a_c, ..>."""
    dim = d ** n
    idx = np.array(np.unravel_index(np.arange(dim), [d] * n))
    out = idx.copy()
    out[target] = (idx[target] + idx[control]) % d
    rows = np.ravel_multi_index(out, [d] * n)
    g = np.zeros((dim, dim), dtype=complex)
    g[rows, np.arange(dim)] = 1.0
    return g


def fourier(d: int) -> np.ndarray:
    j = np.arange(d)
    return _omega(d) ** np.outer(j, j) / np.sqrt(d)


def qudit_phase(d: int) -> np.ndarray:
    j = np.arange(d)
    return np.diag(_omega(d) ** ((j * (j - 1) // 2) % d))


@dataclass(frozen=True)
class Generator:
    name: str
    sites: tuple
    matrix: np.ndarray
    order: int


@lru_cache(maxsize=None)
def _generators(d: int, n: int) -> tuple:
    if d == 2:
        local = [("H", HADAMARD, 2), ("S", PHASE, 4)]
        two = ("CNOT", 2)
    else:
        local = [("F", fourier(d), 4), ("P", qudit_phase(d), d)]
        two = ("SUM", d)
    gens = []
    for name, m, order in local:
        for k in range(n):
            gens.append(Generator(name, (k,), local_op(m, k, n, d), order))
    for c, t in itertools.permutations(range(n), 2):
        gens.append(Generator(two[0], (c, t), sum_gate(c, t, n, d), two[1]))
    return tuple(gens)


def clifford_generators(n: int) -> list:
    """H and S on each qubit, then CNOT on each ordered pair (control, target)."""
    _check_qubits(n)
    return [g.matrix for g in _generators(2, n)]


def generator_set(d: int, n: int) -> tuple:
    """Named generators for qubits (d = 2) or odd-prime qudits."""
    if d != 2:
        _check_odd_prime(d)
    return _generators(d, n)


def word_to_unitary(word, d: int, n: int) -> np.ndarray:
    """Product of generators; ``word[0]`` is applied first."""
    gens = _generators(d, n)
    u = np.eye(d ** n, dtype=complex)
    for w in word:
        u = gens[int(w)].matrix @ u
    return u


def is_clifford(u: np.ndarray, d: int, n: int) -> float:
    """Max deviation of U P U^dag from a unit-modulus multiple of a Weyl operator,
    over the generating labels X_k, Z_k."""
    if u.shape != (d ** n, d ** n):
        raise DimensionError(f"operator of shape {u.shape} is not on {n} sites of dimension {d}")
    worst = 0.0
    for k in range(n):
        for op in (shift(d), clock(d)):
            p = local_op(op, k, n, d)
            _, _, c, resid = weyl_decompose(u @ p @ u.conj().T, d, n)
            worst = max(worst, resid, abs(abs(c) - 1.0))
    return worst


# --- stabilizer states --------------------------------------------------------

def canonical_phase(psi: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is positive real."""
    k = np.flatnonzero(np.abs(psi) > tol)[0]
    return psi * (abs(psi[k]) / psi[k])


def _state_key(psi: np.ndarray) -> bytes:
    v = np.round(canonical_phase(psi), 8) + 0.0  # +0.0 folds -0.0
    return v.tobytes()


@dataclass(frozen=True)
class StabilizerStateSet:
    n: int
    states: np.ndarray  # (count, 2**n), canonical phase

    def __len__(self) -> int:
        return len(self.states)

    def index_of(self, psi: np.ndarray, tol: float = 1e-7) -> int:
        """Index of ``psi`` (up to global phase) or -1."""
        overlaps = np.abs(self.states.conj() @ psi)
        k = int(np.argmax(overlaps))
        return k if abs(overlaps[k] - 1.0) < tol else -1

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "count": len(self.states),
            "states": [[[float(z.real), float(z.imag)] for z in s] for s in self.states],
        }
        return json.dumps(payload, sort_keys=True)


def expected_stabilizer_count(n: int) -> int:
    count = 2 ** n
    for k in range(1, n + 1):
        count *= 2 ** k + 1
    return count


@lru_cache(maxsize=None)
def enumerate_stabilizer_states(n: int) -> StabilizerStateSet:
    """Breadth-first Clifford orbit of |0...0>, deduplicated up to global phase."""
    _check_qubits(n)
    gens = clifford_generators(n)
    start = np.zeros(2 ** n, dtype=complex)
    start[0] = 1.0
    seen = {_state_key(start)}
    order = [start]
    queue = deque([start])
    while queue:
        psi = queue.popleft()
        for g in gens:
            phi = canonical_phase(g @ psi)
            key = _state_key(phi)
            if key not in seen:
                seen.add(key)
                order.append(phi)
                queue.append(phi)
    states = np.array(order)
    states.setflags(write=False)
    return StabilizerStateSet(n, states)


def stabilizer_group_of(psi: np.ndarray, n: int) -> list:
    """Hermitian Pauli operators (with sign) having ``psi`` as +1 eigenvector."""
    labels, ops = _weyl_table(2, n)
    out = []
    for lab, op in zip(labels, ops):
        for sign in (1, -1):
            if np.allclose(sign * op @ psi, psi, atol=1e-9):
                out.append(sign * op)
    return out


# --- phase point operators and Wigner functions -------------------------------

@dataclass(frozen=True)
class PhasePointOperators:
    d: int
    operators: np.ndarray  # (d*d, d, d), index a*d + b for point (a, b)

    def point(self, a: int, b: int) -> np.ndarray:
        return self.operators[(a % self.d) * self.d + (b % self.d)]


@lru_cache(maxsize=None)
def phase_point_operators(d: int) -> PhasePointOperators:
    _check_odd_prime(d)
    labels = [(a, b) for a in range(d) for b in range(d)]
    disp = [weyl(a, b, d) for a, b in labels]
    a0 = sum(disp) / d
    ops = np.stack([D @ a0 @ D.conj().T for D in disp])
    ops.setflags(write=False)
    return PhasePointOperators(d, ops)


def discrete_wigner(rho, ops: PhasePointOperators) -> np.ndarray:
    """W(u) = Tr[A_u rho] / d^n for a state on n qudits.

    The output is indexed by the joint point (u_1, ..., u_n), row-major, each
    u_k itself indexed a*d + b.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    d = ops.d
    dim = rho.shape[0]
    n = int(round(np.log(dim) / np.log(d)))
    if d ** n != dim:
        raise DimensionError(f"state of dimension {dim} is not a register of {d}-level systems")
    t = rho.reshape([d] * (2 * n))
    a = ops.operators  # (d^2, d, d)
    # contract one site at a time: W = sum rho_{i..,j..} prod_k A_{u_k}[j_k, i_k]
    for k in range(n):
        # current tensor axes: [u_0..u_{k-1}, i_k..i_{n-1}, j_k..j_{n-1}]
        rest = n - k
        t = np.moveaxis(t, [k, k + rest], [-2, -1])
        t = np.tensordot(t, a, axes=([t.ndim - 2, t.ndim - 1], [2, 1]))
        t = np.moveaxis(t, -1, k)
    return (t.reshape(-1).real / dim)


def wigner_negativity_norm(rho, ops: PhasePointOperators) -> float:
    return float(np.sum(np.abs(discrete_wigner(rho, ops))))


# --- Clifford synthesis -------------------------------------------------------

@lru_cache(maxsize=None)
def _local_table(d: int):
    """Single-site Clifford group mod phase: list of (matrix, word, label action)."""
    if d == 2:
        gens = [("H", HADAMARD), ("S", PHASE)]
    else:
        gens = [("F", fourier(d)), ("P", qudit_phase(d))]
    start = np.eye(d, dtype=complex)

    def key(m):
        flat = m.reshape(-1)
        return _state_key(flat)

    seen = {key(start): 0}
    table = [(start, ())]
    queue = deque([0])
    while queue:
        i = queue.popleft()
        m, word = table[i]
        for gi, (_, g) in enumerate(gens):
            m2 = g @ m
            k = key(m2)
            if k not in seen:
                seen[k] = len(table)
                table.append((m2, word + (gi,)))
                queue.append(len(table) - 1)
    out = []
    for m, word in table:
        cols = []
        for op in (shift(d), clock(d)):
            a, b, _, _ = weyl_decompose(m @ op @ m.conj().T, d, 1)
            cols.append((int(a[0]), int(b[0])))
        action = np.array(cols).T % d  # columns: images of (1,0) and (0,1)
        out.append((m, word, action))
    return out


def _local_word(d: int, site: int, n: int, src, dst, fix=None):
    """Generator indices of a single-site Clifford sending label src -> dst
    (and fix -> fix when given)."""
    gens = _generators(d, n)
    names = ["H", "S"] if d == 2 else ["F", "P"]
    lookup = {(g.name, g.sites): i for i, g in enumerate(gens)}
    best = None
    for _, word, action in _local_table(d):
        if tuple(action @ np.array(src) % d) != tuple(np.array(dst) % d):
            continue
        if fix is not None and tuple(action @ np.array(fix) % d) != tuple(np.array(fix) % d):
            continue
        if best is None or len(word) < len(best):
            best = word
    if best is None:
        raise ValidationError(f"no local Clifford maps {src} to {dst}")
    return [lookup[(names[w], (site,))] for w in best]


def _weyl_word(d: int, site: int, n: int, a: int, b: int):
    """Generator indices realizing the single-site Weyl operator (a, b) up to phase."""
    gens = _generators(d, n)
    names = ["H", "S"] if d == 2 else ["F", "P"]
    lookup = {(g.name, g.sites): i for i, g in enumerate(gens)}
    target = weyl(a, b, d)
    for m, word, _ in _local_table(d):
        ov = abs(np.trace(target.conj().T @ m)) / d
        if abs(ov - 1.0) < 1e-9:
            return [lookup[(names[w], (site,))] for w in word]
    raise ValidationError("Weyl operator not found in local Clifford table")


def clifford_word(u: np.ndarray, d: int, n: int, tol: float = 1e-8):
    """Synthesize ``u`` from the generators of ``generator_set(d, n)``.

    Returns ``(word, phase)`` with ``u = exp(i phase) * word_to_unitary(word)``.
    Greedy site-by-site reduction of the images of X_j and Z_j.
    """
    gens = _generators(d, n)
    lookup = {(g.name, g.sites): i for i, g in enumerate(gens)}
    two = "CNOT" if d == 2 else "SUM"
    if is_clifford(u, d, n) > tol:
        raise ValidationError("operator is not a Clifford unitary")
    v = np.array(u, dtype=complex)
    applied: list[int] = []

    def apply(idx_list):
        nonlocal v
        for i in idx_list:
            v = gens[i].matrix @ v
            applied.append(i)

    def image(op, j):
        p = local_op(op, j, n, d)
        a, b, _, _ = weyl_decompose(v @ p @ v.conj().T, d, n)
        return a % d, b % d

    for j in range(n):
        a, b = image(shift(d), j)
        for k in range(j, n):
            if a[k] or b[k]:
                apply(_local_word(d, k, n, (a[k], b[k]), (1, 0)))
        a, b = image(shift(d), j)
        if a[j] == 0:
            k = next(k for k in range(j + 1, n) if a[k])
            apply([lookup[(two, (k, j))]])
            a, b = image(shift(d), j)
        inv = pow(int(a[j]), -1, d)
        for k in range(j + 1, n):
            if a[k]:
                m = (-int(a[k]) * inv) % d
                apply([lookup[(two, (j, k))]] * m)
        a, b = image(shift(d), j)
        if a[j] != 1:
            apply(_local_word(d, j, n, (a[j], 0), (1, 0)))

        a, b = image(clock(d), j)
        for k in range(j + 1, n):
            if a[k] or b[k]:
                apply(_local_word(d, k, n, (a[k], b[k]), (0, 1)))
        a, b = image(clock(d), j)
        inv = pow(int(b[j]), -1, d)
        for k in range(j + 1, n):
            if b[k]:
                m = (int(b[k]) * inv) % d
                apply([lookup[(two, (k, j))]] * m)
        a, b = image(clock(d), j)
        if (a[j], b[j]) != (0, 1):
            apply(_local_word(d, j, n, (a[j], b[j]), (0, 1), fix=(1, 0)))

    # v is now proportional to a Weyl operator; strip it site by site
    a, b, _, _ = weyl_decompose(v, d, n)
    for k in range(n):
        if a[k] or b[k]:
            w = _weyl_word(d, k, n, int(a[k]), int(b[k]))
            # the local word realizes D_(a,b) up to phase; its inverse strips it
            inv_word = []
            for i in reversed(w):
                inv_word += [i] * (gens[i].order - 1)
            apply(inv_word)
    phase_c = np.trace(v) / d ** n
    if abs(abs(phase_c) - 1.0) > 1e-6:
        raise ValidationError("Clifford synthesis failed to reduce to the identity")
    # v = g_m ... g_1 u = c I  =>  u = c g_1^-1 ... g_m^-1
    word = []
    for i in reversed(applied):
        word += [i] * (gens[i].order - 1)
    return word, float(np.angle(phase_c))
