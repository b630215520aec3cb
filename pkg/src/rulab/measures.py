"""Resource measures with property flags and continuity profiles.

A measure object knows how to evaluate itself, which free-unitary theory
it is invariant under, how it composes on tensor products, and which
(f, g, h) continuity profiles it satisfies for the Bures distance and for
the full trace norm ``||rho - sigma||_1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import stab, theories
from .io import matrix_from_json, matrix_to_json
from .qlinalg import (ValidationError, binary_entropy, bures_distance,
                      ket_to_dm, pure_vector, random_density, random_pure,
                      to_density, trace_distance, von_neumann_entropy)

BURES = "Bures"
TRACE = "TraceNorm"
FLAVORS = (BURES, TRACE)
LN2 = math.log(2.0)


# --- continuity profiles ---------------------------------------------------

@dataclass(frozen=True)
class Linear:
    a: float = 1.0

    def __call__(self, x):
        return self.a * x


@dataclass(frozen=True)
class Sqrt:
    a: float = 1.0

    def __call__(self, x):
        return self.a * math.sqrt(max(x, 0.0))


@dataclass(frozen=True)
class Identity:
    def __call__(self, y):
        return float(y)


@dataclass(frozen=True)
class Log2:
    c: float = 1.0

    def __call__(self, y):
        return self.c * math.log2(y)


@dataclass(frozen=True)
class Constant:
    c: float

    def __call__(self, y):
        return self.c


@dataclass(frozen=True)
class OffsetPower:
    """y -> scale * (y - 1)**power (the uniform ladder spectrum has spread y - 1)."""

    power: float = 1.0
    scale: float = 1.0

    def __call__(self, y):
        return self.scale * (y - 1.0) ** self.power


@dataclass(frozen=True)
class Log2PlusConstant:
    c: float

    def __call__(self, y):
        return math.log2(y) + self.c


@dataclass(frozen=True)
class Zero:
    def __call__(self, x):
        return 0.0


@dataclass(frozen=True)
class NegLinear:
    def __call__(self, x):
        return -x


@dataclass(frozen=True)
class EpsBinary:
    """x -> (1 + e) b(e / (1 + e)) with e = scale * x."""

    scale: float = 1.0

    def __call__(self, x):
        e = self.scale * x
        return (1.0 + e) * binary_entropy(e / (1.0 + e))


def _fn_json(fn) -> dict:
    out = {"family": type(fn).__name__}
    out.update({k: float(v) for k, v in fn.__dict__.items()})
    return out


@dataclass(frozen=True)
class NotApplicable:
    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class ContinuityProfile:
    """|R(rho) - R(sigma)| <= f(D) g(d) + h(D), valid when D * d < ``domain`` (if set)."""

    flavor: str
    f: object
    g: object
    h: object = Zero()
    domain: float | None = None

    def valid(self, dist: float, d: int) -> bool:
        return self.domain is None or dist * d < self.domain

    def bound(self, dist: float, d: int):
        if dist < 0:
            raise ValidationError(f"distance must be nonnegative, got {dist}")
        if not self.valid(dist, d):
            return NotApplicable(f"distance {dist:.3e} outside validity domain D*d < {self.domain} (d={d})")
        return self.f(dist) * self.g(d) + self.h(dist)

    def to_json(self) -> dict:
        return {"flavor": self.flavor, "f": _fn_json(self.f), "g": _fn_json(self.g),
                "h": _fn_json(self.h), "domain": self.domain}


# --- measures --------------------------------------------------------------

PROPS = ("P1", "P2", "P3", "P3'")


def _is_ladder(h: np.ndarray) -> bool:
    d = h.shape[0]
    return np.allclose(h, np.diag(np.arange(d)), atol=1e-12)


def _spread(h: np.ndarray) -> float:
    w = np.linalg.eigvalsh(h)
    return float(w[-1] - w[0])


def _kron_sum(hams) -> np.ndarray:
    total = np.zeros((1, 1), dtype=complex)
    for h in hams:
        total = np.kron(total, np.eye(h.shape[0])) + np.kron(np.eye(total.shape[0]), h)
    return total


class Measure:
    kind = ""
    flags: dict = {}
    pure_only = False
    smooth = True           # False: values only accurate to a solver tolerance; searches go derivative-free

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def value(self, state) -> float:
        raise NotImplementedError

    def tensor(self, other: "Measure") -> "Measure":
        raise NotImplementedError

    def theory(self) -> theories.Theory:
        raise NotImplementedError

    def profiles(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def _check_dim(self, d):
        if d != self.dim:
            raise ValidationError(f"{self.kind} expects dimension {self.dim}, got {d}")


class _HamiltonianMeasure(Measure):
    """Shared plumbing for measures built from one Hamiltonian per subsystem."""

    def __init__(self, hams):
        if isinstance(hams, np.ndarray) and hams.ndim == 2:
            hams = [hams]
        hs = []
        for h in hams:
            h = np.asarray(h, dtype=complex)
            if h.ndim == 1:
                h = np.diag(h)
            if h.ndim != 2 or h.shape[0] != h.shape[1]:
                raise ValidationError("Hamiltonian must be a square matrix")
            if np.max(np.abs(h - h.conj().T)) > 1e-10:
                raise ValidationError("Hamiltonian must be Hermitian")
            hs.append(0.5 * (h + h.conj().T))
        if not hs:
            raise ValidationError("at least one Hamiltonian is required")
        self.hams = tuple(hs)

    @cached_property
    def h(self) -> np.ndarray:
        return _kron_sum(self.hams)

    @property
    def dim(self):
        return self.h.shape[0]

    @property
    def spread(self) -> float:
        return sum(_spread(h) for h in self.hams)

    @property
    def ladder(self) -> bool:
        return all(_is_ladder(h) for h in self.hams)

    def theory(self):
        return theories.EnergyConserving(self.h)

    def _json_hams(self):
        return [matrix_to_json(h) for h in self.hams]


class EnergyExpectation(_HamiltonianMeasure):
    """Tr[rho H] - lambda_min(H)."""

    kind = "EnergyExpectation"
    flags = {"P1": True, "P2": True, "P3": True, "P3'": True}

    def value(self, state):
        rho = to_density(state)
        self._check_dim(rho.shape[0])
        emin = np.linalg.eigvalsh(self.h)[0]
        return max(0.0, float(np.real(np.trace(rho @ self.h))) - emin)

    def tensor(self, other):
        return EnergyExpectation(self.hams + other.hams)

    def profiles(self):
        # |dR| <= (1/2)||rho - sigma||_1 * spread, and (1/2)||.||_1 <= L
        if self.ladder:
            return {BURES: ContinuityProfile(BURES, Linear(1.0), OffsetPower(1.0)),
                    TRACE: ContinuityProfile(TRACE, Linear(1.0), Identity(), NegLinear())}
        c = self.spread
        return {BURES: ContinuityProfile(BURES, Linear(1.0), Constant(c)),
                TRACE: ContinuityProfile(TRACE, Linear(1.0), Constant(c))}

    def to_json(self):
        return {"kind": self.kind, "H": self._json_hams(), "flags": dict(self.flags)}


class WignerYanase(_HamiltonianMeasure):
    """Tr[rho H^2] - Tr[sqrt(rho) H sqrt(rho) H]."""

    kind = "WignerYanase"
    flags = {"P1": True, "P2": True, "P3": True, "P3'": True}

    def value(self, state):
        rho = to_density(state)
        self._check_dim(rho.shape[0])
        # (1/2) sum_ij (sqrt(l_i) - sqrt(l_j))^2 |H_ij|^2 in the eigenbasis of rho; eigenvalues at
        # round-off level are zeroed because sqrt amplifies them to ~1e-8
        w, v = np.linalg.eigh(rho)
        r = np.sqrt(np.where(w > 1e-13, w, 0.0))
        hh = v.conj().T @ self.h @ v
        val = 0.5 * np.sum((r[:, None] - r[None, :]) ** 2 * np.abs(hh) ** 2)
        return max(0.0, float(val))

    def tensor(self, other):
        return WignerYanase(self.hams + other.hams)

    def profiles(self):
        # |dI| <= spread^2 ||sqrt(rho) - sqrt(sigma)||_2 / sqrt(2) and ||.||_2^2 <= ||rho - sigma||_1 <= 2L
        if self.ladder:
            return {BURES: ContinuityProfile(BURES, Sqrt(1.0), OffsetPower(2.0)),
                    TRACE: ContinuityProfile(TRACE, Sqrt(1.0 / math.sqrt(2.0)), OffsetPower(2.0))}
        c = self.spread ** 2
        return {BURES: ContinuityProfile(BURES, Sqrt(1.0), Constant(c)),
                TRACE: ContinuityProfile(TRACE, Sqrt(1.0 / math.sqrt(2.0)), Constant(c))}

    def to_json(self):
        return {"kind": self.kind, "H": self._json_hams(), "flags": dict(self.flags)}


class Athermality(_HamiltonianMeasure):
    """Relative entropy to the Gibbs state exp(-H/T)/Z (T = inf gives the maximally mixed state)."""

    kind = "Athermality"
    flags = {"P1": True, "P2": True, "P3": True, "P3'": True}

    def __init__(self, hams, temperature: float = 1.0):
        super().__init__(hams)
        t = float(temperature)
        if not t > 0:
            raise ValidationError(f"temperature must be positive, got {temperature}")
        self.temperature = t

    @cached_property
    def _log_gibbs(self):
        # log2 of the Gibbs state, diagonal in the eigenbasis of H
        w, v = np.linalg.eigh(self.h)
        if math.isinf(self.temperature):
            lg = np.full_like(w, -math.log2(len(w)))
        else:
            x = -(w - w[0]) / self.temperature
            lg = (x - np.log(np.sum(np.exp(x)))) / LN2
        return (v * lg) @ v.conj().T

    def gibbs(self) -> np.ndarray:
        w, v = np.linalg.eigh(self._log_gibbs)
        return (v * 2.0 ** w) @ v.conj().T

    def value(self, state):
        rho = to_density(state)
        self._check_dim(rho.shape[0])
        v = -von_neumann_entropy(rho) - float(np.real(np.trace(rho @ self._log_gibbs)))
        return max(0.0, v)

    def tensor(self, other):
        if other.temperature != self.temperature:
            raise ValidationError("athermality measures compose only at equal temperature")
        return Athermality(self.hams + other.hams, self.temperature)

    def _energy_term(self):
        return 0.0 if math.isinf(self.temperature) else self.spread / (self.temperature * LN2)

    def profiles(self):
        # entropy part: Alicki-Fannes-Winter with eps = (1/2)||.||_1 <= L; energy part as above
        c = self._energy_term()
        return {BURES: ContinuityProfile(BURES, Linear(1.0), Log2PlusConstant(c), EpsBinary(1.0)),
                TRACE: ContinuityProfile(TRACE, Linear(0.5), Log2PlusConstant(c), EpsBinary(0.5))}

    def to_json(self):
        t = "Infinity" if math.isinf(self.temperature) else self.temperature
        return {"kind": self.kind, "H": self._json_hams(), "T": t, "flags": dict(self.flags)}


class RelEntCoherence(Measure):
    """S(Delta(rho)) - S(rho) in the computational basis."""

    kind = "RelEntCoherence"
    flags = {"P1": True, "P2": True, "P3": True, "P3'": True}

    def __init__(self, dims):
        dims = (dims,) if isinstance(dims, (int, np.integer)) else tuple(int(d) for d in dims)
        if not dims or min(dims) < 1:
            raise ValidationError("coherence dimensions must be positive")
        self.dims = dims

    @property
    def dim(self):
        return int(np.prod(self.dims))

    def value(self, state):
        rho = to_density(state)
        self._check_dim(rho.shape[0])
        return max(0.0, von_neumann_entropy(dephase(rho)) - von_neumann_entropy(rho))

    def tensor(self, other):
        return RelEntCoherence(self.dims + other.dims)

    def theory(self):
        return theories.Incoherent(self.dim)

    def profiles(self):
        # keyed to eps = (1/2)||rho - sigma||_1: eps <= L for Bures, eps = x/2 for the trace norm
        return {BURES: ContinuityProfile(BURES, Linear(1.0), Log2(1.0), EpsBinary(1.0)),
                TRACE: ContinuityProfile(TRACE, Linear(0.5), Log2(1.0), EpsBinary(0.5))}

    def to_json(self):
        return {"kind": self.kind, "dims": list(self.dims), "flags": dict(self.flags)}


class EntanglementEntropyPure(Measure):
    """Entropy of entanglement across the cut (all A wires) | (all B wires).

    ``parties`` lists (d_A, d_B) pairs; the state lives on A_1 B_1 A_2 B_2 ...
    which matches the S_A S_B E_A E_B wire order of LocalBipartite.
    """

    kind = "EntanglementEntropyPure"
    flags = {"P1": True, "P2": True, "P3": False, "P3'": True}
    pure_only = True

    def __init__(self, parties):
        if isinstance(parties, tuple) and len(parties) == 2 and all(isinstance(p, (int, np.integer)) for p in parties):
            parties = [parties]
        ps = tuple((int(a), int(b)) for a, b in parties)
        if not ps or min(min(p) for p in ps) < 1:
            raise ValidationError("party dimensions must be positive")
        self.parties = ps

    @property
    def dim(self):
        return int(np.prod([a * b for a, b in self.parties]))

    def value(self, state):
        psi = pure_vector(state)
        self._check_dim(len(psi))
        wires = [x for p in self.parties for x in p]
        k = len(self.parties)
        t = psi.reshape(wires).transpose(list(range(0, 2 * k, 2)) + list(range(1, 2 * k, 2)))
        da = int(np.prod([a for a, _ in self.parties]))
        s = np.linalg.svd(t.reshape(da, -1), compute_uv=False)
        p = s ** 2
        p = p[p > 1e-300]
        return max(0.0, float(-np.sum(p * np.log2(p))))

    def tensor(self, other):
        return EntanglementEntropyPure(self.parties + other.parties)

    def theory(self):
        if len(self.parties) != 1:
            (a1, b1), (a2, b2) = self.parties[0], self.parties[1]
            if len(self.parties) == 2:
                return theories.LocalBipartite(a1, b1, a2, b2)
            raise ValidationError("local theory is defined for at most two parties")
        a, b = self.parties[0]
        return theories.LocalBipartite(a, b)

    def profiles(self):
        # reduced states inherit eps <= L; the smaller cut has dimension <= sqrt(total)
        return {BURES: ContinuityProfile(BURES, Linear(1.0), Log2(0.5), EpsBinary(1.0)),
                TRACE: ContinuityProfile(TRACE, Linear(0.5), Log2(0.5), EpsBinary(0.5))}

    def to_json(self):
        return {"kind": self.kind, "parties": [list(p) for p in self.parties], "flags": dict(self.flags)}


class Mana(Measure):
    """log2 of the l1 norm of the discrete Wigner function on n qudits of odd prime dimension d."""

    kind = "Mana"
    flags = {"P1": True, "P2": True, "P3": True, "P3'": True}

    def __init__(self, d: int, n: int = 1):
        if d not in stab.ODD_PRIMES:
            raise ValidationError(f"mana needs an odd prime local dimension in {stab.ODD_PRIMES}, got {d}")
        if n < 1 or d ** n > 49:
            raise ValidationError("mana supports total dimension up to 49")
        self.d, self.n = int(d), int(n)

    @property
    def dim(self):
        return self.d ** self.n

    def value(self, state):
        rho = to_density(state)
        self._check_dim(rho.shape[0])
        return max(0.0, math.log2(stab.wigner_negativity_norm(rho, stab.phase_point_operators(self.d))))

    def tensor(self, other):
        if other.d != self.d:
            raise ValidationError("mana composes only on equal local dimension")
        return Mana(self.d, self.n + other.n)

    def theory(self):
        return theories.CliffordQupit(self.d, self.n)

    def profiles(self):
        # sum_u |W_rho(u) - W_sigma(u)| <= D ||rho - sigma||_1 with D the total dimension;
        # log2 is 1/ln2-Lipschitz above 1
        return {BURES: ContinuityProfile(BURES, Linear(2.0 / LN2), Identity()),
                TRACE: ContinuityProfile(TRACE, Linear(1.0 / LN2), Identity())}

    def to_json(self):
        return {"kind": self.kind, "d": self.d, "n": self.n, "flags": dict(self.flags)}


class _QubitMagic(Measure):
    smooth = False

    def __init__(self, n: int):
        if not 1 <= n <= 3:
            raise ValidationError(f"{self.kind} supports 1 to 3 qubits, got {n}")
        self.n = int(n)

    @property
    def dim(self):
        return 2 ** self.n

    def _check_dim(self, d):
        if d != self.dim:
            raise ValidationError(f"{self.kind} expects {self.n} qubits (dimension {self.dim}), got dimension {d}; "
                                  "supported sizes are 1 to 3 qubits")

    def theory(self):
        return theories.CliffordQubit(self.n)

    def profiles(self):
        # |dD| <= 2 ||rho - sigma||_1 d  when ||rho - sigma||_1 < 1/(2d); ||.||_1 <= 2L
        return {BURES: ContinuityProfile(BURES, Linear(4.0), Identity(), Zero(), domain=0.25),
                TRACE: ContinuityProfile(TRACE, Linear(2.0), Identity(), Zero(), domain=0.5)}

    def to_json(self):
        return {"kind": self.kind, "n": self.n, "flags": dict(self.flags)}


class LogStabilizerExtent(_QubitMagic):
    kind = "LogStabilizerExtent"
    flags = {"P1": True, "P2": True, "P3": False, "P3'": True}
    pure_only = True

    def value(self, state):
        from .optim.magic import stabilizer_extent

        psi = pure_vector(state)
        self._check_dim(len(psi))
        xi = stabilizer_extent(psi, stab.enumerate_stabilizer_states(self.n))
        return max(0.0, math.log2(xi))

    def tensor(self, other):
        return LogStabilizerExtent(self.n + other.n)


class DmaxMagic(_QubitMagic):
    kind = "DmaxMagic"
    flags = {"P1": True, "P2": True, "P3": False, "P3'": True}

    def value(self, state):
        from .optim.magic import dmax

        rho = to_density(state)
        self._check_dim(rho.shape[0])
        return dmax(rho, stab.enumerate_stabilizer_states(self.n))

    def tensor(self, other):
        return DmaxMagic(self.n + other.n)


KINDS = {c.kind: c for c in (EnergyExpectation, WignerYanase, Athermality, RelEntCoherence,
                              EntanglementEntropyPure, Mana, LogStabilizerExtent, DmaxMagic)}


# --- module-level operations -----------------------------------------------

def evaluate(m: Measure, state) -> float:
    return m.value(state)


def dephase(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.diag(np.diag(rho))


def continuity_profile(m: Measure, flavor: str) -> ContinuityProfile:
    profs = m.profiles()
    if flavor not in profs:
        raise ValidationError(f"{m.kind} has no continuity profile for flavor {flavor!r}")
    return profs[flavor]


def continuity_bound(m: Measure, dist: float, d: int, flavor: str = BURES):
    return continuity_profile(m, flavor).bound(dist, d)


def distance(rho, sigma, flavor: str) -> float:
    if flavor == BURES:
        return bures_distance(rho, sigma)
    if flavor == TRACE:
        return trace_distance(rho, sigma)
    raise ValidationError(f"unknown distance flavor {flavor!r}")


def measure_to_json(m: Measure) -> dict:
    return m.to_json()


def measure_from_json(doc) -> Measure:
    if not isinstance(doc, dict) or doc.get("kind") not in KINDS:
        raise ValidationError(f"measure document needs 'kind' in {sorted(KINDS)}")
    kind = doc["kind"]
    allowed = {"kind", "flags", "H", "T", "dims", "parties", "d", "n"}
    if set(doc) - allowed:
        raise ValidationError(f"unknown keys in measure document: {sorted(set(doc) - allowed)}")
    try:
        if kind in ("EnergyExpectation", "WignerYanase"):
            return KINDS[kind]([matrix_from_json(h) for h in doc["H"]])
        if kind == "Athermality":
            t = doc.get("T", 1.0)
            t = math.inf if t == "Infinity" else float(t)
            return Athermality([matrix_from_json(h) for h in doc["H"]], t)
        if kind == "RelEntCoherence":
            return RelEntCoherence(doc["dims"])
        if kind == "EntanglementEntropyPure":
            return EntanglementEntropyPure(doc["parties"])
        if kind == "Mana":
            return Mana(int(doc["d"]), int(doc.get("n", 1)))
        return KINDS[kind](int(doc["n"]))
    except KeyError as exc:
        raise ValidationError(f"{kind} document is missing field {exc}") from None


def infer_qudits(dim: int):
    for d in stab.ODD_PRIMES:
        n, x = 0, 1
        while x < dim:
            x *= d
            n += 1
        if x == dim and n >= 1:
            return d, n
    raise ValidationError(f"dimension {dim} is not a power of an odd prime in {stab.ODD_PRIMES}")


def infer_qubits(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 1 or 2 ** n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def measure_for(kind: str, dim: int, *, hamiltonian=None, temperature: float = 1.0, parties=None) -> Measure:
    """Build a measure of the given kind (short or full name) for states of dimension ``dim``."""
    alias = {"energy": "EnergyExpectation", "wy": "WignerYanase", "skew": "WignerYanase",
             "athermality": "Athermality", "coherence": "RelEntCoherence",
             "entanglement": "EntanglementEntropyPure", "mana": "Mana",
             "extent": "LogStabilizerExtent", "log-extent": "LogStabilizerExtent", "dmax": "DmaxMagic"}
    kind = alias.get(kind, kind)
    if kind not in KINDS:
        raise ValidationError(f"unknown measure kind {kind!r}; expected one of {sorted(set(alias) | set(KINDS))}")
    if kind in ("EnergyExpectation", "WignerYanase", "Athermality"):
        h = np.diag(np.arange(dim, dtype=float)) if hamiltonian is None else np.asarray(hamiltonian)
        if h.shape[0] != dim:
            raise ValidationError(f"Hamiltonian dimension {h.shape[0]} does not match state dimension {dim}")
        return Athermality(h, temperature) if kind == "Athermality" else KINDS[kind](h)
    if kind == "RelEntCoherence":
        return RelEntCoherence(dim)
    if kind == "EntanglementEntropyPure":
        if parties is None:
            a = int(round(math.sqrt(dim)))
            if a * a != dim:
                raise ValidationError("entanglement entropy needs explicit parties for non-square dimensions")
            parties = [(a, a)]
        return EntanglementEntropyPure(parties)
    if kind == "Mana":
        return Mana(*infer_qudits(dim))
    return KINDS[kind](infer_qubits(dim))


# --- empirical property checks ---------------------------------------------

@dataclass
class PropertyCheck:
    prop: str
    flagged: bool
    trials: int
    max_violation: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return (not self.flagged) or self.trials == 0 or self.max_violation <= self.tolerance


@dataclass
class PropertyReport:
    kind: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"kind": self.kind, "passed": self.passed,
                "checks": [{"property": c.prop, "flagged": c.flagged, "trials": c.trials,
                            "max_violation": c.max_violation, "tolerance": c.tolerance,
                            "passed": c.passed, "note": c.note} for c in self.checks]}


def _sdp_backed(m) -> bool:
    return isinstance(m, _QubitMagic)


def _random_state(m: Measure, rng, pure=False):
    if m.pure_only or pure:
        return random_pure(m.dim, rng)
    rank = int(rng.integers(1, m.dim + 1))
    return random_density(m.dim, rng, rank=rank)


def _nearby(m: Measure, state, rng, scale: float):
    """A second state at a random distance controlled by ``scale``."""
    t = scale * rng.random()
    if state.ndim == 1:
        v = state + t * random_pure(len(state), rng)
        return v / np.linalg.norm(v)
    other = _random_state(m, rng)
    other = ket_to_dm(other) if other.ndim == 1 else other
    return (1 - t) * state + t * other


def _companion(m: Measure):
    """Second factor for additivity tests (None when the product would be too large)."""
    if isinstance(m, LogStabilizerExtent):
        return LogStabilizerExtent(3 - m.n) if m.n < 3 else None
    if isinstance(m, DmaxMagic):
        return DmaxMagic(1) if m.n <= 2 else None
    if isinstance(m, Mana):
        return Mana(m.d, 1) if m.dim * m.d <= 49 else None
    if isinstance(m, EntanglementEntropyPure):
        return EntanglementEntropyPure([(2, 2)])
    if isinstance(m, _HamiltonianMeasure):
        return type(m)(np.diag([0.0, 0.7])) if not isinstance(m, Athermality) \
            else Athermality(np.diag([0.0, 0.7]), m.temperature)
    if isinstance(m, RelEntCoherence):
        return RelEntCoherence(2)
    return None


def check_properties(m: Measure, trials: int = 20, seed=0) -> PropertyReport:
    """Empirical tests of every property; flagged ones must hold within tolerance."""
    rng = np.random.default_rng(seed)
    tol = 1e-6 if _sdp_backed(m) else 1e-9
    n_sdp = max(1, trials // 4) if isinstance(m, DmaxMagic) else trials
    report = PropertyReport(m.kind)

    # P1: invariance under sampled free unitaries
    t = m.theory()
    worst = 0.0
    for k in range(n_sdp):
        s = _random_state(m, rng)
        u = theories.sample_free(t, rng)
        s2 = u @ s if s.ndim == 1 else u @ s @ u.conj().T
        worst = max(worst, abs(m.value(s) - m.value(s2)))
    report.checks.append(PropertyCheck("P1", m.flags["P1"], n_sdp, worst, tol, f"theory {t.variant}"))

    # P2: both continuity flavors on random pairs at mixed distances
    for flavor in FLAVORS:
        prof = continuity_profile(m, flavor)
        worst, used = 0.0, 0
        scale = 1.0 if prof.domain is None else 0.1 / m.dim
        for k in range(n_sdp):
            a = _random_state(m, rng)
            b = _nearby(m, a, rng, scale)
            ra, rb = to_density(a), to_density(b)
            dist = distance(ra, rb, flavor)
            bnd = prof.bound(dist, m.dim)
            if isinstance(bnd, NotApplicable):
                continue
            used += 1
            worst = max(worst, abs(m.value(a) - m.value(b)) - bnd)
        report.checks.append(PropertyCheck("P2", m.flags["P2"], used, max(worst, 0.0), max(tol, 1e-8),
                                           f"flavor {flavor}"))

    comp = _companion(m)
    for prop, use_pure in (("P3", False), ("P3'", True)):
        flagged = m.flags[prop]
        if comp is None:
            report.checks.append(PropertyCheck(prop, flagged, 0, 0.0, tol, "untestable at this size"))
            continue
        if not flagged:
            report.checks.append(PropertyCheck(prop, False, 0, 0.0, tol, "not claimed"))
            continue
        joint = m.tensor(comp)
        worst = 0.0
        for k in range(n_sdp):
            a = _random_state(m, rng, pure=use_pure)
            b = _random_state(comp, rng, pure=use_pure)
            ab = np.kron(a, b)
            worst = max(worst, abs(joint.value(ab) - m.value(a) - comp.value(b)))
        ptol = 1e-6 if _sdp_backed(m) else tol
        report.checks.append(PropertyCheck(prop, flagged, n_sdp, worst, ptol, f"{m.dim} x {comp.dim} products"))
    return report


def asymptotic_continuity_bound(eps: float, d: int) -> float:
    """eps log2 d + (1 + eps) b(eps / (1 + eps)), for states with (1/2)||rho - sigma||_1 <= eps."""
    return eps * math.log2(d) + EpsBinary(1.0)(eps)


def random_state_pair(d: int, rng, eps_max: float = 1.0):
    rho = random_density(d, rng)
    t = eps_max * rng.random()
    return rho, (1 - t) * rho + t * random_density(d, rng)

