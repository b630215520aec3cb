"""Implementations of target unitaries, their gate errors, and resource powers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import measures as M
from . import theories
from .io import matrix_from_json, matrix_to_json
from .optim import diamond
from .optim.search import DensityChart, PureStateChart, multi_restart_search
from .qlinalg import (DimensionError, ValidationError, as_density, as_unitary, bures_distance,
                      ket_to_dm, partial_trace, to_density)


@dataclass(frozen=True, eq=False)
class ImplementationTuple:
    """Free joint unitary V on S (x) E plus ancilla state rho_E; implements Tr_E[V (. x rho_E) V^+]."""

    theory: theories.Theory
    v: np.ndarray
    rho_e: np.ndarray

    def __post_init__(self):
        t = self.theory
        v = as_unitary(self.v, tol=1e-8)
        if v.shape != (t.dim, t.dim):
            raise DimensionError(f"V_SE has shape {v.shape}; theory {t.variant} needs {t.dim} = {t.d_s} x {t.d_e}")
        rho = as_density(self.rho_e)
        if rho.shape[0] != t.d_e:
            raise DimensionError(f"ancilla state has dimension {rho.shape[0]}, expected d_E = {t.d_e}")
        ok, r = theories.is_free(v, t)
        if not ok:
            raise ValidationError(f"V_SE is not free in {t.variant} (residual {r:.3e})")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "rho_e", rho)

    @property
    def d_s(self) -> int:
        return self.theory.d_s

    @property
    def d_e(self) -> int:
        return self.theory.d_e

    def to_json(self) -> dict:
        return {"theory": theories.theory_to_json(self.theory), "d_S": self.d_s, "d_E": self.d_e,
                "V_SE": matrix_to_json(self.v), "rho_E": matrix_to_json(self.rho_e)}

    @classmethod
    def from_json(cls, doc) -> "ImplementationTuple":
        if not isinstance(doc, dict):
            raise ValidationError("implementation document must be an object")
        extra = set(doc) - {"theory", "d_S", "d_E", "V_SE", "rho_E"}
        if extra:
            raise ValidationError(f"unknown keys in implementation document: {sorted(extra)}")
        try:
            t = theories.theory_from_json(doc["theory"])
            v = matrix_from_json(doc["V_SE"])
            rho = matrix_from_json(doc["rho_E"])
        except KeyError as exc:
            raise ValidationError(f"implementation document is missing {exc}") from None
        if rho.ndim == 1:
            rho = ket_to_dm(rho)
        for key, val in (("d_S", t.d_s), ("d_E", t.d_e)):
            if key in doc and doc[key] != val:
                raise DimensionError(f"{key} = {doc[key]} disagrees with the theory ({val})")
        return cls(t, v, rho)


def kraus_from_parts(v, rho_e, d_s: int, d_e: int) -> list:
    """K_ij = sqrt(p_j) (I (x) <i|) V (I (x) |e_j>) with rho_E = sum_j p_j |e_j><e_j|."""
    p, e = np.linalg.eigh(rho_e)
    v4 = np.asarray(v).reshape(d_s, d_e, d_s, d_e)
    out = []
    for j in range(d_e):
        if p[j] <= 1e-15:
            continue
        # V (I (x) |e_j>) as a (d_s, d_e, d_s) tensor, then pick output ancilla index i
        col = np.einsum("abcd,d->abc", v4, e[:, j])
        for i in range(d_e):
            out.append(math.sqrt(p[j]) * col[:, i, :])
    return out


def kraus_operators(impl: ImplementationTuple) -> list:
    return kraus_from_parts(impl.v, impl.rho_e, impl.d_s, impl.d_e)


def induced_channel(impl: ImplementationTuple, rho_s) -> np.ndarray:
    rho = to_density(rho_s)
    if rho.shape[0] != impl.d_s:
        raise DimensionError(f"input has dimension {rho.shape[0]}, expected d_S = {impl.d_s}")
    joint = impl.v @ np.kron(rho, impl.rho_e) @ impl.v.conj().T
    return partial_trace(joint, 0, [impl.d_s, impl.d_e])


def joint_output(impl: ImplementationTuple, rho_s) -> np.ndarray:
    rho = to_density(rho_s)
    return impl.v @ np.kron(rho, impl.rho_e) @ impl.v.conj().T


def choi_matrix(impl: ImplementationTuple) -> np.ndarray:
    return diamond.choi_from_kraus(kraus_operators(impl), impl.d_s)


# --- gate error ------------------------------------------------------------

class FidelityForm:
    """F_e^2(rho) = sum_k |Tr[rho B_k]|^2 = r^+ Q r with r = vec(rho), B_k = U^+ K_k.

    F_e^2 is a convex quadratic in rho, so the worst-case input is the
    solution of a convex minimisation over density matrices.
    """

    def __init__(self, impl: ImplementationTuple, u_s):
        self._setup(kraus_operators(impl), u_s, impl.d_s)

    @classmethod
    def from_kraus(cls, kraus, u_s) -> "FidelityForm":
        obj = cls.__new__(cls)
        obj._setup(kraus, u_s, np.asarray(u_s).shape[0])
        return obj

    def _setup(self, kraus, u_s, d_s):
        u = as_unitary(u_s)
        if u.shape[0] != d_s:
            raise DimensionError(f"target has dimension {u.shape[0]}, expected d_S = {d_s}")
        self.d = d_s
        bs = [u.conj().T @ k for k in kraus]
        self.bs = np.array(bs)
        T = np.array([b.T.reshape(-1) for b in bs])
        self.q = T.conj().T @ T

    def fe2(self, rho) -> float:
        r = np.asarray(rho, dtype=complex).reshape(-1)
        return float(np.real(np.vdot(r, self.q @ r)))

    def grad(self, rho) -> np.ndarray:
        """Hermitian G with d(F_e^2) = Tr[G d rho]."""
        r = np.asarray(rho, dtype=complex).reshape(-1)
        g = (self.q @ r).reshape(self.d, self.d)
        # d(r^+ Q r) = 2 Re Tr[g^+ drho], and drho is Hermitian
        return g + g.conj().T

    def infidelity(self, rho) -> float:
        """1 - F_e^2 = sum_k Tr[rho (B_k - c_k)^+ (B_k - c_k)], c_k = Tr[rho B_k]; no cancellation near F_e = 1."""
        rho = np.asarray(rho, dtype=complex)
        c = np.einsum("ij,kji->k", rho, self.bs)
        dev = self.bs - c[:, None, None] * np.eye(self.d)
        return float(max(0.0, np.real(np.einsum("ij,klj,kli->", rho, dev.conj(), dev))))

    def delta(self, rho) -> float:
        return fe_to_delta(1.0 - self.infidelity(rho), self.infidelity(rho))


def fe_to_delta(fe2: float, infid: float | None = None) -> float:
    """sqrt(2 (1 - F_e)) written as sqrt(2 (1 - F_e^2) / (1 + F_e))."""
    fe2 = min(1.0, max(0.0, fe2))
    if infid is None:
        infid = 1.0 - fe2
    return math.sqrt(max(0.0, 2.0 * infid / (1.0 + math.sqrt(fe2))))


def entanglement_fidelity(impl: ImplementationTuple, u_s, rho_s) -> float:
    """F_e = sqrt(<psi| (Lambda_{U^+} o Lambda (x) id)(psi) |psi>) for a purification psi of rho_s."""
    return math.sqrt(max(0.0, FidelityForm(impl, u_s).fe2(to_density(rho_s))))


def gate_error_at(impl: ImplementationTuple, u_s, rho_s) -> float:
    return FidelityForm(impl, u_s).delta(to_density(rho_s))


@dataclass
class GateError:
    delta: float
    worst_input: np.ndarray
    fe: float
    restarts: int
    trace: list = field(default_factory=list)


def _density_grad(form: FidelityForm, chart: DensityChart):
    d, r = chart.d, chart.r
    n = d * r

    def grad(x):
        Mx = (x[:n] + 1j * x[n:]).reshape(d, r)
        nrm = float(np.real(np.vdot(Mx, Mx)))
        rho = Mx @ Mx.conj().T / nrm
        g = form.grad(rho)
        w = (g - np.real(np.trace(g @ rho)) * np.eye(d)) @ Mx / nrm
        return np.concatenate([2 * w.real.reshape(-1), 2 * w.imag.reshape(-1)])

    return grad


def worst_input(form: FidelityForm, *, restarts: int = 32, seed: int = 0, starts=()):
    """Global minimiser of the convex F_e^2 over density matrices: (F_e^2, 1 - F_e^2, rho, trace).

    ``starts`` are extra density matrices used as warm starts.
    """
    d = form.d
    chart = DensityChart(d)
    xs = [np.concatenate([np.eye(d).reshape(-1), np.zeros(d * d)])]
    for rho in starts:
        w, v = np.linalg.eigh(rho)
        m = v * np.sqrt(np.clip(w, 0, None)) + 1e-6 * np.eye(d)   # keep full rank so descent can move
        xs.append(np.concatenate([m.real.reshape(-1), m.imag.reshape(-1)]))
    res = multi_restart_search(form.fe2, chart, restarts, seed,
                               gradient=_density_grad(form, chart), extra_starts=xs)
    worst = res.best_point
    infid = form.infidelity(worst)
    fe2 = max(0.0, min(res.best_value, 1.0 - infid))
    return fe2, infid, worst, res.trace


def gate_error_bures(impl: ImplementationTuple, u_s, *, restarts: int = 32, seed: int = 0,
                     pure_only: bool = False) -> GateError:
    """Worst-case delta = max_rho sqrt(2 (1 - F_e)), searched over full-rank purifications."""
    form = FidelityForm(impl, u_s)
    if pure_only:
        res = multi_restart_search(lambda v: form.fe2(np.outer(v, v.conj())), PureStateChart(impl.d_s),
                                   restarts, seed)
        worst = ket_to_dm(res.best_point)
        infid = form.infidelity(worst)
        fe2 = max(0.0, min(res.best_value, 1.0 - infid))
        trace = res.trace
    else:
        fe2, infid, worst, trace = worst_input(form, restarts=restarts, seed=seed)
    return GateError(fe_to_delta(fe2, infid), worst, math.sqrt(fe2), len(trace), trace)


def gate_error_diamond(impl: ImplementationTuple, u_s, *, seed: int = 0) -> diamond.DiamondResult:
    u = as_unitary(u_s)
    J = diamond.choi_from_unitary(u) - choi_matrix(impl)
    J = 0.5 * (J + J.conj().T)
    return diamond.diamond_norm_result(J, impl.d_s, impl.d_s, seed=seed)


# --- powers ----------------------------------------------------------------

@dataclass
class PowerResult:
    value_G: float
    value_L: float
    argmax_state: np.ndarray
    argmin_state: np.ndarray
    method: str
    certified: bool

    def to_json(self) -> dict:
        return {"G": self.value_G, "L": self.value_L, "method": self.method, "certified": self.certified,
                "argmax_state": matrix_to_json(self.argmax_state),
                "argmin_state": matrix_to_json(self.argmin_state)}


def energy_power(h, u) -> PowerResult:
    """Exact: R(U rho U^+) - R(rho) = Tr[rho (U^+ H U - H)], extremised by eigenvectors."""
    h = np.asarray(h, dtype=complex)
    u = as_unitary(u)
    k = u.conj().T @ h @ u - h
    w, v = np.linalg.eigh(0.5 * (k + k.conj().T))
    return PowerResult(max(0.0, float(w[-1])), max(0.0, float(-w[0])), v[:, -1], v[:, 0], "Exact", True)


def power(m: M.Measure, u, pure_only: bool = False, *, restarts: int = 8, seed: int = 0) -> PowerResult:
    u = as_unitary(u)
    if u.shape[0] != m.dim:
        raise DimensionError(f"unitary of dimension {u.shape[0]} does not match measure dimension {m.dim}")
    if isinstance(m, M.EnergyExpectation):
        return energy_power(m.h, u)
    if m.pure_only and not pure_only:
        raise ValidationError(f"{m.kind} is defined on pure states only; request the pure power")

    d = m.dim
    # eigenvectors of U are invariant inputs and witness G, L >= 0
    _, eig = np.linalg.eig(u)
    eig = eig / np.linalg.norm(eig, axis=0)

    def gain_pure(v):
        return m.value(u @ v) - m.value(v)

    def gain_mixed(rho):
        return m.value(u @ rho @ u.conj().T) - m.value(rho)

    method = "L-BFGS-B" if m.smooth else "Nelder-Mead"
    runs = []
    pchart = PureStateChart(d)
    pstarts = [np.concatenate([eig[:, j].real, eig[:, j].imag]) for j in range(d)]
    for sign in (True, False):
        runs.append(("pure", sign, multi_restart_search(gain_pure, pchart, restarts, seed,
                                                        maximize=sign, extra_starts=pstarts, method=method)))
    if not pure_only:
        dchart = DensityChart(d)
        dstarts = []
        for j in range(d):
            mm = np.zeros((d, d), dtype=complex)
            mm[:, 0] = eig[:, j]
            dstarts.append(np.concatenate([mm.real.reshape(-1), mm.imag.reshape(-1)]))
        for sign in (True, False):
            runs.append(("mixed", sign, multi_restart_search(gain_mixed, dchart, restarts, seed + 1,
                                                             maximize=sign, extra_starts=dstarts, method=method)))
    best_g = max((r for r in runs if r[1]), key=lambda r: r[2].best_value)
    best_l = min((r for r in runs if not r[1]), key=lambda r: r[2].best_value)

    def as_state(kind, p):
        return p if kind == "pure" else p

    n_restarts = sum(len(r[2].trace) for r in runs)
    return PowerResult(max(0.0, best_g[2].best_value), max(0.0, -best_l[2].best_value),
                       as_state(best_g[0], best_g[2].best_point), as_state(best_l[0], best_l[2].best_point),
                       f"MultiRestart({n_restarts} restarts)", False)


# --- no-correlation lemma --------------------------------------------------

@dataclass
class NoCorrelation:
    lhs1: dict            # i -> L(sigma_SE^(i), U rho^(i) U^+ (x) sigma_E^(i))
    delta: dict           # i -> per-input error delta(rho^(i))
    lhs2_min: float       # min over sigma' of L(sigma_E^0, sigma') + L(sigma', sigma_E^1)
    lhs2_direct: float    # L(sigma_E^0, sigma_E^1)
    sigma_prime: np.ndarray

    def to_json(self) -> dict:
        return {"lhs1": self.lhs1, "delta": self.delta, "lhs2_min": self.lhs2_min,
                "lhs2_direct": self.lhs2_direct}


def no_correlation_quantities(impl: ImplementationTuple, u_s, rho0, rho1, *, grid: int = 21) -> NoCorrelation:
    u = as_unitary(u_s)
    form = FidelityForm(impl, u)
    states = {"0": to_density(rho0), "1": to_density(rho1)}
    states["0+1"] = 0.5 * (states["0"] + states["1"])
    lhs1, delta, marg = {}, {}, {}
    for key, rho in states.items():
        sig = joint_output(impl, rho)
        se = partial_trace(sig, 1, [impl.d_s, impl.d_e])
        marg[key] = se
        lhs1[key] = bures_distance(sig, np.kron(u @ rho @ u.conj().T, se))
        delta[key] = form.delta(rho)
    s0, s1 = marg["0"], marg["1"]
    best, arg = math.inf, s0
    for t in np.linspace(0.0, 1.0, grid):
        sp = (1 - t) * s0 + t * s1
        val = bures_distance(s0, sp) + bures_distance(sp, s1)
        if val < best - 1e-15:
            best, arg = val, sp
    return NoCorrelation(lhs1, delta, best, bures_distance(s0, s1), arg)
