"""Implementation search: best free implementations of a target unitary at each ancilla size.

For every ancilla dimension the harness maximises the worst-case entanglement
fidelity min_rho F_e^2 over free joint unitaries V (and, depending on the
policy, the ancilla state), then compares the resulting error with the
trade-off curves from ``bounds``.

The maximin is solved by a bundle method: the inner minimum over inputs is a
convex problem solved to global optimality, each solve contributes a cut
F_e^2(rho_k; V) >= t, and the outer step maximises t over the cuts inside a
trust region.  V is charted as V0 exp(i sum x_j E_j) with E_j spanning the
free Lie algebra, so every iterate stays free.
"""
from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import bounds, dynamics, stab, theories
from . import measures as M
from .io import dumps_line, matrix_from_json, matrix_to_json
from .optim.sdp import LmiBlock, SdpProblem, hermitian_basis, solve_sdp
from .qlinalg import DimensionError, ValidationError, as_unitary, ket_to_dm, random_pure, to_density

FIXED, CO, PURE_CO = "FixedState", "CoOptimized", "PureCoOptimized"
POLICIES = (FIXED, CO, PURE_CO)
MAX_D_E = 16


# --- scenario ----------------------------------------------------------------

@dataclass
class SearchScenario:
    theory: theories.Theory           # system theory; the ancilla is attached per cell
    target: np.ndarray
    measure: M.Measure
    d_e_list: list
    ancilla_policy: str = CO
    rho_e: np.ndarray | None = None   # FixedState only; None means the ground state |0><0|
    restarts: int = 4
    seed: int = 0
    rounds: int = 5
    ancilla_hamiltonian: str = "ladder"
    theorem: str = bounds.THM1

    def __post_init__(self):
        self.target = as_unitary(self.target)
        t = self.theory
        if self.target.shape[0] != t.d_s:
            raise DimensionError(f"target has dimension {self.target.shape[0]}, theory system has {t.d_s}")
        if self.measure.dim != t.d_s:
            raise DimensionError(f"measure acts on dimension {self.measure.dim}, expected {t.d_s}")
        if self.ancilla_policy not in POLICIES:
            raise ValidationError(f"ancilla policy must be one of {POLICIES}, got {self.ancilla_policy!r}")
        if self.theorem == bounds.THM2 and self.ancilla_policy != PURE_CO:
            raise ValidationError("comparisons with the pure-ancilla bound need the PureCoOptimized policy")
        if self.ancilla_hamiltonian not in ("ladder", "zero"):
            raise ValidationError("ancilla_hamiltonian must be 'ladder' or 'zero'")
        self.d_e_list = [int(d) for d in self.d_e_list]
        if not self.d_e_list or min(self.d_e_list) < 1 or max(self.d_e_list) > MAX_D_E:
            raise ValidationError(f"ancilla dimensions must lie in [1, {MAX_D_E}]")
        if self.restarts < 1 or self.rounds < 1:
            raise ValidationError("restarts and rounds must be positive")
        for d in self.d_e_list:
            self.theory_for(d)

    def theory_for(self, d_e: int) -> theories.Theory:
        t = self.theory
        if isinstance(t, theories.EnergyConserving):
            h = np.arange(d_e, dtype=float) if self.ancilla_hamiltonian == "ladder" else np.zeros(d_e)
            return theories.EnergyConserving(t.h_s, np.diag(h))
        if isinstance(t, theories.Incoherent):
            return theories.Incoherent(t.d_s, d_e)
        if isinstance(t, theories.LocalBipartite):
            a = int(round(math.sqrt(d_e)))
            return theories.LocalBipartite(t.d_sa, t.d_sb, *((a, a) if a * a == d_e else (d_e, 1)))
        if isinstance(t, theories.CLIFFORD):
            k = t.local_dim
            n = int(round(math.log(d_e, k))) if d_e > 1 else 0
            if k ** n != d_e:
                raise ValidationError(f"{t.variant} ancilla dimension must be a power of {k}, got {d_e}")
            return t.with_ancilla(n_e=n)
        raise ValidationError(f"unknown theory {t!r}")

    def initial_rho_e(self, d_e: int) -> np.ndarray:
        if self.ancilla_policy == FIXED and self.rho_e is not None:
            rho = to_density(self.rho_e)
            if rho.shape[0] != d_e:
                raise DimensionError(f"fixed ancilla state has dimension {rho.shape[0]}, cell needs {d_e}")
            return rho
        rho = np.zeros((d_e, d_e), dtype=complex)
        rho[0, 0] = 1.0
        return rho

    def to_json(self) -> dict:
        pol = {"kind": self.ancilla_policy}
        if self.ancilla_policy == FIXED and self.rho_e is not None:
            pol["rho_E"] = matrix_to_json(to_density(self.rho_e))
        return {"theory": theories.theory_to_json(self.theory), "target": matrix_to_json(self.target),
                "measure": self.measure.to_json(), "d_E": list(self.d_e_list), "ancilla_policy": pol,
                "restarts": self.restarts, "seed": self.seed, "rounds": self.rounds,
                "ancilla_hamiltonian": self.ancilla_hamiltonian, "theorem": self.theorem}

    @classmethod
    def from_json(cls, doc) -> "SearchScenario":
        if not isinstance(doc, dict):
            raise ValidationError("scenario must be a JSON object")
        allowed = {"theory", "target", "measure", "d_E", "ancilla_policy", "restarts", "seed", "rounds",
                   "ancilla_hamiltonian", "theorem"}
        extra = set(doc) - allowed
        if extra:
            raise ValidationError(f"unknown keys in scenario: {sorted(extra)}")
        if "seed" not in doc:
            raise ValidationError("scenario needs an explicit 'seed'")
        try:
            theory = theories.theory_from_json(doc["theory"])
            target = matrix_from_json(doc["target"])
            measure = M.measure_from_json(doc["measure"])
            d_es = doc["d_E"]
        except KeyError as exc:
            raise ValidationError(f"scenario is missing {exc}") from None
        pol = doc.get("ancilla_policy", {"kind": CO})
        if isinstance(pol, str):
            pol = {"kind": pol}
        if set(pol) - {"kind", "rho_E"}:
            raise ValidationError(f"unknown keys in ancilla_policy: {sorted(set(pol) - {'kind', 'rho_E'})}")
        rho_e = matrix_from_json(pol["rho_E"]) if "rho_E" in pol else None
        if rho_e is not None and rho_e.ndim == 1:
            rho_e = ket_to_dm(rho_e)
        return cls(theory, target, measure, list(d_es), pol.get("kind", CO), rho_e,
                   int(doc.get("restarts", 4)), int(doc["seed"]), int(doc.get("rounds", 5)),
                   doc.get("ancilla_hamiltonian", "ladder"), doc.get("theorem", bounds.THM1))


# --- fidelity cuts and their gradients -------------------------------------

def transfer_matrix(v4: np.ndarray, x_in: np.ndarray) -> np.ndarray:
    """T_ia = Tr[(I (x) <i|) V (I (x) |a>) X]; F_e^2(rho) = Tr[rho_E T^+ T] for X = rho U^+."""
    return np.einsum("sipa,ps->ia", v4, x_in)


class UnitaryChart:
    """x -> V0 exp(i sum_j x_j E_j), with the exact gradient of F_e^2 through the exponential."""

    def __init__(self, v0: np.ndarray, basis: np.ndarray):
        self.v0 = v0
        self.basis = basis
        self._cache = (None, None)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def _eig(self, x):
        key, val = self._cache
        if key is not None and np.array_equal(key, x):
            return val
        k = np.einsum("j,jab->ab", x, self.basis)
        lam, w = np.linalg.eigh(0.5 * (k + k.conj().T))
        e = np.exp(1j * lam)
        diff = lam[:, None] - lam[None, :]
        close = np.abs(diff) < 1e-9
        phi = np.where(close, 1j * e[:, None], (e[:, None] - e[None, :]) / np.where(close, 1.0, diff))
        v = self.v0 @ (w * e) @ w.conj().T
        val = (v, w, phi)
        self._cache = (x.copy(), val)
        return val

    def unitary(self, x) -> np.ndarray:
        return self._eig(x)[0]

    def grad_from_gamma(self, x, gamma: np.ndarray) -> np.ndarray:
        """Rows 2 Re Tr[dV/dx_j Gamma_k] for a stack of matrices Gamma_k (Daleckii-Krein for the exponential)."""
        _, w, phi = self._eig(x)
        n = np.einsum("ba,kbc,cd,de->kae", w.conj(), gamma, self.v0, w, optimize=True)
        xi = np.einsum("ab,kbc,dc->kad", w, phi.T[None] * n, w.conj(), optimize=True)
        return 2.0 * np.real(np.einsum("jab,kba->kj", self.basis, xi, optimize=True))


def _transfer_stack(v4, rhos, u):
    xs = np.einsum("kab,cb->kac", np.asarray(rhos), u.conj())
    return xs, np.einsum("sipa,kps->kia", v4, xs)


def _cut_unitary(chart: UnitaryChart, x, rhos, u, rho_e, d_s, d_e):
    """Values F_e^2(rho_k; V(x)) and their gradients in x, for a list of inputs rho_k."""
    v = chart.unitary(x)
    xs, t = _transfer_stack(v.reshape(d_s, d_e, d_s, d_e), rhos, u)
    vals = np.real(np.einsum("ab,kib,kia->k", rho_e, t.conj(), t))
    r = t @ rho_e
    k = len(xs)
    gamma = np.einsum("kab,kdc->kacbd", xs, r.conj()).reshape(k, d_s * d_e, d_s * d_e)
    return vals, chart.grad_from_gamma(x, gamma)


def _ancilla_state(x, d_e: int, pure: bool):
    if pure:
        e = x[:d_e] + 1j * x[d_e:]
        return e / max(np.linalg.norm(e), 1e-300)
    m = (x[: d_e * d_e] + 1j * x[d_e * d_e:]).reshape(d_e, d_e)
    rho = m @ m.conj().T
    return rho / max(np.real(np.trace(rho)), 1e-300)


def _cut_ancilla(x, v4, rhos, u, d_e, pure):
    """Values Tr[rho_E Y_k] with Y_k = T_k^+ T_k, and gradients in the ancilla chart."""
    _, t = _transfer_stack(v4, rhos, u)
    y = np.einsum("kia,kib->kab", t.conj(), t)
    if pure:
        e = x[:d_e] + 1j * x[d_e:]
        nrm = float(np.real(np.vdot(e, e)))
        ye = y @ e
        vals = np.real(ye @ e.conj()) / nrm
        w = (ye - vals[:, None] * e[None]) / nrm
        return vals, np.concatenate([2 * w.real, 2 * w.imag], axis=1)
    n = d_e * d_e
    m = (x[:n] + 1j * x[n:]).reshape(d_e, d_e)
    nrm = float(np.real(np.vdot(m, m)))
    rho = m @ m.conj().T / nrm
    vals = np.real(np.einsum("ab,kba->k", rho, y))
    w = (y - vals[:, None, None] * np.eye(d_e)) @ m / nrm
    k = len(vals)
    return vals, np.concatenate([2 * w.real.reshape(k, -1), 2 * w.imag.reshape(k, -1)], axis=1)


def _ancilla_coords(rho_e: np.ndarray, pure: bool) -> np.ndarray:
    w, v = np.linalg.eigh(rho_e)
    if pure:
        e = v[:, -1]
        return np.concatenate([e.real, e.imag])
    m = v * np.sqrt(np.clip(w, 0, None)) + 1e-4 * np.eye(len(w))
    return np.concatenate([m.real.reshape(-1), m.imag.reshape(-1)])


# --- bundle maximin -----------------------------------------------------------

def bundle_maximin(cut, oracle, x0, *, radius: float = 0.5, max_iter: int = 40, tol: float = 1e-10,
                   max_cuts: int = 60):
    """Maximise min_rho F(rho; x).

    ``cut(rhos, x) -> (values, gradients)`` evaluates F(rho_k; x) for a list
    of inputs; ``oracle(x) -> (min_rho F, argmin)`` solves the inner problem.
    Returns (best x, best value, iterations); the best value is the exact
    inner minimum at the best x, hence a valid lower bound on the maximin.
    """
    x0 = np.asarray(x0, dtype=float)
    best_x = x0.copy()
    best, rho = oracle(best_x)
    cuts = [rho]
    it = 0
    if len(x0) == 0:
        return best_x, best, 0
    for it in range(1, max_iter + 1):
        centre = best_x.copy()
        memo = {}

        def eval_cuts(z):
            key = z.tobytes()
            if key not in memo:
                memo.clear()
                memo[key] = cut(cuts, z[:-1])
            return memo[key]

        def cons(z):
            return eval_cuts(z)[0] - z[-1]

        def cons_jac(z):
            g = eval_cuts(z)[1]
            return np.hstack([g, -np.ones((len(g), 1))])

        t0 = float(np.min(cut(cuts, centre)[0]))
        z0 = np.concatenate([centre, [t0]])
        bnds = [(c - radius, c + radius) for c in centre] + [(None, None)]
        with warnings.catch_warnings():
            # SLSQP clips its own line-search steps to the trust box and says so
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(lambda z: -z[-1], z0, jac=lambda z: np.eye(len(z))[-1] * -1.0, method="SLSQP",
                           bounds=bnds, constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                           options={"maxiter": 200, "ftol": 1e-13})
        z = res.x if np.all(np.isfinite(res.x)) else z0
        z[:-1] = np.clip(z[:-1], centre - radius, centre + radius)
        model = float(z[-1])
        val, rho = oracle(z[:-1])
        cuts.append(rho)
        if len(cuts) > max_cuts:
            cuts.pop(1)
        if val > best + 1e-13:
            best, best_x = val, z[:-1].copy()
            radius = min(2 * radius, 2.0)
        else:
            radius *= 0.5
        if model - best <= tol or radius < 1e-7:
            break
    return best_x, best, it


def ancilla_cutting_plane(v4, u, d_e: int, oracle, rho_e0, *, max_iter: int = 30, tol: float = 1e-10):
    """max over mixed rho_E of min_rho Tr[rho_E Y(rho)], by Kelley cuts; each master problem is an SDP.

    The objective is linear in rho_E for every input, so the master problem
    max t s.t. Tr[rho_E Y_k] >= t, rho_E >= 0, Tr rho_E = 1 is solved exactly.
    """
    best, rho = oracle(rho_e0)
    best_state = rho_e0
    cuts = [rho]
    basis = hermitian_basis(d_e)
    n = len(basis)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    lmi = LmiBlock(np.zeros((d_e, d_e)), np.concatenate([-basis, np.zeros((1, d_e, d_e))]))
    a_eq = np.concatenate([np.real(np.trace(basis, axis1=1, axis2=2)), [0.0]])[None]
    for _ in range(max_iter):
        _, t = _transfer_stack(v4, cuts, u)
        y = np.einsum("kia,kib->kab", t.conj(), t)
        g = np.hstack([-np.real(np.einsum("jab,kba->kj", basis, y)), np.ones((len(cuts), 1))])
        sol = solve_sdp(SdpProblem(c, [lmi], g, np.zeros(len(cuts)), a_eq, np.ones(1)))
        if not sol.optimal:
            break
        r = np.tensordot(sol.x[:n], basis, axes=1)
        w, vec = np.linalg.eigh(0.5 * (r + r.conj().T))
        r = (vec * np.clip(w, 0, None)) @ vec.conj().T
        r /= np.real(np.trace(r))
        val, rho = oracle(r)
        if val > best:
            best, best_state = val, r
        if sol.x[-1] - best <= tol:
            break
        cuts.append(rho)
    return best_state, best


# --- sweep -------------------------------------------------------------------

@dataclass
class CellResult:
    d_e: int
    delta_bures: float
    delta_diamond: float | None
    delta_floor: float | None         # smallest error the theorem allows at this d_E
    impl: dynamics.ImplementationTuple
    reports: list
    history: list                     # running best delta after each restart
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {"d_E": self.d_e, "delta_bures": self.delta_bures, "delta_diamond": self.delta_diamond,
                "delta_floor": self.delta_floor, "implementation": self.impl.to_json(),
                "reports": [r.to_json() for r in self.reports], "history": list(self.history)}


@dataclass
class SweepResult:
    scenario: SearchScenario
    lhs: float
    power: dynamics.PowerResult
    cells: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"scenario": self.scenario.to_json(), "lhs": self.lhs, "power": self.power.to_json(),
                "cells": [c.to_json() for c in self.cells]}

    def to_jsonl(self) -> str:
        out = []
        for c in self.cells:
            rec = c.to_json()
            rec["lhs"] = self.lhs
            out.append(dumps_line(rec) + "\n")
        return "".join(out)

    def to_csv(self) -> str:
        lines = ["d_E,delta_bures,delta_diamond,delta_floor,lhs,satisfied"]
        for c in self.cells:
            ok = all(r.satisfied for r in c.reports)
            lines.append(",".join([str(c.d_e), repr(c.delta_bures), _opt(c.delta_diamond), _opt(c.delta_floor),
                                   repr(self.lhs), str(ok)]))
        return "\n".join(lines) + "\n"

    def to_gnuplot(self) -> str:
        lines = ["# d_E  best_delta_bures  delta_floor  delta_diamond"]
        for c in self.cells:
            lines.append(f"{c.d_e} {c.delta_bures!r} {_opt(c.delta_floor, 'NaN')} {_opt(c.delta_diamond, 'NaN')}")
        return "\n".join(lines) + "\n"


def _opt(x, missing=""):
    return missing if x is None else repr(x)


def min_error_floor(profile, theorem: str, lhs: float, d_s: int, d_e: int) -> float | None:
    """Smallest error at which the bound's rhs reaches lhs (rhs is nondecreasing in the error)."""
    top = 2.0 if theorem == bounds.COR3 else bounds.SQRT2
    if lhs <= 0:
        return 0.0

    def ok(x):
        r = bounds.rhs_for(theorem, profile, x, d_s, d_e)
        return isinstance(r, float) and r >= lhs

    if not ok(top):
        return None
    lo, hi = 0.0, top
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15:
            break
    return lo


def _embed_previous(prev: dynamics.ImplementationTuple, t: theories.Theory):
    """Carry an implementation to a larger ancilla without changing its channel, if the result is free."""
    d_s, d_old, d_new = prev.d_s, prev.d_e, t.d_e
    if d_new < d_old:
        return None
    if isinstance(t, theories.CLIFFORD):
        if d_new % d_old:
            return None
        k = d_new // d_old
        v = np.kron(prev.v, np.eye(k))
        rho = np.kron(prev.rho_e, np.diag([1.0] + [0.0] * (k - 1)))
    else:
        idx = np.array([s * d_new + e for s in range(d_s) for e in range(d_old)])
        v = np.eye(d_s * d_new, dtype=complex)
        v[np.ix_(idx, idx)] = prev.v
        rho = np.zeros((d_new, d_new), dtype=complex)
        rho[:d_old, :d_old] = prev.rho_e
    ok, _ = theories.is_free(v, t)
    return (v, rho) if ok else None


class _Cell:
    """Optimisation state for one ancilla dimension."""

    def __init__(self, s: SearchScenario, t: theories.Theory, seed: int):
        self.s, self.t = s, t
        self.d_s, self.d_e = t.d_s, t.d_e
        self.u = s.target
        self.basis = theories.free_algebra_basis(t)
        self.rng = np.random.default_rng(seed)
        self.seed = seed
        self.pure = s.ancilla_policy == PURE_CO

    def worst(self, v, rho_e, starts=()):
        kraus = dynamics.kraus_from_parts(v, rho_e, self.d_s, self.d_e)
        form = dynamics.FidelityForm.from_kraus(kraus, self.u)
        fe2, _, rho, _ = dynamics.worst_input(form, restarts=2, seed=self.seed, starts=starts)
        return fe2, rho

    def optimise_unitary(self, v0, rho_e):
        if len(self.basis) == 0:
            fe2, _ = self.worst(v0, rho_e)
            return v0, fe2
        chart = UnitaryChart(v0, self.basis)
        last = []

        def oracle(x):
            fe2, rho = self.worst(chart.unitary(x), rho_e, last[-1:])
            last.append(rho)
            return fe2, rho

        def cut(rhos, x):
            return _cut_unitary(chart, x, rhos, self.u, rho_e, self.d_s, self.d_e)

        x, val, _ = bundle_maximin(cut, oracle, np.zeros(chart.dim))
        return chart.unitary(x), val

    def optimise_ancilla(self, v, rho_e):
        v4 = v.reshape(self.d_s, self.d_e, self.d_s, self.d_e)
        last = []
        if not self.pure:
            def oracle_state(r):
                fe2, rho = self.worst(v, r, last[-1:])
                last.append(rho)
                return fe2, rho

            return ancilla_cutting_plane(v4, self.u, self.d_e, oracle_state, rho_e)

        def state(x):
            a = _ancilla_state(x, self.d_e, self.pure)
            return ket_to_dm(a) if self.pure else a

        def oracle(x):
            fe2, rho = self.worst(v, state(x), last[-1:])
            last.append(rho)
            return fe2, rho

        def cut(rhos, x):
            return _cut_ancilla(x, v4, rhos, self.u, self.d_e, self.pure)

        x, val, _ = bundle_maximin(cut, oracle, _ancilla_coords(rho_e, self.pure), radius=1.0)
        return state(x), val

    def starts(self, prev):
        """Initial (V, rho_E) pairs: embedded previous best, U_S (x) I if free, then random free unitaries."""
        out = []
        rho0 = self.s.initial_rho_e(self.d_e)
        if prev is not None and self.s.ancilla_policy != FIXED:
            emb = _embed_previous(prev, self.t)
            if emb is not None:
                out.append(emb)
        elif prev is not None:
            emb = _embed_previous(prev, self.t)
            if emb is not None:
                out.append((emb[0], rho0))
        direct = np.kron(self.u, np.eye(self.d_e))
        if theories.is_free(direct, self.t)[0]:
            out.append((direct, rho0))
        while len(out) < self.s.restarts:
            v = theories.sample_free(self.t, self.rng)
            rho = rho0
            if self.s.ancilla_policy == CO:
                rho = 0.5 * rho0 + 0.5 * ket_to_dm(random_pure(self.d_e, self.rng))
            elif self.s.ancilla_policy == PURE_CO:
                rho = ket_to_dm(random_pure(self.d_e, self.rng))
            out.append((v, rho))
        return out[: max(self.s.restarts, 1)]

    def clifford_moves(self, v, rho_e, fe2, tries: int = 24):
        """Discrete local search for theories without a continuous chart: right-multiply by generators."""
        gens = [g.matrix for g in stab.generator_set(self.t.local_dim, self.t.n)]
        improved = True
        while improved:
            improved = False
            for g in gens:
                for cand in (v @ g, g @ v):
                    val, _ = self.worst(cand, rho_e)
                    if val > fe2 + 1e-12:
                        v, fe2, improved = cand, val, True
            tries -= 1
            if tries <= 0:
                break
        return v, fe2

    def descend(self, start):
        """Alternate unitary and ancilla updates from one starting pair."""
        v, rho_e = start
        fe2, _ = self.worst(v, rho_e)
        for _ in range(self.s.rounds):
            before = fe2
            if len(self.basis):
                v, fe2 = self.optimise_unitary(v, rho_e)
            else:
                v, fe2 = self.clifford_moves(v, rho_e, fe2)
            if self.s.ancilla_policy != FIXED:
                rho_new, val = self.optimise_ancilla(v, rho_e)
                if val >= fe2:
                    rho_e, fe2 = rho_new, val
            if fe2 - before < 1e-12:
                break
        return fe2, v, rho_e

    def run(self, prev, workers: int = 1):
        starts = self.starts(prev)
        if workers > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(self.descend, starts))
        else:
            outcomes = [self.descend(st) for st in starts]
        # merge in start order so the result does not depend on the worker count
        best = (-1.0, None, None)
        history = []
        for out in outcomes:
            if out[0] > best[0]:
                best = out
            history.append(best[0])
        return best, history


def worker_count() -> int:
    """Worker cap from RULAB_THREADS (default 1)."""
    raw = os.environ.get("RULAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"RULAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"RULAB_THREADS must be a positive integer, got {raw!r}")
    return n


def run_sweep(s: SearchScenario, *, diamond: bool = True, power_restarts: int = 8) -> SweepResult:
    workers = worker_count()
    pure_power = s.theorem == bounds.THM2
    power = dynamics.power(s.measure, s.target, pure_only=pure_power, restarts=power_restarts, seed=s.seed)
    lhs = power.value_G + power.value_L
    result = SweepResult(s, lhs, power)
    prev = None
    for k, d_e in enumerate(sorted(s.d_e_list)):
        t0 = time.perf_counter()
        t = s.theory_for(d_e)
        cell = _Cell(s, t, s.seed + 1000 * k)
        (fe2, v, rho_e), hist = cell.run(prev, workers)
        rho_e = 0.5 * (rho_e + rho_e.conj().T)
        rho_e = rho_e / np.real(np.trace(rho_e))
        if s.ancilla_policy == PURE_CO:
            w, vec = np.linalg.eigh(rho_e)
            rho_e = ket_to_dm(vec[:, -1])
        impl = dynamics.ImplementationTuple(t, v, rho_e)
        err = dynamics.gate_error_bures(impl, s.target, restarts=32, seed=s.seed)
        history = [dynamics.fe_to_delta(f) for f in hist]
        dd = dynamics.gate_error_diamond(impl, s.target, seed=s.seed).value if diamond else None
        reports = []
        theorems = [s.theorem] + ([bounds.COR3] if diamond and s.theorem == bounds.THM1 else [])
        for th in theorems:
            prof = bounds.bound_profile(s.measure, t, bounds.flavor_for(th))
            delta = dd if th == bounds.COR3 else err.delta
            reports.append(bounds.make_report(th, t, s.measure, delta, lhs, power.certified, prof, power.method))
        prof = bounds.bound_profile(s.measure, t, bounds.flavor_for(s.theorem))
        floor = min_error_floor(prof, s.theorem, lhs, t.d_s, d_e)
        cell_res = CellResult(d_e, err.delta, dd, floor, impl, reports, history,
                              time.perf_counter() - t0)
        result.cells.append(cell_res)
        prev = impl
    return result


# --- impossibility witness ----------------------------------------------------

def witness_nogo(s: SearchScenario, delta_target: float, *, power=None) -> dict:
    """Decide whether an error of ``delta_target`` is ruled out for every ancilla size in the scenario.

    If the bound's rhs at delta_target is below G + L for every d_E the
    answer is a certificate (pure arithmetic, independent of the seed);
    otherwise the search runs and the best error found is reported.
    """
    pure_power = s.theorem == bounds.THM2
    power = power or dynamics.power(s.measure, s.target, pure_only=pure_power, seed=s.seed)
    lhs = power.value_G + power.value_L
    if lhs <= 0:
        raise ValidationError("the target neither generates nor loses the resource; no bound applies")
    rows = []
    for d_e in s.d_e_list:
        t = s.theory_for(d_e)
        prof = bounds.bound_profile(s.measure, t, bounds.flavor_for(s.theorem))
        r = bounds.rhs_for(s.theorem, prof, delta_target, t.d_s, d_e)
        rows.append({"d_E": d_e, "rhs": r if isinstance(r, float) else None})
    if all(r["rhs"] is not None and r["rhs"] < lhs for r in rows):
        return {"achievable": False, "confidence": "certificate", "delta_target": delta_target, "lhs": lhs,
                "certificate": rows, "power_certified": power.certified}
    sweep = run_sweep(s, diamond=False)
    best = min(c.delta_bures for c in sweep.cells)
    return {"achievable": bool(best <= delta_target), "confidence": "search" if best <= delta_target else "unknown",
            "delta_target": delta_target, "lhs": lhs, "certificate": rows, "best_delta": best,
            "power_certified": power.certified}
