"""Trade-off bounds between implementation error, ancilla size and resource power.

Three right-hand sides are provided, all built from a measure's continuity
profile (f, g, h):

* Bures error, any ancilla state:
      f(2 sqrt2 d) g(d_E) + 2 f(2 d) g(d_S d_E) + h(2 sqrt2 d) + 2 h(2 d)
* diamond-norm error x, trace-norm profile:
      f(4 sqrt(2x)) g(d_E) + 2 f(4 sqrt x) g(d_S d_E) + h(4 sqrt(2x)) + 2 h(4 sqrt x)
* Bures error, pure ancilla, pure-state powers:
      2 (f(2 (1 + sqrt2) d) g(d_S d_E) + h(2 (1 + sqrt2) d))

Each is compared against G_U + L_U (or the pure-state powers for the third).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, theories
from . import measures as M
from .io import dumps_line
from .qlinalg import (DimensionError, ValidationError, as_pure, as_unitary, ket_to_dm, partial_trace,
                      random_density, to_density, trace_norm)

THM1, COR3, THM2 = "Thm1", "Cor3", "Thm2"
THEOREMS = (THM1, COR3, THM2)
SAT_TOL = 1e-7
SQRT2 = math.sqrt(2.0)

CSV_COLUMNS = ("theorem", "theory", "measure", "d_S", "d_E", "delta", "lhs", "rhs", "slack", "certified", "satisfied")


# --- right-hand sides --------------------------------------------------------

def _need(profile: M.ContinuityProfile, flavor: str, what: str):
    if profile.flavor != flavor:
        raise ValidationError(f"{what} needs a {flavor} continuity profile, got {profile.flavor}")


def _combine(profile: M.ContinuityProfile, terms):
    """sum c * (f(x) g(d) + h(x)) over (c, x, d); NotApplicable if any argument leaves the domain."""
    total = 0.0
    for c, x, d in terms:
        if not profile.valid(x, d):
            return M.NotApplicable(f"continuity profile not valid at distance {x:.4g} with dimension {d} "
                                   f"(needs distance * dimension < {profile.domain})")
        total += c * (profile.f(x) * profile.g(d) + profile.h(x))
    return total


def _check_delta(delta: float, top: float, what: str) -> float:
    if not (-1e-12 <= delta <= top + 1e-9):
        raise ValidationError(f"{what} must lie in [0, {top:.6g}], got {delta}")
    return min(max(delta, 0.0), top)


def thm1_rhs(profile: M.ContinuityProfile, delta: float, d_s: int, d_e: int):
    _need(profile, M.BURES, "the Bures-error bound")
    delta = _check_delta(delta, SQRT2, "Bures error")
    return _combine(profile, [(1.0, 2 * SQRT2 * delta, d_e), (2.0, 2 * delta, d_s * d_e)])


def cor3_rhs(profile: M.ContinuityProfile, delta_dia: float, d_s: int, d_e: int):
    _need(profile, M.TRACE, "the diamond-error bound")
    x = _check_delta(delta_dia, 2.0, "diamond-norm error")
    return _combine(profile, [(1.0, 4 * math.sqrt(2 * x), d_e), (2.0, 4 * math.sqrt(x), d_s * d_e)])


def thm2_rhs(profile: M.ContinuityProfile, delta: float, d_s: int, d_e: int):
    _need(profile, M.BURES, "the pure-ancilla bound")
    delta = _check_delta(delta, SQRT2, "Bures error")
    return _combine(profile, [(2.0, 2 * (1 + SQRT2) * delta, d_e * d_s)])


def rhs_for(theorem: str, profile, delta, d_s, d_e):
    fn = {THM1: thm1_rhs, COR3: cor3_rhs, THM2: thm2_rhs}.get(theorem)
    if fn is None:
        raise ValidationError(f"unknown theorem {theorem!r}; expected one of {THEOREMS}")
    return fn(profile, delta, d_s, d_e)


def flavor_for(theorem: str) -> str:
    return M.TRACE if theorem == COR3 else M.BURES


# --- matching the measure to the theory --------------------------------------

def ancilla_measure(m: M.Measure, t: theories.Theory) -> M.Measure:
    """The same measure family on the ancilla of ``t``."""
    if isinstance(m, M._HamiltonianMeasure):
        if not isinstance(t, theories.EnergyConserving):
            raise ValidationError(f"{m.kind} pairs with the EnergyConserving theory, not {t.variant}")
        if m.h.shape != t.h_s.shape or not np.allclose(m.h, t.h_s, atol=1e-10):
            raise ValidationError(f"{m.kind} Hamiltonian differs from the theory's H_S")
        if isinstance(m, M.Athermality):
            return M.Athermality(t.h_e, m.temperature)
        return type(m)(t.h_e)
    if isinstance(m, M.RelEntCoherence):
        if not isinstance(t, theories.Incoherent):
            raise ValidationError(f"{m.kind} pairs with the Incoherent theory, not {t.variant}")
        return M.RelEntCoherence(t.d_e)
    if isinstance(m, M.EntanglementEntropyPure):
        if not isinstance(t, theories.LocalBipartite) or m.parties != ((t.d_sa, t.d_sb),):
            raise ValidationError(f"{m.kind} pairs with a LocalBipartite theory of matching system parties")
        return M.EntanglementEntropyPure([(t.d_ea, t.d_eb)])
    if isinstance(m, M.Mana):
        if not isinstance(t, theories.CliffordQupit) or t.d != m.d or t.n_s != m.n:
            raise ValidationError(f"{m.kind} pairs with a CliffordQupit theory of matching local dimension and size")
        return M.Mana(m.d, max(t.n_e, 1))
    if isinstance(m, M._QubitMagic):
        if not isinstance(t, theories.CliffordQubit) or t.n_s != m.n:
            raise ValidationError(f"{m.kind} pairs with a CliffordQubit theory of matching size")
        return type(m)(max(t.n_e, 1))
    raise ValidationError(f"no ancilla counterpart for {m.kind}")


def bound_profile(m: M.Measure, t: theories.Theory, flavor: str) -> M.ContinuityProfile:
    """A profile valid simultaneously for R on S, on E and on S (x) E.

    Only the Hamiltonian families depend on the concrete operators (through
    the spectral spread), so their profile is taken from the joint measure.
    """
    m_e = ancilla_measure(m, t)
    if isinstance(m, M._HamiltonianMeasure):
        return M.continuity_profile(m.tensor(m_e), flavor)
    return M.continuity_profile(m, flavor)


# --- certification ---------------------------------------------------------

@dataclass
class BoundReport:
    theorem: str
    theory: str
    measure: dict
    d_S: int
    d_E: int
    delta_used: float
    lhs: float
    rhs: object                 # float or NotApplicable
    certified: bool             # lhs is exact (otherwise a search lower bound)
    satisfied: bool
    slack: float | None
    status: str
    power_method: str = ""
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        rhs = self.rhs if not isinstance(self.rhs, M.NotApplicable) else {"NotApplicable": self.rhs.reason}
        return {"theorem": self.theorem, "theory": self.theory, "measure": self.measure, "d_S": self.d_S,
                "d_E": self.d_E, "delta": self.delta_used, "lhs": self.lhs, "rhs": rhs, "slack": self.slack,
                "certified": self.certified, "satisfied": self.satisfied, "status": self.status,
                "power_method": self.power_method, "notes": list(self.notes)}

    def csv_row(self) -> dict:
        rhs = "NotApplicable" if isinstance(self.rhs, M.NotApplicable) else self.rhs
        return {"theorem": self.theorem, "theory": self.theory, "measure": self.measure["kind"],
                "d_S": self.d_S, "d_E": self.d_E, "delta": repr(self.delta_used), "lhs": repr(self.lhs),
                "rhs": rhs if isinstance(rhs, str) else repr(rhs),
                "slack": "" if self.slack is None else repr(self.slack),
                "certified": self.certified, "satisfied": self.satisfied}


def make_report(theorem, t: theories.Theory, m: M.Measure, delta, lhs, certified, profile,
                power_method="", notes=()) -> BoundReport:
    rhs = rhs_for(theorem, profile, delta, t.d_s, t.d_e)
    notes = list(notes)
    if isinstance(profile.g, M.Constant):
        notes.append("g is dimension-independent for this measure; the bound cannot force ancilla growth")
    if isinstance(rhs, M.NotApplicable):
        return BoundReport(theorem, t.variant, m.to_json(), t.d_s, t.d_e, delta, lhs, rhs, certified,
                           True, None, "not-applicable", power_method, notes)
    slack = rhs - lhs
    ok = lhs <= rhs + SAT_TOL
    if ok:
        status = "satisfied"
    elif certified:
        status = "violated"
    else:
        status = "violation candidate: escalate"
    return BoundReport(theorem, t.variant, m.to_json(), t.d_s, t.d_e, delta, lhs, rhs, certified, ok, slack,
                       status, power_method, notes)


def _check_flags(m: M.Measure, theorem: str):
    need = "P3'" if theorem == THM2 else "P3"
    if not m.flags.get(need, False):
        raise ValidationError(f"{theorem} needs a measure with property {need}; {m.kind} does not have it"
                              + (" (use Thm2 with a pure ancilla)" if need == "P3" and m.flags.get("P3'") else ""))


def certify(impl: dynamics.ImplementationTuple, u_s, m: M.Measure, theorem: str = THM1, *,
            restarts: int = 32, power_restarts: int = 8, seed: int = 0, power=None) -> BoundReport:
    """Evaluate one bound on one implementation.

    ``power`` may carry a precomputed PowerResult for (m, u_s); it must be
    the pure-state power for Thm2.
    """
    if theorem not in THEOREMS:
        raise ValidationError(f"unknown theorem {theorem!r}; expected one of {THEOREMS}")
    _check_flags(m, theorem)
    t = impl.theory
    u = as_unitary(u_s)
    if u.shape[0] != t.d_s or m.dim != t.d_s:
        raise DimensionError(f"target ({u.shape[0]}) and measure ({m.dim}) must act on d_S = {t.d_s}")
    if theorem == THM2:
        top = float(np.linalg.eigvalsh(impl.rho_e)[-1])
        if top < 1 - 1e-9:
            raise ValidationError(f"Thm2 needs a pure ancilla state; rho_E has largest eigenvalue {top:.12f}")
    profile = bound_profile(m, t, flavor_for(theorem))
    if power is None:
        power = dynamics.power(m, u, pure_only=(theorem == THM2), restarts=power_restarts, seed=seed)
    lhs = power.value_G + power.value_L

    def error(k):
        if theorem == COR3:
            return dynamics.gate_error_diamond(impl, u, seed=seed).value
        return dynamics.gate_error_bures(impl, u, restarts=k * restarts, seed=seed).delta

    delta = error(1)
    rep = make_report(theorem, t, m, delta, lhs, power.certified, profile, power.method)
    if not rep.satisfied and theorem != COR3:
        # recheck the error with a larger budget before reporting
        delta2 = max(delta, error(4))
        rep = make_report(theorem, t, m, delta2, lhs, power.certified, profile, power.method,
                          notes=["rechecked with 4x restarts"])
    return rep


def reports_to_jsonl(reports) -> str:
    return "".join(dumps_line(r.to_json()) + "\n" for r in reports)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


# --- dimension scaling -----------------------------------------------------

def _g_at_log2(g, t: float) -> float:
    """g(2**t) without forming 2**t when g is logarithmic (the minimal d_E can exceed float range)."""
    if isinstance(g, M.Log2):
        return g.c * t
    if isinstance(g, M.Log2PlusConstant):
        return t + g.c
    if isinstance(g, M.Constant):
        return g.c
    y = math.inf if t > 1000 else 2.0 ** t
    return g(y)


def _rhs_log2(theorem: str, profile: M.ContinuityProfile, delta: float, d_s: int, t_e: float):
    """rhs at d_E = 2**t_e, or None when a domain predicate fails."""
    ls = math.log2(d_s)
    if theorem == THM1:
        terms = [(1.0, 2 * SQRT2 * delta, t_e), (2.0, 2 * delta, ls + t_e)]
    elif theorem == COR3:
        terms = [(1.0, 4 * math.sqrt(2 * delta), t_e), (2.0, 4 * math.sqrt(delta), ls + t_e)]
    else:
        terms = [(2.0, 2 * (1 + SQRT2) * delta, ls + t_e)]
    total = 0.0
    for c, x, t in terms:
        if profile.domain is not None and (x > 0 and math.log2(x) + t >= math.log2(profile.domain)):
            return None
        fx = profile.f(x)
        total += c * ((fx * _g_at_log2(profile.g, t) if fx else 0.0) + profile.h(x))
    return total


@dataclass
class DimensionPoint:
    delta: float
    d_E: int | None             # None when it exceeds int range or no d_E works
    log2_d_E: float | None      # None when no d_E works (lhs unreachable)


def min_ancilla_dimension(profile: M.ContinuityProfile, theorem: str, lhs: float, delta: float, d_s: int,
                          t_max: float = 4096.0) -> DimensionPoint:
    """Smallest d_E >= 1 with rhs(delta, d_E) >= lhs, found by bisection on log2 d_E (rhs is monotone in d_E)."""
    def ok(t):
        r = _rhs_log2(theorem, profile, delta, d_s, t)
        return r is not None and r >= lhs

    if lhs <= 0 or ok(0.0):
        return DimensionPoint(delta, 1, 0.0)
    hi = 1.0
    while not ok(hi):
        hi *= 2
        if hi > t_max:
            return DimensionPoint(delta, None, None)
    lo = hi / 2 if hi > 1 else 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    if hi > 62:
        return DimensionPoint(delta, None, hi)
    # settle on the integer: the real crossing is within one of ceil(2**hi)
    d = max(1, math.ceil(2.0 ** lo))
    while not ok(math.log2(d)):
        d += 1
    return DimensionPoint(delta, d, math.log2(d))


def min_dimension_curve(m: M.Measure, lhs: float, delta_grid, d_s: int | None = None, theorem: str = THM1,
                        profile: M.ContinuityProfile | None = None) -> list:
    """Minimal ancilla dimension for each error in ``delta_grid`` at fixed lhs (G+L or the pure variant).

    The profile defaults to the measure's own; for Hamiltonian measures pass
    the joint profile when the ancilla Hamiltonian matters.
    """
    d_s = m.dim if d_s is None else d_s
    profile = profile or M.continuity_profile(m, flavor_for(theorem))
    return [min_ancilla_dimension(profile, theorem, lhs, float(x), d_s) for x in delta_grid]


# --- exact implementations ---------------------------------------------------

def operator_basis_states(d: int) -> list:
    """d^2 density matrices spanning the operator space: |i>, (|i>+|j>)/sqrt2, (|i>+i|j>)/sqrt2."""
    out = []
    eye = np.eye(d, dtype=complex)
    for i in range(d):
        out.append(np.outer(eye[i], eye[i]))
    for i in range(d):
        for j in range(i + 1, d):
            for ph in (1.0, 1j):
                v = (eye[i] + ph * eye[j]) / SQRT2
                out.append(np.outer(v, v.conj()))
    return out


@dataclass
class ProductFormReport:
    residual: float
    sigma_e: np.ndarray
    per_input: list


def check_exact_product_form(v_se, phi_e, u_s) -> ProductFormReport:
    """max over a spanning set of inputs of || V (rho (x) phi) V^+ - U rho U^+ (x) sigma' ||_1."""
    u = as_unitary(u_s)
    v = as_unitary(v_se)
    phi = ket_to_dm(as_pure(phi_e))
    d_s, d_e = u.shape[0], phi.shape[0]
    if v.shape[0] != d_s * d_e:
        raise DimensionError(f"V_SE has dimension {v.shape[0]}, expected {d_s} x {d_e}")
    basis = operator_basis_states(d_s)
    sigma = None
    res = []
    for rho in basis:
        out = v @ np.kron(rho, phi) @ v.conj().T
        if sigma is None:
            sigma = partial_trace(out, 1, [d_s, d_e])
        res.append(trace_norm(out - np.kron(u @ rho @ u.conj().T, sigma)))
    return ProductFormReport(max(res), sigma, res)


def check_nogo_condition(m_joint: M.Measure, v_se, phi_e, u_s, samples: int = 32, seed: int = 0,
                         tol: float = 1e-8, states=()) -> float:
    """max over sampled rho of |R(rho (x) phi) - R(U rho U^+ (x) sigma')| for an exact implementation.

    ``states`` are probed in addition to the random samples (e.g. the maximiser of the power).
    """
    rep = check_exact_product_form(v_se, phi_e, u_s)
    if rep.residual > tol:
        raise ValidationError(f"implementation is not exact (product-form residual {rep.residual:.3e} > {tol:g})")
    u = as_unitary(u_s)
    phi = ket_to_dm(as_pure(phi_e))
    if m_joint.dim != u.shape[0] * phi.shape[0]:
        raise DimensionError(f"joint measure has dimension {m_joint.dim}, expected {u.shape[0] * phi.shape[0]}")
    rng = np.random.default_rng(seed)
    probes = [random_density(u.shape[0], rng) for _ in range(samples)] + [to_density(s) for s in states]
    worst = 0.0
    for rho in probes:
        a = m_joint.value(np.kron(rho, phi))
        b = m_joint.value(np.kron(u @ rho @ u.conj().T, rep.sigma_e))
        worst = max(worst, abs(a - b))
    return worst


def ancilla_resource_change(m_e: M.Measure, phi_e, sigma_e) -> float:
    """|R(phi) - R(sigma')|; zero for exact implementations under subadditive monotones."""
    return abs(m_e.value(ket_to_dm(as_pure(phi_e))) - m_e.value(sigma_e))
