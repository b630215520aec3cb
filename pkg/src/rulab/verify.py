"""Randomised invariant suites, one per module, used by ``rulab verify``.

Every check records how many instances it ran, the largest violation seen
and the tolerance it was held to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds, dynamics, stab, theories
from . import measures as M
from .optim import diamond, magic
from .optim.sdp import LmiBlock, SdpProblem, solve_sdp
from .optim.search import PureStateChart, multi_restart_search
from .qlinalg import (ValidationError, bures_distance, haar_unitary, partial_trace, random_density, random_pure,
                      trace_distance, uhlmann_fidelity)


@dataclass
class Invariant:
    name: str
    count: int = 0
    max_violation: float = 0.0
    tol: float = 0.0

    def record(self, violation: float):
        self.count += 1
        self.max_violation = max(self.max_violation, float(violation))

    @property
    def passed(self) -> bool:
        return self.count > 0 and self.max_violation <= self.tol

    def to_json(self) -> dict:
        return {"name": self.name, "count": int(self.count), "max_violation": float(self.max_violation),
                "tol": float(self.tol), "passed": bool(self.passed)}


@dataclass
class SuiteResult:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"suite": self.suite, "passed": bool(self.passed), "checks": [c.to_json() for c in self.checks]}


def _suite_qlinalg(rng, trials):
    fvdg = Invariant("fidelity-trace sandwich 1-F <= T <= sqrt(1-F^2)", tol=1e-9)
    ptr = Invariant("partial trace of a product", tol=1e-12)
    tri = Invariant("Bures triangle inequality", tol=1e-9)
    for _ in range(trials):
        d = int(rng.integers(2, 5))
        r, s, w = (random_density(d, rng) for _ in range(3))
        f = uhlmann_fidelity(r, s)
        t = 0.5 * trace_distance(r, s)
        fvdg.record(max(1 - f - t, t - math.sqrt(max(0.0, 1 - f * f))))
        a = random_density(3, rng)
        ptr.record(np.max(np.abs(partial_trace(np.kron(r, a), 0, [d, 3]) - r)))
        tri.record(bures_distance(r, s) - bures_distance(r, w) - bures_distance(w, s))
    return [fvdg, ptr, tri]


def _suite_stab(rng, trials):
    counts = Invariant("stabilizer state counts 6/60/1080", tol=0.0)
    for n, want in ((1, 6), (2, 60), (3, 1080)):
        counts.record(abs(len(stab.enumerate_stabilizer_states(n).states) - want))
    cliff = Invariant("generator words are Clifford", tol=1e-9)
    for d, n in ((2, 2), (3, 1), (3, 2)):
        gens = stab.generator_set(d, n)
        for _ in range(max(1, trials // 4)):
            word = rng.integers(0, len(gens), size=8)
            cliff.record(stab.is_clifford(stab.word_to_unitary(word, d, n), d, n))
    wig = Invariant("phase-point operators: unit trace, sum d*I", tol=1e-10)
    for d in (3, 5):
        ops = stab.phase_point_operators(d).operators
        wig.record(max(np.max(np.abs(np.trace(ops, axis1=1, axis2=2) - 1)),
                       np.max(np.abs(ops.sum(axis=0) - d * np.eye(d)))))
    return [counts, cliff, wig]


def _suite_theories(rng, trials):
    member = Invariant("sampled free unitaries pass membership", tol=theories.FREE_TOL)
    trip = Invariant("project/decode round trip", tol=1e-8)
    ts = [theories.EnergyConserving(np.diag([0.0, 1.0]), np.diag([0.0, 1.0, 2.0])), theories.Incoherent(2, 2),
          theories.LocalBipartite(2, 2, 1, 2), theories.CliffordQubit(1, 1), theories.CliffordQupit(3, 1, 1)]
    for k in range(trials):
        t = ts[k % len(ts)]
        u = theories.sample_free(t, rng)
        member.record(theories.free_residual(u, t))
        back = theories.decode(theories.project(u, t))
        trip.record(np.max(np.abs(back - u)))
    return [member, trip]


def _suite_measures(rng, trials):
    out = []
    ms = [M.EnergyExpectation(np.diag([0.0, 1.0, 2.0])), M.WignerYanase(np.diag([0.0, 1.0])),
          M.Athermality(np.diag([0.0, 1.0]), 1.0), M.RelEntCoherence(3), M.EntanglementEntropyPure((2, 2)),
          M.Mana(3), M.LogStabilizerExtent(1), M.DmaxMagic(1)]
    for m in ms:
        rep = M.check_properties(m, trials=max(2, trials // 2), seed=int(rng.integers(1 << 30)))
        for c in rep.checks:
            if not c.flagged:
                continue
            inv = Invariant(f"{m.kind} {c.prop} ({c.note})", tol=c.tolerance)
            inv.count, inv.max_violation = max(c.trials, 1), c.max_violation
            out.append(inv)
    return out


def _random_impl(rng, d_s=2, d_e=2):
    t = theories.EnergyConserving(np.diag(np.arange(d_s, dtype=float)), np.diag(np.arange(d_e, dtype=float)))
    return dynamics.ImplementationTuple(t, theories.sample_free(t, rng), random_density(d_e, rng))


def _suite_dynamics(rng, trials):
    lemma1 = Invariant("no-correlation: lhs1 <= 2 delta(rho)", tol=1e-8)
    lemma2 = Invariant("no-correlation: L(sigma0_E, sigma1_E) <= 2 sqrt2 delta(mixture)", tol=1e-8)
    flav = Invariant("delta_bures <= sqrt(delta_diamond)", tol=1e-6)
    exact = Invariant("energy power: spectral vs search", tol=1e-7)
    tp = Invariant("induced channel preserves trace", tol=1e-10)
    for _ in range(trials):
        impl = _random_impl(rng)
        u = haar_unitary(2, rng)
        nc = dynamics.no_correlation_quantities(impl, u, random_density(2, rng), random_density(2, rng))
        for key in ("0", "1", "0+1"):
            lemma1.record(nc.lhs1[key] - 2 * nc.delta[key])
        lemma2.record(nc.lhs2_direct - 2 * math.sqrt(2) * nc.delta["0+1"])
        tp.record(abs(np.trace(dynamics.induced_channel(impl, random_density(2, rng))) - 1))
    for _ in range(max(1, trials // 5)):
        impl = _random_impl(rng)
        u = haar_unitary(2, rng)
        db = dynamics.gate_error_bures(impl, u, restarts=8).delta
        dd = dynamics.gate_error_diamond(impl, u).value
        flav.record(db - math.sqrt(dd))
        m = M.EnergyExpectation(np.diag([0.0, 1.0]))
        p = dynamics.energy_power(m.h, u)
        k = u.conj().T @ m.h @ u - m.h
        res = multi_restart_search(lambda v: float(np.real(np.vdot(v, k @ v))), PureStateChart(2), 4,
                                   int(rng.integers(1 << 30)), maximize=True)
        exact.record(abs(res.best_value - p.value_G))
    return [lemma1, lemma2, flav, exact, tp]


def _suite_optim(rng, trials):
    duality = Invariant("SDP weak duality primal >= dual", tol=1e-9)
    dm = Invariant("D_max vertex primal vs dual", tol=1e-6)
    feas = Invariant("extent decomposition residual", tol=1e-8)
    sand = Invariant("diamond sandwich lower <= SDP <= upper", tol=1e-6)
    one = stab.enumerate_stabilizer_states(1)
    two = stab.enumerate_stabilizer_states(2)
    for k in range(max(1, trials // 2)):
        n = 1 + k % 2
        d = 2 ** n
        rho = random_density(d, rng)
        r = magic.dmax_result(rho, one if n == 1 else two)
        dm.record(abs(r.value - r.dual_value))
        c = rng.normal(size=3)
        sol = solve_sdp(SdpProblem(np.array([1.0]), [LmiBlock(-np.diag(np.abs(c) + 0.1), -np.eye(3)[None])]))
        duality.record(sol.dual_value - sol.primal_value)
        psi = random_pure(2, rng)
        e = magic.stabilizer_extent_result(psi, one)
        feas.record(e.residual)
        u, v = haar_unitary(2, rng), haar_unitary(2, rng)
        J = diamond.choi_from_unitary(u) - diamond.choi_from_unitary(v)
        res = diamond.diamond_norm_result(J, 2, 2)
        sand.record(max(res.lower - res.value, res.value - res.upper))
    return [duality, dm, feas, sand]


def _suite_bounds(rng, trials):
    sat = Invariant("Thm1 reports satisfied on random energy/incoherent instances", tol=0.0)
    mono = Invariant("rhs nondecreasing in delta and d_E", tol=1e-12)
    for k in range(max(1, trials // 2)):
        if k % 2 == 0:
            impl = _random_impl(rng, 2, int(rng.integers(2, 4)))
            m = M.EnergyExpectation(np.diag([0.0, 1.0]))
        else:
            t = theories.Incoherent(2, 2)
            impl = dynamics.ImplementationTuple(t, theories.sample_free(t, rng), random_density(2, rng))
            m = M.RelEntCoherence(2)
        rep = bounds.certify(impl, haar_unitary(2, rng), m, bounds.THM1, restarts=8, power_restarts=2,
                             seed=int(rng.integers(1 << 30)))
        sat.record(0.0 if rep.satisfied else 1.0)
        prof = M.continuity_profile(m, M.BURES)
        x = float(rng.random())
        a = bounds.thm1_rhs(prof, x, 2, 2)
        b = bounds.thm1_rhs(prof, min(x + 0.1, math.sqrt(2)), 2, 2)
        c = bounds.thm1_rhs(prof, x, 2, 3)
        mono.record(max(a - b, a - c))
    return [sat, mono]


SUITES = {"qlinalg": _suite_qlinalg, "stab": _suite_stab, "theories": _suite_theories,
          "measures": _suite_measures, "dynamics": _suite_dynamics, "optim": _suite_optim,
          "bounds": _suite_bounds}


def run_suites(names, seed: int, trials: int = 10) -> list:
    if names == ["all"] or names == "all":
        names = list(SUITES)
    out = []
    for k, name in enumerate(names):
        if name not in SUITES:
            raise ValidationError(f"unknown suite {name!r}; expected 'all' or one of {sorted(SUITES)}")
        rng = np.random.default_rng([seed, k])
        out.append(SuiteResult(name, SUITES[name](rng, trials)))
    return out


__all__ = ["Invariant", "SuiteResult", "SUITES", "run_suites"]
