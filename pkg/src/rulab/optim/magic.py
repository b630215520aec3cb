"""Magic monotones over the stabilizer polytope: D_max (primal and dual) and the stabilizer extent."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..qlinalg import ValidationError, as_density, as_pure
from .sdp import (LmiBlock, SdpProblem, SolverError, hermitian_basis,
                  require_optimal, solve_sdp)


def _projectors(dictionary) -> np.ndarray:
    states = np.asarray(dictionary.states)
    return np.einsum("ki,kj->kij", states, states.conj())


def _check_dims(dim: int, dictionary) -> None:
    if dim != 2 ** dictionary.n:
        raise ValidationError(
            f"state dimension {dim} does not match {dictionary.n}-qubit stabilizer dictionary")


@dataclass
class DmaxResult:
    value: float          # log2 of the primal optimum
    dual_value: float     # log2 of the dual optimum
    weights: np.ndarray   # vertex weights, sum = 2**value
    primal_gap: float     # |primal - dual| on the linear scale


def dmax_primal(rho, dictionary):
    """min sum w  s.t.  sum_i w_i |phi_i><phi_i| >= rho,  w >= 0."""
    rho = as_density(rho)
    _check_dims(rho.shape[0], dictionary)
    proj = _projectors(dictionary)
    N = len(proj)
    prob = SdpProblem(c=np.ones(N), blocks=[LmiBlock(-rho, -proj)],
                      G=-np.eye(N), h=np.zeros(N))
    return require_optimal(solve_sdp(prob), "D_max vertex primal")


def dmax_dual(rho, dictionary):
    """max Tr[rho X]  s.t.  X >= 0,  Tr[phi_i X] <= 1 for every vertex."""
    rho = as_density(rho)
    d = rho.shape[0]
    _check_dims(d, dictionary)
    basis = hermitian_basis(d)
    proj = _projectors(dictionary)
    c = -np.einsum("ij,kji->k", rho, basis).real
    G = np.einsum("nij,kji->nk", proj, basis).real
    prob = SdpProblem(c=c, blocks=[LmiBlock(np.zeros((d, d)), -basis)],
                      G=G, h=np.ones(len(proj)))
    return require_optimal(solve_sdp(prob), "D_max dual")


def dmax_result(rho, dictionary) -> DmaxResult:
    p = dmax_primal(rho, dictionary)
    q = dmax_dual(rho, dictionary)
    primal = float(np.sum(p.x))
    dual = float(-q.primal_value)
    return DmaxResult(float(np.log2(primal)), float(np.log2(dual)), p.x, abs(primal - dual))


def dmax(rho, dictionary) -> float:
    """Max-relative entropy of magic, log2 of the vertex-primal optimum (clamped at 0)."""
    return max(0.0, dmax_result(rho, dictionary).value)


@dataclass
class ExtentResult:
    value: float            # (sum |c_i|)^2 of the returned decomposition
    lower: float            # squared dual certificate value
    coefficients: np.ndarray
    gap: float              # ||c||_1 - dual value
    iterations: int
    converged: bool
    residual: float         # ||Phi c - psi||_2
    method: str = "admm"


def _soft(v: np.ndarray, tau: float) -> np.ndarray:
    mag = np.abs(v)
    scale = np.maximum(0.0, 1.0 - tau / np.maximum(mag, 1e-300))
    return v * scale


def l1_basis_pursuit(phi: np.ndarray, psi: np.ndarray, *, gap_tol: float = 1e-7,
                     max_iter: int = 2000, rho: float = 1.0) -> ExtentResult:
    """min ||c||_1 over complex c with phi @ c = psi, by ADMM on (affine set, l1 norm).

    Stops when the primal value of the affine iterate and the value of a
    rescaled dual-feasible point differ by at most ``gap_tol``.
    """
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    gram_inv = np.linalg.inv(phi @ phi.conj().T)
    pinv = phi.conj().T @ gram_inv

    def project(v):
        return v - pinv @ (phi @ v - psi)

    x0 = pinv @ psi
    z = x0.copy()
    u = np.zeros_like(z)
    best = (np.inf, -np.inf, x0)
    it = 0
    for it in range(1, max_iter + 1):
        x = project(z - u)
        z_old = z
        z = _soft(x + u, 1.0 / rho)
        u = u + x - z
        if it % 10 == 0 or it == 1:
            # feasible primal: the affine iterate, or the sparse iterate pulled back onto the affine set
            for cand in (x, project(z)):
                val = float(np.sum(np.abs(cand)))
                if val < best[0]:
                    best = (val, best[1], cand)
            y = gram_inv @ (phi @ (rho * u))
            s = float(np.max(np.abs(phi.conj().T @ y)))
            if s > 0:
                dual = float(np.real(np.vdot(y, psi))) / max(s, 1.0)
                if dual > best[1]:
                    best = (best[0], dual, best[2])
            if best[0] - best[1] <= gap_tol:
                break
            # residual balancing keeps the penalty well scaled
            r = np.linalg.norm(x - z)
            sres = rho * np.linalg.norm(z - z_old)
            if r > 10 * sres:
                rho *= 2.0
                u /= 2.0
            elif sres > 10 * r:
                rho /= 2.0
                u *= 2.0
    val, dual, c = best
    gap = val - dual
    resid = float(np.linalg.norm(phi @ c - psi))
    return ExtentResult(val ** 2, max(dual, 0.0) ** 2, c, gap, it, gap <= gap_tol, resid)


def l1_socp(phi: np.ndarray, psi: np.ndarray, *, gap_tol: float = 1e-7) -> ExtentResult:
    """Same problem through its dual, max Re<y, psi> s.t. |<phi_i, y>| <= 1, as a second-order cone program.

    The dual has only 2 * dim real variables, so the interior-point method
    stays cheap for the 1080-element three-qubit dictionary.  The primal
    coefficients are the cone multipliers.
    """
    from cvxopt import matrix, solvers

    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    D, N = phi.shape
    re, im = phi.real.T, phi.imag.T
    G = np.zeros((3 * N, 2 * D))
    G[1::3, :D], G[1::3, D:] = -re, -im
    G[2::3, :D], G[2::3, D:] = im, -re
    h = np.zeros(3 * N)
    h[0::3] = 1.0
    cost = -np.concatenate([psi.real, psi.imag])
    sol = None
    for tol in (1e-9, 1e-8):
        try:
            sol = solvers.conelp(matrix(cost), matrix(G), matrix(h), {"l": 0, "q": [3] * N, "s": []},
                                 options={"show_progress": False, "abstol": tol, "reltol": tol,
                                          "feastol": tol, "maxiters": 200})
        except (ValueError, ArithmeticError):
            continue
        if sol["status"] == "optimal":
            break
    if sol is None or sol["z"] is None:
        return ExtentResult(np.inf, 0.0, np.zeros(N, dtype=complex), np.inf, 0, False, np.inf, "socp")
    z = np.array(sol["z"]).reshape(N, 3)
    c = -(z[:, 1] + 1j * z[:, 2])
    c = c - phi.conj().T @ np.linalg.solve(phi @ phi.conj().T, phi @ c - psi)
    xv = np.array(sol["x"]).reshape(-1)
    y = xv[:D] + 1j * xv[D:]
    s = float(np.max(np.abs(phi.conj().T @ y)))
    dual = float(np.real(np.vdot(y, psi))) / max(s, 1.0)
    val = float(np.sum(np.abs(c)))
    gap = val - dual
    return ExtentResult(val ** 2, max(dual, 0.0) ** 2, c, gap, int(sol["iterations"]), gap <= gap_tol,
                        float(np.linalg.norm(phi @ c - psi)), "socp")


def stabilizer_extent_result(psi, dictionary, **kw) -> ExtentResult:
    """ADMM basis pursuit; if it has not certified the gap within its budget, the dual cone program finishes."""
    psi = as_pure(psi)
    _check_dims(len(psi), dictionary)
    phi = np.asarray(dictionary.states).T
    res = l1_basis_pursuit(phi, psi, **kw)
    if res.converged:
        return res
    alt = l1_socp(phi, psi, gap_tol=kw.get("gap_tol", 1e-7))
    return alt if alt.converged or alt.gap < res.gap else res


def stabilizer_extent(psi, dictionary, **kw) -> float:
    res = stabilizer_extent_result(psi, dictionary, **kw)
    if not res.converged:
        raise SolverError(
            f"stabilizer extent: basis pursuit did not converge ({res.method}, {res.iterations} iterations, "
            f"gap {res.gap:.2e}, residual {res.residual:.2e})", res)
    return res.value


def extent_subset_oracle(psi, states, max_support: int = 3) -> float:
    """Brute force: minimise (sum |c|)^2 over exact decompositions on every subset of size <= max_support.

    Subsets whose span is the full space leave a family of decompositions;
    those are minimised with a small SOCP-free search over the null space.
    """
    from itertools import combinations

    from scipy.optimize import minimize

    psi = np.asarray(psi, dtype=complex)
    states = np.asarray(states, dtype=complex)
    best = np.inf
    for k in range(1, max_support + 1):
        for sub in combinations(range(len(states)), k):
            A = states[list(sub)].T
            c0, *_ = np.linalg.lstsq(A, psi, rcond=None)
            if np.linalg.norm(A @ c0 - psi) > 1e-10:
                continue
            _, sv, vh = np.linalg.svd(A)
            rank = int(np.sum(sv > 1e-10))
            null = vh[rank:].conj().T
            if null.shape[1] == 0:
                best = min(best, float(np.sum(np.abs(c0))) ** 2)
                continue
            nn = null.shape[1]

            def f(t):
                c = c0 + null @ (t[:nn] + 1j * t[nn:])
                return float(np.sum(np.sqrt(np.abs(c) ** 2 + 1e-30)))

            vals = []
            for start in (np.zeros(2 * nn), np.ones(2 * nn) * 0.1, -np.ones(2 * nn) * 0.1):
                r = minimize(f, start, method="Nelder-Mead",
                             options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
                vals.append(r.fun)
            best = min(best, min(vals) ** 2)
    return best
