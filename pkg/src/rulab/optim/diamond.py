"""Diamond norm of a difference of channels, with closed forms and cheap bounds for cross-checking.

Choi matrices here are unnormalised with the input factor first:
``J = sum_ij |i><j| (x) Phi(|i><j|)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

from ..qlinalg import ValidationError, as_unitary, trace_norm
from .sdp import LmiBlock, SdpProblem, hermitian_basis, require_optimal, solve_sdp


def choi_from_kraus(kraus, d_in: int) -> np.ndarray:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    d_out = kraus[0].shape[0]
    J = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in kraus:
        # vec of K with the input index first: |K>> = sum_i |i> (x) K|i>
        v = k.T.reshape(-1)
        J += np.outer(v, v.conj())
    return J


def choi_from_unitary(u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    return choi_from_kraus([u], u.shape[1])


def apply_choi(J: np.ndarray, rho: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Phi(rho) = Tr_in[(rho^T (x) I) J]."""
    J4 = J.reshape(d_in, d_out, d_in, d_out)
    return np.einsum("ki,iakb->ab", rho, J4)


def apply_choi_with_reference(J: np.ndarray, A: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """(Phi (x) id)(|psi><psi|) for |psi> = sum_ij A_ij |i>_in |j>_ref."""
    J4 = J.reshape(d_in, d_out, d_in, d_out)
    out = np.einsum("ij,kl,iakb->ajbl", A, A.conj(), J4)
    r = A.shape[1]
    return out.reshape(d_out * r, d_out * r)


@dataclass
class DiamondResult:
    value: float
    gap: float
    lower: float       # best pure input with reference
    upper: float       # ||J||_1, i.e. d_in times the trace norm of the normalised Choi matrix
    iterations: int


def _check(J, d_in, d_out):
    J = np.asarray(J, dtype=complex)
    if J.shape != (d_in * d_out, d_in * d_out):
        raise ValidationError(f"Choi matrix shape {J.shape} does not match d_in={d_in}, d_out={d_out}")
    if np.max(np.abs(J - J.conj().T)) > 1e-9:
        raise ValidationError("Choi matrix of a channel difference must be Hermitian")
    return J


def diamond_sdp(J, d_in: int, d_out: int):
    """Watrous's program: max Re Tr[J W]  s.t.  0 <= W <= sigma (x) I,  Tr sigma = 1; norm = 2 * value."""
    J = _check(J, d_in, d_out)
    n = d_in * d_out
    bw = hermitian_basis(n)
    bs = hermitian_basis(d_in)
    mw, ms = len(bw), len(bs)
    c = np.concatenate([-np.einsum("ij,kji->k", J, bw).real, np.zeros(ms)])
    eye_out = np.eye(d_out)
    lifted = np.array([np.kron(b, eye_out) for b in bs])
    block_w = LmiBlock(np.zeros((n, n)), np.concatenate([-bw, np.zeros((ms, n, n))]))
    block_gap = LmiBlock(np.zeros((n, n)), np.concatenate([bw, -lifted]))
    A = np.concatenate([np.zeros(mw), np.trace(bs, axis1=1, axis2=2).real])[None, :]
    prob = SdpProblem(c=c, blocks=[block_w, block_gap], A=A, b=np.array([1.0]))
    return prob


def diamond_norm_result(J, d_in: int, d_out: int, *, lower_restarts: int = 4, seed: int = 0) -> DiamondResult:
    prob = diamond_sdp(J, d_in, d_out)
    sol = require_optimal(solve_sdp(prob), "diamond norm")
    value = max(0.0, -2.0 * sol.primal_value)
    lower = pure_input_lower_bound(J, d_in, d_out, restarts=lower_restarts, seed=seed)
    return DiamondResult(value, 2.0 * sol.gap, lower, trace_norm(J), sol.iterations)


def diamond_norm(J, d_in: int, d_out: int) -> float:
    prob = diamond_sdp(J, d_in, d_out)
    sol = require_optimal(solve_sdp(prob), "diamond norm")
    return max(0.0, -2.0 * sol.primal_value)


def pure_input_lower_bound(J, d_in: int, d_out: int, *, restarts: int = 4, seed: int = 0,
                           reference: bool = True) -> float:
    """max over pure inputs (optionally entangled with a d_in-dim reference) of the output trace norm."""
    J = np.asarray(J, dtype=complex)
    r = d_in if reference else 1
    rng = np.random.default_rng(seed)
    size = d_in * r

    def neg(x):
        A = (x[:size] + 1j * x[size:]).reshape(d_in, r)
        nrm = np.linalg.norm(A)
        if nrm < 1e-12:
            return 0.0
        return -trace_norm(apply_choi_with_reference(J, A / nrm, d_in, d_out))

    best = 0.0
    for _ in range(restarts):
        x0 = rng.standard_normal(2 * size)
        res = minimize(neg, x0, method="L-BFGS-B", options={"maxiter": 200})
        best = max(best, -float(res.fun))
    return best


def numerical_range_distance(m) -> float:
    """Distance from 0 to the numerical range of a normal matrix (convex hull of its eigenvalues)."""
    ev = np.linalg.eigvals(np.asarray(m, dtype=complex))
    pts = np.column_stack([ev.real, ev.imag])
    return _hull_distance(pts)


def _hull_distance(pts: np.ndarray) -> float:
    uniq = np.unique(np.round(pts, 12), axis=0)
    if len(uniq) == 1:
        return float(np.linalg.norm(uniq[0]))
    try:
        hull = ConvexHull(uniq)
    except QhullError:
        # collinear points: the hull is a segment between the extreme points
        direction = uniq[-1] - uniq[0]
        t = uniq @ direction
        a, b = uniq[np.argmin(t)], uniq[np.argmax(t)]
        return _segment_distance(a, b)
    # origin inside the hull?
    if np.all(hull.equations[:, -1] <= 1e-14):
        return 0.0
    return min(_segment_distance(uniq[i], uniq[j]) for i, j in hull.simplices)


def _segment_distance(a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else float(np.clip(-(a @ ab) / denom, 0.0, 1.0))
    return float(np.linalg.norm(a + t * ab))


def sampled_numerical_range_distance(m, samples: int = 10_000, seed: int = 0) -> float:
    """Coarse oracle: min |<psi|M|psi>| over Haar-random unit vectors."""
    m = np.asarray(m, dtype=complex)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, m.shape[0])) + 1j * rng.standard_normal((samples, m.shape[0]))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    vals = np.einsum("si,ij,sj->s", v.conj(), m, v)
    return float(np.min(np.abs(vals)))


def unitary_diamond_distance(u, v) -> float:
    """Closed form ||U.U^+ - V.V^+||_diamond = 2 sqrt(1 - delta^2), delta = dist(0, W(U^+ V))."""
    u, v = as_unitary(u), as_unitary(v)
    delta = numerical_range_distance(u.conj().T @ v)
    return 2.0 * float(np.sqrt(max(0.0, 1.0 - delta ** 2)))
