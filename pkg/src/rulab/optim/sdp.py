"""Small dense semidefinite programs over Hermitian blocks.

Problem form (real variables x in R^m)::

    minimize    c . x
    subject to  F0_k - sum_i x_i F_ik  >= 0     (Hermitian PSD, one per block k)
                G x <= h                          (componentwise)
                A x  = b

Complex Hermitian blocks are embedded as real symmetric blocks
``[[Re M, -Im M], [Im M, Re M]]`` and handed to the primal-dual
interior-point solver of cvxopt (Nesterov-Todd scaling with Mehrotra
correction).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..qlinalg import RulabError

GAP_TOL = 1e-6
FEAS_TOL = 1e-7


class SolverError(RulabError):
    """A numerical solver failed; carries the solution object with residuals."""

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


def embed(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def unembed(e: np.ndarray) -> np.ndarray:
    n = e.shape[0] // 2
    return e[:n, :n] + 1j * e[n:, :n]


def hermitian_basis(n: int) -> np.ndarray:
    """Real-coefficient basis of n x n Hermitian matrices, shape (n*n, n, n)."""
    out = []
    for k in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[k, k] = 1.0
        out.append(e)
    for k in range(n):
        for l in range(k + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[k, l] = e[l, k] = 1.0
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[k, l], e[l, k] = 1j, -1j
            out.append(e)
    return np.array(out)


def hermitian_from_coords(x: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(x, hermitian_basis(n), axes=1)


@dataclass
class LmiBlock:
    f0: np.ndarray            # (n, n) Hermitian
    coeffs: np.ndarray        # (m, n, n) Hermitian


@dataclass
class SdpProblem:
    c: np.ndarray
    blocks: list = field(default_factory=list)
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    @property
    def n_vars(self) -> int:
        return len(self.c)


@dataclass
class SdpSolution:
    x: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    iterations: int
    status: Status
    primal_residual: float
    dual_residual: float
    block_duals: list

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def solve_sdp(p: SdpProblem, *, max_iter: int = 200, tol: float = 1e-9,
              feastol: float = 1e-8) -> SdpSolution:
    """Solve ``p``; if the interior-point run stalls, retry with a looser gap target.

    Very tight gap targets can push the solver past the point where its
    Newton systems stay well conditioned, so a stalled run is retried at
    10x and 100x the target before giving up.
    """
    sol = None
    for t in (tol, 10 * tol, 100 * tol):
        sol = _solve_once(p, max_iter, t, max(feastol, t))
        if sol.status is not Status.MAX_ITER:
            return sol
    return sol


def _solve_once(p: SdpProblem, max_iter: int, tol: float, feastol: float) -> SdpSolution:
    from cvxopt import matrix, solvers

    m = p.n_vars
    c = matrix(np.asarray(p.c, dtype=float).reshape(-1, 1))
    Gs, hs = [], []
    for blk in p.blocks:
        f0 = embed(blk.f0)
        cols = np.stack([embed(f).reshape(-1, order="F") for f in blk.coeffs], axis=1)
        Gs.append(matrix(cols.reshape(f0.size, m)))
        hs.append(matrix(f0))
    kwargs = {}
    if p.G is not None and len(p.G):
        kwargs["Gl"] = matrix(np.asarray(p.G, dtype=float).reshape(-1, m))
        kwargs["hl"] = matrix(np.asarray(p.h, dtype=float).reshape(-1, 1))
    if p.A is not None and len(p.A):
        kwargs["A"] = matrix(np.asarray(p.A, dtype=float).reshape(-1, m))
        kwargs["b"] = matrix(np.asarray(p.b, dtype=float).reshape(-1, 1))
    opts = {"show_progress": False, "maxiters": max_iter,
            "abstol": tol, "reltol": tol, "feastol": feastol}
    res = solvers.sdp(c, Gs=Gs or None, hs=hs or None, options=opts, **kwargs)

    if res["x"] is None:
        return SdpSolution(np.full(m, np.nan), np.nan, np.nan, np.inf, int(res.get("iterations", 0)),
                           Status.INFEASIBLE, np.inf, np.inf, [])
    x = np.array(res["x"]).reshape(-1)
    pobj = float(res["primal objective"])
    dobj = float(res["dual objective"])
    gap = abs(pobj - dobj)
    pres = float(res["primal infeasibility"] or 0.0)
    dres = float(res["dual infeasibility"] or 0.0)
    raw = res["status"]
    if raw in ("primal infeasible", "dual infeasible"):
        status = Status.INFEASIBLE
    elif gap <= GAP_TOL and pres <= FEAS_TOL and dres <= FEAS_TOL:
        status = Status.OPTIMAL
    else:
        status = Status.MAX_ITER
    zs = [unembed(np.array(z)) for z in res["zs"]] if res["zs"] else []
    return SdpSolution(x, pobj, dobj, gap, int(res["iterations"]), status, pres, dres, zs)


def require_optimal(sol: SdpSolution, what: str) -> SdpSolution:
    if not sol.optimal:
        raise SolverError(
            f"{what}: status {sol.status.value}, gap {sol.gap:.2e}, "
            f"primal residual {sol.primal_residual:.2e}, dual residual {sol.dual_residual:.2e}",
            sol,
        )
    return sol


def dump_sdpa(p: SdpProblem, path) -> None:
    """Write ``p`` (real-embedded) in SDPA sparse format.

    SDPA solves min c.x s.t. sum_i x_i F_i - F_0 >= 0, so every matrix is
    written with its sign flipped.  Linear inequalities become one diagonal
    block; each equality is written as a pair of inequalities.
    """
    m = p.n_vars
    blocks = [embed(b.f0) for b in p.blocks]
    coeffs = [[embed(f) for f in b.coeffs] for b in p.blocks]
    lin_rows, lin_rhs = [], []
    if p.G is not None and len(p.G):
        lin_rows.append(np.asarray(p.G, dtype=float))
        lin_rhs.append(np.asarray(p.h, dtype=float))
    if p.A is not None and len(p.A):
        A = np.asarray(p.A, dtype=float)
        bb = np.asarray(p.b, dtype=float)
        lin_rows += [A, -A]
        lin_rhs += [bb, -bb]
    sizes = [b.shape[0] for b in blocks]
    if lin_rows:
        Gl = np.vstack(lin_rows)
        hl = np.concatenate(lin_rhs)
        sizes.append(-len(hl))
    lines = [
        '"rulab SDP dump: min c.x s.t. sum_i x_i F_i - F_0 >= 0 (Hermitian blocks real-embedded)',
        f"{m} = mDIM",
        f"{len(sizes)} = nBLOCK",
        " ".join(str(s) for s in sizes) + " = bLOCKsTRUCT",
        " ".join(repr(float(v)) for v in p.c),
    ]

    def emit(mat_no, blk_no, mat):
        n = mat.shape[0]
        for i in range(n):
            for j in range(i, n):
                if mat[i, j] != 0.0:
                    lines.append(f"{mat_no} {blk_no} {i + 1} {j + 1} {float(mat[i, j])!r}")

    for k, f0 in enumerate(blocks, start=1):
        emit(0, k, -f0)
    if lin_rows:
        emit(0, len(blocks) + 1, np.diag(-hl))
    for i in range(m):
        for k, cf in enumerate(coeffs, start=1):
            emit(i + 1, k, -cf[i])
        if lin_rows:
            emit(i + 1, len(blocks) + 1, np.diag(-Gl[:, i]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
