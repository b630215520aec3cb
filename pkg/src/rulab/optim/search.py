"""Multi-restart local search over smooth charts.

A chart maps an unconstrained real vector onto the object being optimised
(a state, a unitary, ...).  Starting points come from a scrambled Halton
sequence pushed through the normal quantile, so runs are reproducible from
the seed and cover the coordinate space evenly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri
from scipy.stats import qmc


class Chart:
    """Base chart: identity map on R^dim."""

    dim: int = 0
    scale: float = 1.0

    def point(self, x: np.ndarray):
        return x


@dataclass
class VectorChart(Chart):
    dim: int
    scale: float = 1.0


@dataclass
class PureStateChart(Chart):
    """x in R^{2d} -> normalised ket."""

    d: int
    scale: float = 1.0

    @property
    def dim(self) -> int:
        return 2 * self.d

    def point(self, x):
        v = x[: self.d] + 1j * x[self.d:]
        n = np.linalg.norm(v)
        if n < 1e-300:
            v = np.zeros(self.d, dtype=complex)
            v[0] = 1.0
            return v
        return v / n


@dataclass
class DensityChart(Chart):
    """x in R^{2dr} -> rho = M M^+ / Tr(M M^+) with M a d x r matrix (r = d for full rank)."""

    d: int
    rank: int | None = None
    scale: float = 1.0

    @property
    def r(self) -> int:
        return self.rank or self.d

    @property
    def dim(self) -> int:
        return 2 * self.d * self.r

    def point(self, x):
        n = self.d * self.r
        M = (x[:n] + 1j * x[n:]).reshape(self.d, self.r)
        rho = M @ M.conj().T
        tr = np.trace(rho).real
        if tr < 1e-300:
            return np.eye(self.d, dtype=complex) / self.d
        return rho / tr


@dataclass
class BlochChart(Chart):
    """Qubit density matrices from a point of R^3 squashed into the Bloch ball."""

    scale: float = 1.0

    @property
    def dim(self) -> int:
        return 3

    def point(self, x):
        x = np.asarray(x, dtype=float)
        n = np.linalg.norm(x)
        r = x * (np.tanh(n) / n if n > 1e-12 else 1.0)
        return 0.5 * np.array([[1 + r[2], r[0] - 1j * r[1]], [r[0] + 1j * r[1], 1 - r[2]]])


@dataclass
class RestartLog:
    restart: int
    start_value: float
    final_value: float
    iterations: int
    converged: bool


@dataclass
class SearchResult:
    best_x: np.ndarray
    best_point: object
    best_value: float
    direction: str                      # "min" or "max"
    trace: list = field(default_factory=list)


def start_points(dim: int, count: int, seed: int, scale: float = 1.0) -> np.ndarray:
    if count <= 0:
        return np.zeros((0, dim))
    if dim == 0:
        return np.zeros((count, 0))
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    u = sampler.random(count)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    return scale * ndtri(u)


def multi_restart_search(objective: Callable, chart: Chart, restarts: int = 16, seed: int = 0, *,
                         maximize: bool = False, gradient: Callable | None = None,
                         extra_starts=(), max_iter: int = 500, tol: float = 1e-12,
                         method: str = "L-BFGS-B") -> SearchResult:
    """Minimise (or maximise) ``objective(chart.point(x))`` from many starting points.

    ``method="Nelder-Mead"`` suits objectives that are nonsmooth or only
    accurate to a solver tolerance, where finite-difference gradients are noise.

    ``gradient`` if given is the gradient with respect to ``x`` of the
    objective as a function of ``x``.  The best value is an upper bound on
    the true minimum (lower bound on the maximum).
    """
    sign = -1.0 if maximize else 1.0

    def f(x):
        return sign * float(objective(chart.point(x)))

    jac = None
    if gradient is not None:
        def jac(x):
            return sign * np.asarray(gradient(x), dtype=float)

    starts = list(np.asarray(s, dtype=float) for s in extra_starts)
    starts += list(start_points(chart.dim, restarts, seed, chart.scale))
    best_val, best_x = np.inf, None
    trace = []
    for k, x0 in enumerate(starts):
        v0 = f(x0)
        if chart.dim == 0:
            res_x, res_f, nit, ok = x0, v0, 0, True
        else:
            if method == "Nelder-Mead":
                res = minimize(f, x0, method="Nelder-Mead",
                               options={"maxiter": max(max_iter, 100 * chart.dim), "xatol": 1e-7,
                                        "fatol": max(tol, 1e-10)})
            else:
                res = minimize(f, x0, jac=jac, method="L-BFGS-B",
                               options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-10})
            res_x, res_f, nit, ok = res.x, float(res.fun), int(res.nit), bool(res.success)
            if v0 < res_f:
                res_x, res_f = x0, v0
        trace.append(RestartLog(k, sign * v0, sign * res_f, nit, ok))
        if res_f < best_val:
            best_val, best_x = res_f, np.asarray(res_x)
    return SearchResult(best_x, chart.point(best_x), sign * best_val,
                        "max" if maximize else "min", trace)
