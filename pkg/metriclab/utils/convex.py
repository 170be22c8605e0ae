# metriclab/utils/convex.py
"""Semi-infinite convex program shared by the Carathéodory and analytic
capacity bounds:

    maximize Re(D . c)  subject to  |sum_k c_k f_k(b)| <= 1 on the boundary.

The constraint is imposed on a boundary mesh and solved with SLSQP.  Boundary
points where the solved candidate still exceeds 1 are added to the mesh and the
program is solved again (exchange rounds).  The final candidate is certified on
a refined cell mesh of every boundary chart: on each cell the supremum is
bounded by the value at the cell centre plus an explicit slack built from the
coefficient norms, the basis derivative bounds and the cell width.  The
objective is divided by the largest such cell bound.

A basis passed in here provides

    values(points)                     -> (m, K) complex
    gradients(points)                  -> (m, K, n) complex partial derivatives
    derivative_bounds(points, spread)  -> (m, K, n), (m, K, n, n)

where the bounds hold on the polydisc of per-coordinate radii ``spread``
around each point.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.optimize import minimize

from ..config import Config
from ..domains import BoundaryChart
from ..errors import InfeasibleSlackError, SolverError

logger = logging.getLogger(__name__)

EXCHANGE_ROUNDS = 4
_SEARCH_NODES = 4096
_TOP_STARTS = 8
_START_CELLS = 512
_CHUNK = 32768
SOLVER_GAP = 1e-7
_RESTARTS = 3


class Basis(Protocol):
    def values(self, points: np.ndarray) -> np.ndarray: ...

    def gradients(self, points: np.ndarray) -> np.ndarray: ...

    def derivative_bounds(self, points: np.ndarray, spread: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class ConvexSolution:
    coeffs: np.ndarray
    value: float
    objective: float
    mesh_max: float
    certified_sup: float
    slack: float
    iterations: int
    status: int
    message: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def relative_gap(self) -> float:
        """Relative loss of the certified value against the observed boundary peak."""
        observed = self.certified_sup - self.slack
        if observed <= 0 or self.value <= 0:
            return 0.0
        return max(0.0, (self.objective / observed - self.value) / self.value)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "status": self.status,
            "message": self.message,
            "mesh_max": self.mesh_max,
            "certified_sup": self.certified_sup,
            "slack": self.slack,
            "relative_gap": self.relative_gap,
            **self.diagnostics,
        }


# =====================================================
# BOUNDARY PEAK SEARCH
# =====================================================
def _search_grid(chart: BoundaryChart, target: int) -> np.ndarray:
    dims = len(chart.bounds)
    per_axis = max(4, math.ceil(target ** (1.0 / dims)))
    axes = [np.linspace(lo, hi, per_axis, endpoint=not periodic)
            for (lo, hi), periodic in zip(chart.bounds, chart.periodic)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def boundary_peak(coeffs: np.ndarray, basis: Basis, charts: list[BoundaryChart]) -> tuple[float, np.ndarray]:
    """Largest |sum c_k f_k| found on the boundary and the points where the
    local searches ended (a lower estimate of the supremum)."""
    best = 0.0
    found = []
    for chart in charts:
        params = _search_grid(chart, _SEARCH_NODES)
        modulus = np.abs(basis.values(chart.points(params)) @ coeffs)
        best = max(best, float(modulus.max()))

        def negative_sq(q, chart=chart):
            f = basis.values(chart.points(q[None, :])) @ coeffs
            return -float(np.abs(f[0]) ** 2)

        for idx in np.argsort(-modulus, kind="stable")[:_TOP_STARTS]:
            res = minimize(
                negative_sq,
                params[idx],
                method="L-BFGS-B",
                bounds=list(chart.bounds),
                options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200},
            )
            best = max(best, math.sqrt(max(-res.fun, 0.0)))
            found.append(chart.points(res.x[None, :])[0])
    return best, np.array(found)


# =====================================================
# CELL CERTIFICATION
# =====================================================
def _start_cells(chart: BoundaryChart) -> tuple[np.ndarray, np.ndarray]:
    dims = len(chart.bounds)
    per_axis = max(2, math.ceil(_START_CELLS ** (1.0 / dims)))
    axes, halves = [], []
    for lo, hi in chart.bounds:
        width = (hi - lo) / per_axis
        axes.append(lo + width * (np.arange(per_axis) + 0.5))
        halves.append(0.5 * width)
    mesh = np.meshgrid(*axes, indexing="ij")
    centres = np.stack([m.ravel() for m in mesh], axis=1)
    return centres, np.tile(np.array(halves), (centres.shape[0], 1))


def _cell_bounds(
    chart: BoundaryChart,
    centres: np.ndarray,
    half: np.ndarray,
    coeffs: np.ndarray,
    basis: Basis,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centre modulus, upper bound of |f| and per-axis excess for every cell.

    Moving the profile parameters changes coordinate j by at most
    scale * drho_j, which costs the first-derivative bound times that distance.
    Along the phases the value is expanded to second order around the centre.
    The smaller of the pure first-order bound and the mixed bound is kept.
    """
    s = chart.scale
    profile = list(chart.profile_axes)
    phases = list(chart.phase_axes)
    points = chart.points(centres)
    abs_c = np.abs(coeffs)

    rho_c = chart.moduli(centres[:, profile])
    rho_lo, rho_hi = chart.moduli_range(centres - half, centres + half)
    drho = s * np.maximum(rho_hi - rho_c, rho_c - rho_lo)
    h = half[:, phases]
    reach = s * rho_hi
    spread = drho + reach * h

    value = basis.values(points) @ coeffs
    grad = np.einsum("mkn,k->mn", basis.gradients(points), coeffs)
    d1, d2 = basis.derivative_bounds(points, spread)
    used = abs_c > 0
    f1 = np.einsum("mkn,k->mn", d1[:, used], abs_c[used])
    f2 = np.einsum("mkab,k->mab", d2[:, used], abs_c[used])

    modulus = np.abs(value)
    first_order = modulus + (f1 * spread).sum(axis=1)

    linear = 1j * points * grad
    cross = np.abs(np.real(np.conj(value)[:, None] * linear)) * h
    sweep = (np.abs(linear) * h).sum(axis=1)
    hess = reach[:, :, None] * reach[:, None, :] * f2
    idx = np.arange(hess.shape[1])
    hess[:, idx, idx] += reach * f1
    curvature = 0.5 * np.einsum("mab,ma,mb->m", hess, h, h)
    profile_term = (f1 * drho).sum(axis=1)
    second_order = np.sqrt(modulus ** 2 + 2.0 * cross.sum(axis=1) + sweep ** 2) + curvature + profile_term

    upper = np.fmin(first_order, second_order)
    upper = np.where(np.isfinite(upper), upper, np.inf)

    # split heuristic only; soundness does not depend on it
    excess = np.zeros_like(half)
    scale = np.maximum(modulus, 1e-300)
    excess[:, phases] = cross / scale[:, None] + np.einsum("mab,ma,mb->ma", hess, h, h)
    if profile:
        profile_share = half[:, profile] / np.maximum(half[:, profile].sum(axis=1, keepdims=True), 1e-300)
        excess[:, profile] = profile_term[:, None] * profile_share
    excess = np.where(np.isfinite(excess), excess, np.inf)
    return modulus, upper, excess


def certify(
    coeffs: np.ndarray,
    basis: Basis,
    charts: list[BoundaryChart],
    floor: float,
    *,
    tol: float | None = None,
    max_cells: int | None = None,
) -> tuple[float, dict]:
    """Upper bound for the boundary supremum of |sum c_k f_k|.

    Cells are split until each one's bound is within ``tol`` (relative) of the
    best value seen.  When the cell budget runs out the remaining cells keep
    their own (larger) bounds, so the result stays an upper bound.
    """
    tol = Config.CERT_TOL if tol is None else tol
    max_cells = Config.CERT_MAX_CELLS if max_cells is None else max_cells
    best = float(floor)
    upper_max = 0.0
    evaluated = 0
    unresolved = 0

    for chart in charts:
        stack = [_start_cells(chart)]
        while stack:
            centres, half = stack.pop()
            if centres.shape[0] > _CHUNK:
                stack.append((centres[_CHUNK:], half[_CHUNK:]))
                centres, half = centres[:_CHUNK], half[:_CHUNK]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                modulus, upper, excess = _cell_bounds(chart, centres, half, coeffs, basis)
            evaluated += centres.shape[0]
            best = max(best, float(modulus.max()))
            done = upper <= best * (1.0 + tol)
            if done.any():
                upper_max = max(upper_max, float(upper[done].max()))
            open_ = ~done
            if not open_.any():
                continue
            if evaluated >= max_cells:
                upper_max = max(upper_max, float(upper[open_].max()))
                unresolved += int(open_.sum())
                for rest_centres, rest_half in stack:
                    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                        _, rest_upper, _ = _cell_bounds(chart, rest_centres, rest_half, coeffs, basis)
                    upper_max = max(upper_max, float(rest_upper.max()))
                    unresolved += rest_centres.shape[0]
                stack = []
                break
            centres, half, excess = centres[open_], half[open_], excess[open_]
            axis = np.argmax(excess, axis=1)
            rows = np.arange(centres.shape[0])
            half = half.copy()
            half[rows, axis] *= 0.5
            left, right = centres.copy(), centres.copy()
            left[rows, axis] -= half[rows, axis]
            right[rows, axis] += half[rows, axis]
            stack.append((np.concatenate([left, right]), np.concatenate([half, half])))

    if unresolved:
        logger.warning("Certification stopped at the cell budget (%s cells, %s unresolved)", evaluated, unresolved)
    certified = max(best, upper_max)
    return certified, {"certified_cells": evaluated, "unresolved_cells": unresolved, "boundary_peak": best}


# =====================================================
# SOLVER
# =====================================================
def _solve(objective, x0: np.ndarray, As: np.ndarray, maxiter: int, ftol: float):
    """SLSQP on the sampled constraints, restarted from its own answer until a
    restart improves the objective by less than SOLVER_GAP (relative)."""

    def constraint(x):
        c = x[: As.shape[1]] + 1j * x[As.shape[1]:]
        return 1.0 - np.abs(As @ c) ** 2

    def constraint_jac(x):
        c = x[: As.shape[1]] + 1j * x[As.shape[1]:]
        y = np.conj(As @ c)[:, None] * As
        return -np.concatenate([2.0 * y.real, -2.0 * y.imag], axis=1)

    best = None
    gap = math.inf
    iterations = 0
    x = x0
    for _ in range(_RESTARTS + 1):
        res = minimize(
            objective,
            x,
            jac=True,
            method="SLSQP",
            constraints=[{"type": "ineq", "fun": constraint, "jac": constraint_jac}],
            options={"maxiter": maxiter, "ftol": ftol},
        )
        iterations += int(res.nit)
        if res.status == 9:
            raise SolverError(f"Convex solve hit the iteration cap ({maxiter}): {res.message}")
        if not res.success:
            logger.warning("Convex solve ended with status %s: %s", res.status, res.message)
        if best is not None:
            gap = max(0.0, best.fun - res.fun) / max(abs(res.fun), 1e-300)
        if best is None or res.fun <= best.fun:
            best = res
        x = best.x
        if gap <= SOLVER_GAP:
            break
    if gap > SOLVER_GAP:
        logger.warning("Convex solve stopped at relative gap %.3e", gap)
    return best, iterations, gap


def maximize_derivative(
    gradient: np.ndarray,
    basis: Basis,
    mesh: np.ndarray,
    charts: list[BoundaryChart],
    *,
    start: np.ndarray | None = None,
    maxiter: int | None = None,
    ftol: float | None = None,
) -> ConvexSolution:
    """Certified lower bound for sup |D . c| over candidates bounded by 1 on the boundary."""
    maxiter = Config.SOLVER_MAXITER if maxiter is None else maxiter
    ftol = Config.SOLVER_FTOL if ftol is None else ftol

    A = basis.values(mesh)
    K = A.shape[1]
    col_scale = np.abs(A).max(axis=0)
    col_scale = np.where(col_scale > 0, col_scale, 1.0)
    Ds = np.asarray(gradient, dtype=complex) / col_scale

    def objective(x):
        c = x[:K] + 1j * x[K:]
        value = -float(np.real(Ds @ c))
        grad = np.concatenate([-Ds.real, Ds.imag])
        return value, grad

    seed = np.conj(Ds) if start is None else np.asarray(start, dtype=complex) * col_scale
    peak = np.abs((A / col_scale) @ seed).max()
    if peak > 0:
        seed = (0.5 if start is None else 1.0) * seed / peak
    x = np.concatenate([seed.real, seed.imag])

    active = np.asarray(mesh, dtype=complex)
    iterations = 0
    rounds = 0
    for rounds in range(1, EXCHANGE_ROUNDS + 1):
        res, nit, gap = _solve(objective, x, basis.values(active) / col_scale, maxiter, ftol)
        iterations += nit
        coeffs = (res.x[:K] + 1j * res.x[K:]) / col_scale
        peak, peak_points = boundary_peak(coeffs, basis, charts)
        if peak <= 1.0 + Config.CERT_TOL or rounds == EXCHANGE_ROUNDS:
            break
        values = np.abs(basis.values(peak_points) @ coeffs)
        violators = peak_points[values > 1.0]
        logger.debug("Exchange round %s: boundary peak %.6g, adding %s points", rounds, peak, len(violators))
        active = np.concatenate([active, violators])
        x = res.x / peak

    derivative = complex(np.asarray(gradient, dtype=complex) @ coeffs)
    if abs(derivative) > 0:
        coeffs = coeffs * (np.conj(derivative) / abs(derivative))
    objective_value = abs(derivative)

    mesh_max = float(np.abs(A @ coeffs).max())
    sup, diagnostics = certify(coeffs, basis, charts, max(peak, mesh_max))
    slack = sup - diagnostics["boundary_peak"]
    if slack >= 1.0:
        raise InfeasibleSlackError(f"Certification slack {slack:.3e} is not below 1")
    value = objective_value / sup if sup > 0 else 0.0
    diagnostics["exchange_rounds"] = rounds
    diagnostics["solver_gap"] = gap
    diagnostics["active_nodes"] = int(active.shape[0])

    return ConvexSolution(
        coeffs=coeffs,
        value=value,
        objective=objective_value,
        mesh_max=mesh_max,
        certified_sup=sup,
        slack=slack,
        iterations=iterations,
        status=int(res.status),
        message=str(res.message),
        diagnostics=diagnostics,
    )
