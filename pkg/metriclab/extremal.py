# metriclab/extremal.py
"""Carathéodory and Kobayashi metrics: closed forms on the disc, ball and
polydisc, certified brackets elsewhere, the Lu ratio and the Kähler-type
necessary conditions for the Carathéodory metric.

Normalization: on the unit disc C(0; 1) = K(0; 1) = 1, i.e. the metric
tensor 1/(1 - |z|^2)^2.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .bergman import (
    HermitianForm,
    KernelSeries,
    bergman_length,
    metric_at,
)
from .domains import (
    DomainSpec,
    as_direction,
    as_point,
    boundary_charts,
    boundary_frame,
    boundary_mesh,
    contains,
    contains_many,
)
from .errors import DomainError, LuBoundViolation, NumericalError
from .utils.convex import ConvexSolution, maximize_derivative
from .utils.parallel import ordered_map

logger = logging.getLogger(__name__)

LU_TOLERANCE = 1e-9
COINCIDENCE_TOL = 5e-2
TANGENTIAL_EPS = 0.1
# directions per real parameter of the fitted form
MIN_FIT_DIRECTIONS = 4

_DISC_RADII = np.linspace(0.0, 1.0, 17)[1:]
_DISC_PHASES = np.exp(2j * math.pi * np.arange(128) / 128)
_DISC_MARGIN = 1e-9
_BISECTION_STEPS = 48
_SEED_RAYS = 8
_SEED_FRACTIONS = (0.25, 0.5)


# =====================================================
# EXACT METRICS
# =====================================================
_EXACT_KINDS = {"disc", "ball", "polydisc"}


def has_exact_metric(spec: DomainSpec) -> bool:
    return spec.kind in _EXACT_KINDS


def _exact(spec: DomainSpec, z, v) -> float:
    if not has_exact_metric(spec):
        raise DomainError(f"No closed-form Carathéodory/Kobayashi metric on {spec.canonical}")
    point = as_point(spec, z)
    direction = as_direction(spec, v)
    if not contains(spec, point):
        raise DomainError(f"Point {point.tolist()} is outside {spec.canonical}")
    u = point / spec.scale
    w = direction / spec.scale
    if spec.kind == "polydisc":
        return float(np.max(np.abs(w) / (1.0 - np.abs(u) ** 2)))
    q = 1.0 - float(np.vdot(u, u).real)
    inner = abs(np.vdot(u, w))
    return math.sqrt(q * float(np.vdot(w, w).real) + inner ** 2) / q


def carath_exact(spec: DomainSpec, z, v) -> float:
    return _exact(spec, z, v)


def kobayashi_exact(spec: DomainSpec, z, v) -> float:
    # C = K on the disc, ball and polydisc
    return _exact(spec, z, v)


# =====================================================
# CANDIDATE FUNCTIONS
# =====================================================
@dataclass(frozen=True)
class CandidateFamily:
    """Mobius-recentred monomials plus shifted negative powers on Laurent axes.

    Every member vanishes at ``base``; the family grows with ``degree``.
    """

    spec: DomainSpec
    base: np.ndarray
    degree: int
    exponents: tuple[tuple[int, ...], ...]
    laurent: tuple[tuple[int, int], ...]

    @classmethod
    def build(cls, spec: DomainSpec, base, degree: int) -> "CandidateFamily":
        if degree < 1:
            raise DomainError(f"Candidate degree must be >= 1, got {degree}")
        n = spec.n
        exponents = []
        for total in range(1, degree + 1):
            for combo in itertools.combinations_with_replacement(range(n), total):
                a = [0] * n
                for j in combo:
                    a[j] += 1
                exponents.append(tuple(a))
        laurent = tuple((axis, k) for axis in spec.laurent_axes for k in range(1, degree + 1))
        return cls(spec, as_point(spec, base), degree, tuple(exponents), laurent)

    @property
    def size(self) -> int:
        return len(self.exponents) + len(self.laurent)

    def keys(self) -> list[tuple]:
        return [("mobius", alpha) for alpha in self.exponents] + [("laurent", term) for term in self.laurent]

    def embed(self, other: "CandidateFamily", coeffs: np.ndarray) -> np.ndarray:
        """Coefficients of a member of a smaller family, in this family."""
        index = {key: i for i, key in enumerate(self.keys())}
        out = np.zeros(self.size, dtype=complex)
        for key, c in zip(other.keys(), coeffs):
            out[index[key]] = c
        return out

    def _base_coords(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.asarray(points, dtype=complex).reshape(-1, self.spec.n) / self.spec.scale
        return u, self.base / self.spec.scale

    def values(self, points: np.ndarray) -> np.ndarray:
        u, a = self._base_coords(points)
        mobius = (u - a[None, :]) / (1.0 - np.conj(a)[None, :] * u)
        cols = []
        for alpha in self.exponents:
            col = np.ones(u.shape[0], dtype=complex)
            for j, aj in enumerate(alpha):
                if aj:
                    col = col * mobius[:, j] ** aj
            cols.append(col)
        for axis, k in self.laurent:
            cols.append(u[:, axis] ** (-k) - a[axis] ** (-k))
        return np.stack(cols, axis=1)

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Partial derivatives d f_k / d z_j, shape (m, K, n)."""
        u, a = self._base_coords(points)
        n = self.spec.n
        denom = 1.0 - np.conj(a)[None, :] * u
        mobius = (u - a[None, :]) / denom
        slope = (1.0 - np.abs(a) ** 2)[None, :] / denom ** 2
        out = np.zeros((u.shape[0], self.size, n), dtype=complex)
        for k, alpha in enumerate(self.exponents):
            for j, aj in enumerate(alpha):
                if not aj:
                    continue
                col = aj * mobius[:, j] ** (aj - 1) * slope[:, j]
                for i, ai in enumerate(alpha):
                    if i != j and ai:
                        col = col * mobius[:, i] ** ai
                out[:, k, j] = col
        offset = len(self.exponents)
        for k, (axis, power) in enumerate(self.laurent):
            out[:, offset + k, axis] = -power * u[:, axis] ** (-power - 1)
        return out / self.spec.scale

    def derivative_bounds(self, points: np.ndarray, spread: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bounds on |d f_k / d z_j| and |d2 f_k / d z_i d z_j| over the polydisc
        of radii ``spread`` around each point (infinite where it reaches a pole)."""
        u, a = self._base_coords(points)
        n = self.spec.n
        s = self.spec.scale
        r = np.asarray(spread, dtype=float).reshape(-1, n) / s
        abs_a = np.abs(a)[None, :]
        gap = np.abs(1.0 - np.conj(a)[None, :] * u) - abs_a * r
        gap = np.where(gap > 0, gap, np.nan)
        mod = (np.abs(u - a[None, :]) + r) / gap
        d1 = (1.0 - abs_a ** 2) / gap ** 2
        d2 = 2.0 * abs_a * (1.0 - abs_a ** 2) / gap ** 3

        m = u.shape[0]
        first = np.zeros((m, self.size, n))
        second = np.zeros((m, self.size, n, n))
        for k, alpha in enumerate(self.exponents):
            powers = [mod[:, i] ** ai if ai else np.ones(m) for i, ai in enumerate(alpha)]
            for j, aj in enumerate(alpha):
                if not aj:
                    continue
                rest_j = np.prod([powers[i] for i in range(n) if i != j], axis=0) if n > 1 else np.ones(m)
                slope_j = aj * mod[:, j] ** (aj - 1) * d1[:, j]
                first[:, k, j] = slope_j * rest_j
                curve = aj * mod[:, j] ** (aj - 1) * d2[:, j]
                if aj > 1:
                    curve = curve + aj * (aj - 1) * mod[:, j] ** (aj - 2) * d1[:, j] ** 2
                second[:, k, j, j] = curve * rest_j
                for l in range(j + 1, n):
                    al = alpha[l]
                    if not al:
                        continue
                    others = [powers[i] for i in range(n) if i not in (j, l)]
                    rest = np.prod(others, axis=0) if others else np.ones(m)
                    mixed = slope_j * al * mod[:, l] ** (al - 1) * d1[:, l] * rest
                    second[:, k, j, l] = mixed
                    second[:, k, l, j] = mixed
        offset = len(self.exponents)
        for k, (axis, power) in enumerate(self.laurent):
            inner = np.abs(u[:, axis]) - r[:, axis]
            inner = np.where(inner > 0, inner, np.nan)
            first[:, offset + k, axis] = power * inner ** (-power - 1)
            second[:, offset + k, axis, axis] = power * (power + 1) * inner ** (-power - 2)
        first = np.where(np.isnan(first), np.inf, first) / s
        second = np.where(np.isnan(second), np.inf, second) / s ** 2
        return first, second

    def derivative(self, v) -> np.ndarray:
        """Directional derivative of every member at the base point."""
        s = self.spec.scale
        a = self.base / s
        w = np.asarray(v, dtype=complex) / s
        out = []
        for alpha in self.exponents:
            if sum(alpha) == 1:
                j = alpha.index(1)
                out.append(w[j] / (1.0 - abs(a[j]) ** 2))
            else:
                out.append(0.0)
        for axis, k in self.laurent:
            out.append(-k * a[axis] ** (-k - 1) * w[axis])
        return np.array(out, dtype=complex)


@dataclass(frozen=True)
class CandidateFunction:
    family: CandidateFamily
    coeffs: np.ndarray

    @property
    def base(self) -> np.ndarray:
        return self.family.base

    def __call__(self, points) -> np.ndarray:
        return self.family.values(points) @ self.coeffs

    def derivative(self, v) -> complex:
        return complex(self.family.derivative(v) @ self.coeffs)


# =====================================================
# BOUNDS
# =====================================================
@dataclass(frozen=True)
class MetricBound:
    value: float
    kind: str
    diagnostics: dict = field(default_factory=dict)
    candidate: CandidateFunction | None = None

    def __float__(self) -> float:
        return self.value


def _canonical_direction(direction: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit vector with a fixed phase convention, and the original length."""
    length = float(np.linalg.norm(direction))
    unit = direction / length
    j = int(np.argmax(np.abs(unit) > np.abs(unit).max() * (1 - 1e-12)))
    phase = unit[j] / abs(unit[j])
    return unit / phase, length


def carath_lower_bound(spec: DomainSpec, z, v, d: int, M: int) -> MetricBound:
    """Certified lower bound from candidates of degree 1..d.

    Each degree is warm-started from the one below (the families are nested)
    and the best certified value is kept, so the bound never drops as d grows.
    """
    point = as_point(spec, z)
    direction = as_direction(spec, v)
    if not contains(spec, point):
        raise DomainError(f"Point {point.tolist()} is outside {spec.canonical}")
    if d < 1:
        raise DomainError(f"Candidate degree must be >= 1, got {d}")
    if M < 8 * d:
        raise DomainError(f"Need at least {8 * d} boundary samples for degree {d}, got {M}")

    unit, length = _canonical_direction(direction)
    shilov = spec.kind == "polydisc"
    mesh = boundary_mesh(spec, M, shilov=shilov)
    charts = boundary_charts(spec, shilov=shilov)

    best: tuple[CandidateFamily, ConvexSolution] | None = None
    previous = None
    by_degree = []
    for degree in range(1, d + 1):
        family = CandidateFamily.build(spec, point, degree)
        start = None if previous is None else family.embed(*previous)
        solution = maximize_derivative(family.derivative(unit), family, mesh, charts, start=start)
        by_degree.append(length * solution.value)
        previous = (family, solution.coeffs)
        if best is None or solution.value > best[1].value:
            best = (family, solution)
        logger.debug("Degree %s bound %.9g at %s", degree, length * solution.value, spec.canonical)

    family, solution = best
    diagnostics = solution.as_dict()
    diagnostics["mesh_nodes"] = int(mesh.shape[0])
    diagnostics["family_size"] = family.size
    diagnostics["degree"] = family.degree
    diagnostics["by_degree"] = by_degree
    return MetricBound(
        value=length * solution.value,
        kind="carath-lower",
        diagnostics=diagnostics,
        candidate=CandidateFunction(family, solution.coeffs / solution.certified_sup),
    )


def _disc_points(z: np.ndarray, u: np.ndarray, centre: complex, radius: float) -> np.ndarray:
    lam = centre + radius * (1.0 - _DISC_MARGIN) * (_DISC_RADII[:, None] * _DISC_PHASES[None, :]).ravel()
    return z[None, :] + lam[:, None] * u[None, :]


def _disc_inside(spec: DomainSpec, z, u, centre, radius) -> bool:
    return bool(np.all(contains_many(spec, _disc_points(z, u, centre, radius))))


def _largest_radius(spec: DomainSpec, z: np.ndarray, u: np.ndarray, centre: complex) -> float:
    lo = 0.0
    hi = 2.0 * spec.scale * math.sqrt(spec.n) + abs(centre)
    if not _disc_inside(spec, z, u, centre, lo):
        return 0.0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _disc_inside(spec, z, u, centre, mid):
            lo = mid
        else:
            hi = mid
    return lo


def _reach(spec: DomainSpec, z: np.ndarray, u: np.ndarray, phase: complex) -> float:
    """How far the slice through z along u extends in the direction ``phase``."""
    lo, hi = 0.0, 2.0 * spec.scale * math.sqrt(spec.n)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if contains(spec, z + mid * phase * u):
            lo = mid
        else:
            hi = mid
    return lo


def _centre_seeds(spec: DomainSpec, z: np.ndarray, u: np.ndarray) -> list[complex]:
    seeds = [0j]
    for k in range(_SEED_RAYS):
        phase = complex(np.exp(2j * math.pi * k / _SEED_RAYS))
        reach = _reach(spec, z, u, phase)
        seeds.extend(frac * reach * phase for frac in _SEED_FRACTIONS)
    return seeds


def kobayashi_upper_bound(spec: DomainSpec, z, v, *, recentre: bool = False) -> MetricBound:
    """Upper bound from round affine discs through z in the direction v.

    With ``recentre`` the disc centre may move off z: a disc of radius rho
    centred at c contains z when |c| < rho and gives the density
    rho / (rho^2 - |c|^2).  The centre is searched from seeds spread along
    rays of the slice, then refined with Nelder-Mead.
    """
    point = as_point(spec, z)
    direction = as_direction(spec, v)
    if not contains(spec, point):
        raise DomainError(f"Point {point.tolist()} is outside {spec.canonical}")
    unit, length = _canonical_direction(direction)

    radius = _largest_radius(spec, point, unit, 0.0)
    if radius < 1e-12:
        raise NumericalError(f"Affine disc radius degenerated to {radius:.3e}")
    best = 1.0 / radius
    diagnostics = {"radius": radius, "centred_bound": length * best}

    if recentre:
        def density(x):
            c = complex(x[0], x[1])
            rho = _largest_radius(spec, point, unit, c)
            if rho <= abs(c) + 1e-15:
                return math.inf
            return rho / (rho * rho - abs(c) ** 2)

        seeds = _centre_seeds(spec, point, unit)
        scores = [density((c.real, c.imag)) for c in seeds]
        seed = seeds[int(np.argmin(scores))]
        step = max(0.25 * abs(seed), 0.5 * radius)
        x0 = np.array([seed.real, seed.imag])
        res = minimize(
            density,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]]),
                "xatol": 1e-9,
                "fatol": 1e-12 * best,
                "maxiter": 400,
            },
        )
        candidates = [(float(res.fun), res.x), (min(scores), x0)]
        value, centre = min(candidates, key=lambda item: item[0])
        if math.isfinite(value) and value < best:
            best = value
            diagnostics["centre"] = [float(centre[0]), float(centre[1])]
        diagnostics["recentre_evaluations"] = int(res.nfev) + len(seeds)

    return MetricBound(value=length * best, kind="kobayashi-upper", diagnostics=diagnostics)


@dataclass(frozen=True)
class MetricInterval:
    lower: float
    upper: float
    exact: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower < 0 or not self.upper > 0:
            raise NumericalError(f"Invalid metric bracket [{self.lower}, {self.upper}]")
        if self.lower > self.upper * (1 + LU_TOLERANCE) + LU_TOLERANCE:
            raise NumericalError(f"Metric bracket is inverted: [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return max(0.0, self.upper - self.lower)


def default_samples(spec: DomainSpec, d: int) -> int:
    return max(8 * d, 512 * spec.n)


def ck_interval(
    spec: DomainSpec,
    z,
    v,
    d: int = 3,
    M: int | None = None,
    *,
    recentre: bool = True,
) -> MetricInterval:
    M = default_samples(spec, d) if M is None else M
    if has_exact_metric(spec):
        lower = carath_exact(spec, z, v)
        upper = kobayashi_exact(spec, z, v)
        return MetricInterval(lower, upper, exact=True)
    lower_bound = carath_lower_bound(spec, z, v, d, M)
    upper_bound = kobayashi_upper_bound(spec, z, v, recentre=recentre)
    return MetricInterval(
        lower_bound.value,
        upper_bound.value,
        exact=False,
        diagnostics={"lower": lower_bound.diagnostics, "upper": upper_bound.diagnostics},
    )


def carath_value(spec: DomainSpec, z, v, d: int = 2, M: int | None = None, *, exact: bool | None = None) -> float:
    """Exact C where available (unless exact=False), otherwise the certified lower bound."""
    use_exact = has_exact_metric(spec) if exact is None else exact
    if use_exact:
        return carath_exact(spec, z, v)
    M = default_samples(spec, d) if M is None else M
    return carath_lower_bound(spec, z, v, d, M).value


# =====================================================
# LU CONSTANT
# =====================================================
@dataclass(frozen=True)
class LuEstimate:
    value: float
    witness_point: np.ndarray
    witness_direction: np.ndarray
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if not self.value > 0:
            raise NumericalError(f"Lu estimate must be positive, got {self.value}")
        if self.value > 1.0 + LU_TOLERANCE:
            raise LuBoundViolation(f"Lu estimate {self.value:.12g} exceeds 1")


def lu_lower_bound(
    spec: DomainSpec,
    series: KernelSeries,
    points: list,
    fan: list,
    d: int = 2,
    M: int | None = None,
    *,
    exact: bool | None = None,
) -> LuEstimate:
    """max over (z, v) of C(z, v) / B(z, v); a lower bound for L."""
    if not points or not fan:
        raise DomainError("lu_lower_bound needs nonempty point and direction lists")
    if series.spec != spec:
        raise DomainError(f"Series is for {series.spec.canonical}, not {spec.canonical}")

    def row(z):
        g = metric_at(series, z)
        out = []
        for j, v in enumerate(fan):
            c = carath_value(spec, z, v, d, M, exact=exact)
            b = bergman_length(g, v)
            out.append({"direction_index": j, "carath": c, "bergman": b, "ratio": c / b})
        return out

    rows = []
    per_point = ordered_map(row, points)
    best = None
    for i, (z, entries) in enumerate(zip(points, per_point)):
        for entry in entries:
            entry["point_index"] = i
            rows.append(entry)
            if best is None or entry["ratio"] > best[0]:
                best = (entry["ratio"], i, entry["direction_index"])
    value, i, j = best
    return LuEstimate(
        value=value,
        witness_point=as_point(spec, points[i]),
        witness_direction=as_direction(spec, fan[j]),
        rows=rows,
    )


def lu_equality_defect(spec: DomainSpec, series: KernelSeries, z0, fan: list, L: float, **kwargs) -> float:
    """max over the fan of |L B(z0, v) - C(z0, v)| / C(z0, v)."""
    g = metric_at(series, z0)
    worst = 0.0
    for v in fan:
        c = carath_value(spec, z0, v, **kwargs)
        worst = max(worst, abs(L * bergman_length(g, v) - c) / c)
    return worst


# =====================================================
# HERMITIAN FIT AND KAHLER RESIDUAL
# =====================================================
def _hermitian_design(fan: list, n: int) -> np.ndarray:
    rows = []
    for v in fan:
        v = np.asarray(v, dtype=complex)
        row = [abs(v[a]) ** 2 for a in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                prod = v[a] * np.conj(v[b])
                row.extend([2.0 * prod.real, -2.0 * prod.imag])
        rows.append(row)
    return np.array(rows, dtype=float)


def _form_from_params(params: np.ndarray, n: int) -> np.ndarray:
    Q = np.zeros((n, n), dtype=complex)
    for a in range(n):
        Q[a, a] = params[a]
    k = n
    for a in range(n):
        for b in range(a + 1, n):
            Q[a, b] = params[k] + 1j * params[k + 1]
            Q[b, a] = np.conj(Q[a, b])
            k += 2
    return Q


def _fit(spec: DomainSpec, z, fan: list, **kwargs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = spec.n
    if len(fan) < MIN_FIT_DIRECTIONS * n * n:
        raise DomainError(
            f"Fan of {len(fan)} directions is too small for an {n}x{n} Hermitian fit (need {MIN_FIT_DIRECTIONS * n * n})"
        )
    targets = np.array([carath_value(spec, z, v, **kwargs) ** 2 for v in fan])
    design = _hermitian_design(fan, n)
    weights = 1.0 / targets
    weighted = design * weights[:, None]
    if np.linalg.matrix_rank(weighted) < n * n:
        raise DomainError("Direction fan is rank-deficient for a Hermitian fit")
    params, *_ = np.linalg.lstsq(weighted, np.ones_like(targets), rcond=None)
    return _form_from_params(params, n), design @ params, targets


def fitted_form(spec: DomainSpec, z, fan: list, **kwargs) -> HermitianForm:
    Q, _, _ = _fit(spec, z, fan, **kwargs)
    return HermitianForm(Q)


def hermitian_fit_residual(spec: DomainSpec, z, fan: list, **kwargs) -> float:
    """max over the fan of |C^2 - Q(v, v)| / C^2 for the best Hermitian Q."""
    _, fitted, targets = _fit(spec, z, fan, **kwargs)
    return float(np.max(np.abs(targets - fitted) / targets))


@dataclass(frozen=True)
class MetricField:
    """Metric matrices on a centred real grid; axes are x_1..x_n then y_1..y_n."""

    values: np.ndarray
    h: float
    center: np.ndarray

    @property
    def n(self) -> int:
        return int(self.values.shape[-1])

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def point(self, index: tuple[int, ...]) -> np.ndarray:
        n = self.n
        offsets = (np.asarray(index, dtype=float) - (self.size - 1) / 2.0) * self.h
        return self.center + offsets[:n] + 1j * offsets[n:]


def metric_field(fn: Callable, center, h: float, m: int = 3) -> MetricField:
    center = np.atleast_1d(np.asarray(center, dtype=complex))
    n = center.shape[0]
    if not h > 0:
        raise DomainError(f"Grid spacing must be positive, got {h}")
    values = np.empty((m,) * (2 * n) + (n, n), dtype=complex)
    field_ = MetricField(values, h, center)
    for index in itertools.product(range(m), repeat=2 * n):
        g = fn(field_.point(index))
        values[index] = g.matrix if isinstance(g, HermitianForm) else np.asarray(g)
    return field_


def kahler_residual(field: MetricField) -> float:
    """max |d_c g_{a bbar} - d_a g_{c bbar}| by central differences, O(h^2)."""
    n = field.n
    F = field.values
    dims = 2 * n
    if F.ndim != dims + 2 or any(size < 3 for size in F.shape[:dims]):
        raise DomainError("Metric field grid is too small for central differences")
    if not field.h > 0:
        raise DomainError(f"Grid spacing must be positive, got {field.h}")

    def central(axis):
        plus = [slice(1, -1)] * dims
        minus = [slice(1, -1)] * dims
        plus[axis] = slice(2, None)
        minus[axis] = slice(None, -2)
        return (F[tuple(plus)] - F[tuple(minus)]) / (2.0 * field.h)

    # dz[c] = d g / d z_c on interior nodes
    dz = [0.5 * (central(c) - 1j * central(n + c)) for c in range(n)]
    worst = 0.0
    for c in range(n):
        for a in range(n):
            if a == c:
                continue
            diff = dz[c][..., a, :] - dz[a][..., c, :]
            worst = max(worst, float(np.abs(diff).max()))
    return worst


# =====================================================
# NEAR-BOUNDARY COINCIDENCE
# =====================================================
@dataclass(frozen=True)
class CoincidenceResult:
    fraction_coincident: float
    tangential_fraction: float
    rows: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "fraction_coincident": self.fraction_coincident,
            "tangential_fraction": self.tangential_fraction,
        }


def coincidence_scan(
    spec: DomainSpec,
    z,
    fan: list,
    tol: float = COINCIDENCE_TOL,
    *,
    eps: float = TANGENTIAL_EPS,
    d: int = 3,
    M: int | None = None,
) -> CoincidenceResult:
    frame = boundary_frame(spec, z)
    if not fan:
        return CoincidenceResult(0.0, 0.0, [])

    def row(v):
        v = as_direction(spec, v)
        interval = ck_interval(spec, z, v, d, M)
        normal_part = float(np.linalg.norm(frame.normal @ v))
        tangent_part = float(np.linalg.norm(frame.tangential @ v))
        return {
            "lower": interval.lower,
            "upper": interval.upper,
            "width": interval.width,
            "coincident": interval.width < tol * interval.lower,
            "tangential": normal_part < eps * tangent_part,
            "normal_norm": normal_part,
            "tangent_norm": tangent_part,
        }

    rows = ordered_map(row, fan)
    coincident = [r for r in rows if r["coincident"]]
    tangential = [r for r in coincident if r["tangential"]]
    return CoincidenceResult(
        fraction_coincident=len(coincident) / len(rows),
        tangential_fraction=len(tangential) / len(coincident) if coincident else 0.0,
        rows=rows,
    )
