# metriclab/domains.py
"""Catalog of explicit bounded domains: membership, boundary geometry,
sampling and the L2 norms of (Laurent) monomials.

Every variant is a Reinhardt domain, so a point is described by its moduli
``|z_j|`` and the boundary by a profile curve in the moduli plane.  Geometry is
evaluated in base coordinates ``u = z / scale``.
"""
import itertools
import logging
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gammaln

from .config import Config
from .errors import (
    DomainError,
    DomainSpecError,
    FootPointAmbiguityError,
    QuadratureError,
    SamplingError,
)

logger = logging.getLogger(__name__)

# complex vectors of length spec.n; directions are nonzero
Point = np.ndarray
Direction = np.ndarray

KINDS = (
    "disc",
    "ball",
    "polydisc",
    "ellipsoid",
    "reinhardt-quartic",
    "annulus",
    "burns-shnider",
)

# Largest x = |z1|^2 on the quartic boundary: x^2 + x = 1.
QUARTIC_X_MAX = (math.sqrt(5.0) - 1.0) / 2.0

# Endpoint margin for the Burns-Shnider radial region.
BURNS_SHNIDER_MARGIN = 1e-9

_PROFILE_SAMPLES = 2049
_AMBIGUITY_TOL = 1e-9


# =====================================================
# DOMAIN SPEC
# =====================================================
@dataclass(frozen=True)
class DomainSpec:
    kind: str
    n: int = 1
    r: float | None = None
    p: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainSpecError(f"Unknown domain kind: {self.kind}")
        if self.n < 1:
            raise DomainSpecError(f"Dimension must be >= 1, got {self.n}")
        if self.kind == "annulus":
            if self.r is None or not 0.0 < self.r < 1.0:
                raise DomainSpecError(f"Annulus radius must satisfy 0 < r < 1, got {self.r}")
        if self.kind == "ellipsoid":
            if self.p is None or int(self.p) != self.p or self.p < 2:
                raise DomainSpecError(f"Ellipsoid exponent must be an integer >= 2, got {self.p}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainSpecError(f"Scale must be positive, got {self.scale}")
        if self.kind in {"disc", "annulus"} and self.n != 1:
            raise DomainSpecError(f"{self.kind} is one-dimensional")
        if self.kind in {"ellipsoid", "reinhardt-quartic", "burns-shnider"} and self.n != 2:
            raise DomainSpecError(f"{self.kind} is two-dimensional")

    @property
    def dimension(self) -> int:
        return self.n

    @property
    def laurent_axes(self) -> tuple[int, ...]:
        if self.kind in {"annulus", "burns-shnider"}:
            return (0,)
        return ()

    @property
    def canonical(self) -> str:
        if self.kind in {"ball", "polydisc"}:
            text = f"{self.kind}:{self.n}"
        elif self.kind == "annulus":
            text = f"annulus:{self.r!r}"
        elif self.kind == "ellipsoid":
            text = f"ellipsoid:{int(self.p)}"
        else:
            text = self.kind
        if self.scale != 1.0:
            text += f"*{self.scale!r}"
        return text

    def scaled(self, factor: float) -> "DomainSpec":
        return DomainSpec(self.kind, self.n, self.r, self.p, self.scale * factor)

    def allowed(self, alpha) -> bool:
        if len(alpha) != self.n:
            return False
        for j, a in enumerate(alpha):
            if int(a) != a:
                return False
            if a < 0 and j not in self.laurent_axes:
                return False
        return True

    def __str__(self) -> str:
        return self.canonical


_SPEC_RE = re.compile(r"^(?P<kind>[a-z-]+)(?::(?P<arg>[^*]+))?(?:\*(?P<scale>.+))?$")


def parse_spec(text: str) -> DomainSpec:
    raw = (text or "").strip().lower()
    match = _SPEC_RE.match(raw)
    if not match:
        raise DomainSpecError(f"Malformed domain spec: {text!r}")

    kind = match.group("kind")
    arg = match.group("arg")
    scale = 1.0
    if match.group("scale") is not None:
        try:
            scale = float(match.group("scale"))
        except ValueError as exc:
            raise DomainSpecError(f"Malformed scale in {text!r}") from exc

    try:
        if kind in {"ball", "polydisc"}:
            if arg is None:
                raise DomainSpecError(f"{kind} needs a dimension, e.g. {kind}:2")
            return DomainSpec(kind, n=int(arg), scale=scale)
        if kind == "annulus":
            if arg is None:
                raise DomainSpecError("annulus needs an inner radius, e.g. annulus:0.5")
            return DomainSpec(kind, n=1, r=float(arg), scale=scale)
        if kind == "ellipsoid":
            if arg is None:
                raise DomainSpecError("ellipsoid needs an exponent, e.g. ellipsoid:2")
            p_value = float(arg)
            if p_value != int(p_value):
                raise DomainSpecError(f"Ellipsoid exponent must be an integer, got {arg}")
            return DomainSpec(kind, n=2, p=int(p_value), scale=scale)
        if kind in {"reinhardt-quartic", "burns-shnider"}:
            if arg is not None:
                raise DomainSpecError(f"{kind} takes no parameter")
            return DomainSpec(kind, n=2, scale=scale)
        if kind == "disc":
            if arg is not None:
                raise DomainSpecError("disc takes no parameter")
            return DomainSpec(kind, n=1, scale=scale)
    except ValueError as exc:
        if isinstance(exc, DomainSpecError):
            raise
        raise DomainSpecError(f"Malformed parameter in {text!r}: {exc}") from exc

    raise DomainSpecError(f"Unknown domain kind in {text!r}")


def as_point(spec: DomainSpec, z) -> np.ndarray:
    point = np.atleast_1d(np.asarray(z, dtype=complex))
    if point.ndim != 1 or point.shape[0] != spec.n:
        raise DomainError(
            f"Point has dimension {point.shape[-1] if point.ndim else 0}, {spec.canonical} needs {spec.n}"
        )
    return point


def as_direction(spec: DomainSpec, v) -> np.ndarray:
    direction = as_point(spec, v)
    if not np.any(direction != 0):
        raise DomainError("Direction must not be identically zero")
    return direction


# =====================================================
# MEMBERSHIP
# =====================================================
def _defining_values(spec: DomainSpec, u: np.ndarray) -> np.ndarray:
    """Defining function on base points u of shape (m, n)."""
    moduli_sq = np.abs(u) ** 2
    kind = spec.kind
    if kind in {"disc", "ball"}:
        return moduli_sq.sum(axis=1) - 1.0
    if kind == "polydisc":
        return moduli_sq.max(axis=1) - 1.0
    if kind == "ellipsoid":
        return moduli_sq[:, 0] + moduli_sq[:, 1] ** spec.p - 1.0
    if kind == "reinhardt-quartic":
        x = moduli_sq[:, 0]
        return x * x + x + moduli_sq[:, 1] - 1.0
    if kind == "annulus":
        rho = np.sqrt(moduli_sq[:, 0])
        return (rho - 1.0) * (rho - spec.r)
    # burns-shnider
    a1 = np.sqrt(moduli_sq[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        log_a1 = np.log(a1)
        value = np.sin(log_a1) + moduli_sq[:, 1]
    outside_band = ~((log_a1 > -math.pi) & (log_a1 < 0.0))
    value = np.where(outside_band, np.maximum(np.abs(value), 1.0), value)
    return np.where(np.isfinite(value), value, 1.0)


def defining_function(spec: DomainSpec, z) -> float:
    u = as_point(spec, z) / spec.scale
    return float(_defining_values(spec, u[None, :])[0])


def contains_many(spec: DomainSpec, points: np.ndarray) -> np.ndarray:
    u = np.asarray(points, dtype=complex).reshape(-1, spec.n) / spec.scale
    return _defining_values(spec, u) < 0.0


def contains(spec: DomainSpec, z) -> bool:
    point = as_point(spec, z)
    return bool(contains_many(spec, point[None, :])[0])


def _require_inside(spec: DomainSpec, point: np.ndarray):
    if not contains(spec, point):
        raise DomainError(f"Point {point.tolist()} is outside {spec.canonical}")


# =====================================================
# PROFILE CURVES (moduli plane) FOR THE 2-D VARIANTS
# =====================================================
def _profile(spec: DomainSpec) -> tuple[Callable, float, float]:
    """Profile chart t -> (a1, a2) of the boundary in the moduli plane."""
    if spec.kind == "ellipsoid":
        p = spec.p

        def chart(t):
            t = np.asarray(t, dtype=float)
            return np.sqrt(np.clip(1.0 - t ** (2 * p), 0.0, None)), t

        return chart, 0.0, 1.0

    if spec.kind == "reinhardt-quartic":

        def chart(t):
            t = np.asarray(t, dtype=float)
            return np.sqrt(t), np.sqrt(np.clip(1.0 - t - t * t, 0.0, None))

        return chart, 0.0, QUARTIC_X_MAX

    if spec.kind == "burns-shnider":

        def chart(t):
            t = np.asarray(t, dtype=float)
            return np.exp(t), np.sqrt(np.clip(-np.sin(t), 0.0, None))

        return chart, -math.pi, 0.0

    raise DomainError(f"{spec.canonical} has no profile chart")


def _profile_foot(spec: DomainSpec, moduli: np.ndarray) -> tuple[float, float, bool]:
    """Nearest profile parameter to the base moduli; returns (t, distance, ambiguous)."""
    chart, lo, hi = _profile(spec)
    grid = np.linspace(lo, hi, _PROFILE_SAMPLES)
    a1, a2 = chart(grid)
    dist = np.hypot(a1 - moduli[0], a2 - moduli[1])

    def objective(t):
        b1, b2 = chart(t)
        return float(np.hypot(b1 - moduli[0], b2 - moduli[1]))

    step = grid[1] - grid[0]
    # Local minima of the sampled distance, endpoints included.
    padded = np.concatenate(([np.inf], dist, [np.inf]))
    is_min = (dist <= padded[:-2]) & (dist <= padded[2:])
    candidates = np.flatnonzero(is_min)

    refined = []
    for i in candidates:
        a = max(lo, grid[i] - step)
        b = min(hi, grid[i] + step)
        res = minimize_scalar(objective, bounds=(a, b), method="bounded", options={"xatol": 1e-13})
        t_best, d_best = (res.x, res.fun) if res.fun < dist[i] else (grid[i], dist[i])
        refined.append((float(d_best), float(t_best)))

    refined.sort()
    d_min, t_min = refined[0]
    ambiguous = False
    for d_other, t_other in refined[1:]:
        if d_other - d_min <= _AMBIGUITY_TOL * max(1.0, d_min) and abs(t_other - t_min) > 4 * step:
            ambiguous = True
            break
    return t_min, d_min, ambiguous


def boundary_distance(spec: DomainSpec, z) -> float:
    point = as_point(spec, z)
    _require_inside(spec, point)
    u = point / spec.scale
    moduli = np.abs(u)

    kind = spec.kind
    if kind in {"disc", "ball"}:
        base = 1.0 - float(np.linalg.norm(u))
    elif kind == "polydisc":
        base = float(np.min(1.0 - moduli))
    elif kind == "annulus":
        base = float(min(1.0 - moduli[0], moduli[0] - spec.r))
    else:
        _, base, _ = _profile_foot(spec, moduli)
    return spec.scale * base


@dataclass(frozen=True)
class BoundaryFrame:
    foot: np.ndarray
    tangential: np.ndarray
    normal: np.ndarray
    unit_normal: np.ndarray
    distance: float

    def projection_residual(self) -> float:
        ident = np.eye(self.normal.shape[0])
        checks = (
            self.tangential @ self.tangential - self.tangential,
            self.normal @ self.normal - self.normal,
            self.tangential @ self.normal,
            self.tangential + self.normal - ident,
        )
        return float(max(np.abs(c).max() for c in checks))


def _complex_normal(spec: DomainSpec, foot_u: np.ndarray) -> np.ndarray:
    kind = spec.kind
    b = foot_u
    if kind == "ball":
        return b.copy()
    if kind == "ellipsoid":
        return np.array([b[0], spec.p * abs(b[1]) ** (2 * (spec.p - 1)) * b[1]])
    if kind == "reinhardt-quartic":
        x = abs(b[0]) ** 2
        return np.array([(2.0 * x + 1.0) * b[0], b[1]])
    if kind == "burns-shnider":
        a1 = abs(b[0])
        return np.array([math.cos(math.log(a1)) / (2.0 * np.conj(b[0])), b[1]])
    raise DomainError(f"No normal for {spec.canonical}")


def _phase(value: complex) -> complex:
    return value / abs(value) if value != 0 else 1.0 + 0.0j


def boundary_frame(spec: DomainSpec, z, *, threshold: float | None = None) -> BoundaryFrame:
    """Nearest boundary point and the complex tangent/normal projectors there."""
    point = as_point(spec, z)
    _require_inside(spec, point)
    u = point / spec.scale
    moduli = np.abs(u)
    frac = Config.NEAR_BOUNDARY if threshold is None else threshold
    limit = frac * inradius(spec) / spec.scale

    kind = spec.kind
    if kind in {"disc", "ball"}:
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            raise FootPointAmbiguityError("The centre has no unique nearest boundary point")
        foot_u = u / norm
        distance = 1.0 - norm
    elif kind == "annulus":
        rho = moduli[0]
        outer, inner = 1.0 - rho, rho - spec.r
        if abs(outer - inner) <= _AMBIGUITY_TOL:
            raise FootPointAmbiguityError("Point is equidistant from both boundary circles")
        target = 1.0 if outer < inner else spec.r
        foot_u = np.array([target * _phase(u[0])])
        distance = min(outer, inner)
    elif kind == "polydisc":
        gaps = 1.0 - moduli
        order = np.argsort(gaps, kind="stable")
        if len(order) > 1 and gaps[order[1]] - gaps[order[0]] <= _AMBIGUITY_TOL:
            raise FootPointAmbiguityError("Point is equidistant from two polydisc faces")
        face = int(order[0])
        foot_u = u.copy()
        foot_u[face] = _phase(u[face])
        distance = float(gaps[face])
    else:
        t, distance, ambiguous = _profile_foot(spec, moduli)
        if ambiguous:
            raise FootPointAmbiguityError(f"Two boundary minimizers within tolerance at {point.tolist()}")
        chart, _, _ = _profile(spec)
        a1, a2 = chart(t)
        foot_moduli = np.array([float(a1), float(a2)])
        for j in range(2):
            if moduli[j] < 1e-14 and foot_moduli[j] > 1e-7:
                raise FootPointAmbiguityError(
                    "Nearest boundary points form a circle (zero coordinate with nonzero foot modulus)"
                )
        foot_u = np.array([foot_moduli[j] * _phase(u[j]) for j in range(2)])

    if distance >= limit:
        raise DomainError(
            f"Point is not near the boundary: distance {distance * spec.scale:.6g} "
            f">= threshold {limit * spec.scale:.6g}"
        )

    n = spec.n
    if n == 1:
        nu = np.ones(1, dtype=complex)
        normal = np.eye(1, dtype=complex)
        tangential = np.zeros((1, 1), dtype=complex)
    elif kind == "polydisc":
        nu = np.zeros(n, dtype=complex)
        nu[face] = 1.0
        normal = np.outer(nu, nu.conj())
        tangential = np.eye(n) - normal
    else:
        nu = _complex_normal(spec, foot_u)
        nu = nu / np.linalg.norm(nu)
        normal = np.outer(nu, nu.conj())
        tangential = np.eye(n) - normal

    return BoundaryFrame(
        foot=foot_u * spec.scale,
        tangential=tangential,
        normal=normal,
        unit_normal=nu,
        distance=distance * spec.scale,
    )


@lru_cache(maxsize=None)
def inradius(spec: DomainSpec) -> float:
    kind = spec.kind
    if kind in {"disc", "ball", "polydisc", "ellipsoid"}:
        base = 1.0
    elif kind == "annulus":
        base = (1.0 - spec.r) / 2.0
    elif kind == "reinhardt-quartic":
        base = math.sqrt(QUARTIC_X_MAX)
    else:
        base = _burns_shnider_inradius(spec)
    return spec.scale * base


def _burns_shnider_inradius(spec: DomainSpec) -> float:
    unit = DomainSpec(spec.kind, spec.n)

    def negative_distance(m):
        point = np.array([m[0], m[1]], dtype=complex)
        if not contains(unit, point):
            return 0.0
        return -boundary_distance(unit, point)

    best = None
    for m1 in np.linspace(math.exp(-math.pi) + 0.01, 0.99, 15):
        for m2 in np.linspace(0.0, 0.95, 12):
            value = negative_distance((m1, m2))
            if best is None or value < best[0]:
                best = (value, (m1, m2))
    res = minimize(negative_distance, np.array(best[1]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-13})
    return float(-min(res.fun, best[0]))


# =====================================================
# SAMPLING
# =====================================================
def _check_count(count: int):
    if int(count) != count or count < 1:
        raise DomainError(f"count must be a positive integer, got {count}")


def sample_interior(
    spec: DomainSpec,
    count: int,
    seed: int,
    *,
    min_norm: float | None = None,
    max_norm: float | None = None,
    accept: Callable[[np.ndarray], bool] | None = None,
    budget: int = 2000,
) -> list[np.ndarray]:
    """Rejection sampling from the bounding box, deterministic given seed."""
    _check_count(count)
    rng = np.random.default_rng(seed)
    n = spec.n
    out: list[np.ndarray] = []
    drawn = 0
    limit = budget * count
    batch = max(64, 4 * count)
    while len(out) < count:
        if drawn >= limit:
            raise SamplingError(
                f"Rejection budget exhausted for {spec.canonical} after {drawn} draws "
                f"({len(out)}/{count} accepted)"
            )
        box = rng.uniform(-1.0, 1.0, size=(batch, 2 * n)) * spec.scale
        pts = box[:, :n] + 1j * box[:, n:]
        drawn += batch
        keep = contains_many(spec, pts)
        norms = np.linalg.norm(pts, axis=1)
        if min_norm is not None:
            keep &= norms >= min_norm
        if max_norm is not None:
            keep &= norms <= max_norm
        for pt in pts[keep]:
            if accept is not None and not accept(pt):
                continue
            out.append(pt)
            if len(out) == count:
                break
    return out


def sample_strip(spec: DomainSpec, count: int, seed: int, width: float) -> list[np.ndarray]:
    """Interior points with boundary distance below ``width``."""
    if not width > 0:
        raise DomainError(f"Strip width must be positive, got {width}")
    return sample_interior(
        spec,
        count,
        seed,
        accept=lambda pt: boundary_distance(spec, pt) < width,
    )


def _profile_points(spec: DomainSpec, t: np.ndarray, phases: np.ndarray) -> np.ndarray:
    chart, _, _ = _profile(spec)
    a1, a2 = chart(t)
    return np.stack([a1 * np.exp(1j * phases[:, 0]), a2 * np.exp(1j * phases[:, 1])], axis=1)


def sample_boundary(spec: DomainSpec, count: int, seed: int) -> list[np.ndarray]:
    _check_count(count)
    rng = np.random.default_rng(seed)
    n = spec.n
    kind = spec.kind

    if kind == "disc":
        pts = np.exp(1j * rng.uniform(0, 2 * math.pi, size=count))[:, None]
    elif kind == "annulus":
        radii = np.where(rng.random(count) < 0.5, spec.r, 1.0)
        pts = (radii * np.exp(1j * rng.uniform(0, 2 * math.pi, size=count)))[:, None]
    elif kind == "ball":
        gauss = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
        pts = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
    elif kind == "polydisc":
        faces = rng.integers(0, n, size=count)
        radii = np.sqrt(rng.random((count, n)))
        phases = rng.uniform(0, 2 * math.pi, size=(count, n))
        radii[np.arange(count), faces] = 1.0
        pts = radii * np.exp(1j * phases)
    else:
        _, lo, hi = _profile(spec)
        t = rng.uniform(lo, hi, size=count)
        phases = rng.uniform(0, 2 * math.pi, size=(count, 2))
        pts = _profile_points(spec, t, phases)
    return [p * spec.scale for p in pts]


def direction_fan(n: int, count: int, seed: int) -> list[np.ndarray]:
    """Half deterministic axis/diagonal directions, half seeded random unit vectors."""
    _check_count(count)
    fixed: list[np.ndarray] = []
    if n == 1:
        k_fixed = (count + 1) // 2
        for k in range(k_fixed):
            fixed.append(np.array([np.exp(2j * math.pi * k / max(k_fixed, 1))]))
    else:
        for j in range(n):
            e = np.zeros(n, dtype=complex)
            e[j] = 1.0
            fixed.append(e)
        for j in range(n):
            for k in range(j + 1, n):
                for w in (1.0, -1.0, 1j, -1j):
                    e = np.zeros(n, dtype=complex)
                    e[j], e[k] = 1.0, w
                    fixed.append(e / math.sqrt(2.0))
    n_fixed = min((count + 1) // 2, len(fixed))
    rng = np.random.default_rng(seed)
    n_random = count - n_fixed
    gauss = rng.standard_normal((n_random, n)) + 1j * rng.standard_normal((n_random, n))
    randoms = [g / np.linalg.norm(g) for g in gauss]
    return fixed[:n_fixed] + randoms


def frame_fan(frame: BoundaryFrame, count: int) -> list[np.ndarray]:
    """Unit directions sweeping from the complex normal to a complex tangent."""
    _check_count(count)
    nu = frame.unit_normal
    if nu.shape[0] == 1:
        return [nu * np.exp(2j * math.pi * k / count) for k in range(count)]
    # Any unit vector in the range of the tangential projector.
    cols = frame.tangential
    tau = cols[:, int(np.argmax(np.linalg.norm(cols, axis=0)))]
    tau = tau / np.linalg.norm(tau)
    angles = np.linspace(0.0, math.pi / 2, count)
    return [math.cos(a) * nu + math.sin(a) * tau for a in angles]


# =====================================================
# BOUNDARY CHARTS AND MESHES
# =====================================================
@dataclass(frozen=True)
class BoundaryChart:
    """Parameterization of a piece of the boundary.

    The profile parameters fix the moduli of the coordinates and the
    remaining parameters are their phases: coordinate ``j`` of a point is
    ``scale * moduli(profile)[j] * exp(i q[phase_axes[j]])``.  Every modulus is
    monotone in each profile parameter except at the listed ``critical``
    values, so a box of parameters maps its moduli into the range spanned by
    its corners and critical slices.
    """

    name: str
    bounds: tuple[tuple[float, float], ...]
    periodic: tuple[bool, ...]
    moduli: Callable[[np.ndarray], np.ndarray]
    phase_axes: tuple[int, ...]
    scale: float = 1.0
    critical: tuple[tuple[int, float], ...] = ()

    @property
    def profile_axes(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.bounds)) if i not in self.phase_axes)

    def points(self, params: np.ndarray) -> np.ndarray:
        params = np.atleast_2d(np.asarray(params, dtype=float))
        rho = self.moduli(params[:, list(self.profile_axes)])
        return self.scale * rho * np.exp(1j * params[:, list(self.phase_axes)])

    def moduli_range(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Smallest and largest base moduli over boxes of parameters."""
        axes = list(self.profile_axes)
        lo = np.atleast_2d(lo)[:, axes]
        hi = np.atleast_2d(hi)[:, axes]
        if not axes:
            rho = self.moduli(lo)
            return rho, rho
        corners = [np.where(np.array(mask, dtype=bool)[None, :], hi, lo)
                   for mask in itertools.product((False, True), repeat=len(axes))]
        for index, value in self.critical:
            for corner in list(corners):
                inner = corner.copy()
                inner[:, index] = np.clip(value, lo[:, index], hi[:, index])
                corners.append(inner)
        values = np.stack([self.moduli(c) for c in corners])
        return values.min(axis=0), values.max(axis=0)


def _sphere_moduli(angles: np.ndarray, n: int) -> np.ndarray:
    moduli = np.ones((angles.shape[0], n))
    for j in range(n - 1):
        moduli[:, j] *= np.cos(angles[:, j])
        moduli[:, j + 1:] *= np.sin(angles[:, j])[:, None]
    return moduli


def _constant_moduli(values) -> Callable[[np.ndarray], np.ndarray]:
    row = np.asarray(values, dtype=float)[None, :]

    def moduli(q):
        return np.repeat(row, q.shape[0], axis=0)

    return moduli


def boundary_charts(spec: DomainSpec, *, shilov: bool = False) -> list[BoundaryChart]:
    n = spec.n
    s = spec.scale
    two_pi = 2 * math.pi
    kind = spec.kind

    if kind == "disc" or (kind == "ball" and n == 1):
        return [BoundaryChart("circle", ((0.0, two_pi),), (True,), _constant_moduli([1.0]), (0,), s)]
    if kind == "annulus":
        return [
            BoundaryChart("outer", ((0.0, two_pi),), (True,), _constant_moduli([1.0]), (0,), s),
            BoundaryChart("inner", ((0.0, two_pi),), (True,), _constant_moduli([spec.r]), (0,), s),
        ]
    if kind == "ball":
        bounds = ((0.0, math.pi / 2),) * (n - 1) + ((0.0, two_pi),) * n
        return [BoundaryChart(
            "sphere",
            bounds,
            (False,) * (n - 1) + (True,) * n,
            lambda q: _sphere_moduli(q, n),
            tuple(range(n - 1, 2 * n - 1)),
            s,
        )]
    if kind == "polydisc":
        torus = BoundaryChart("torus", ((0.0, two_pi),) * n, (True,) * n,
                              _constant_moduli(np.ones(n)), tuple(range(n)), s)
        if shilov or n == 1:
            return [torus]
        charts = []
        for face in range(n):
            others = [j for j in range(n) if j != face]

            def face_moduli(q, others=others):
                out = np.ones((q.shape[0], n))
                out[:, others] = q
                return out

            # parameters: face phase, then (radius, phase) for every other coordinate
            phase_axes = [0] * n
            for k, j in enumerate(others):
                phase_axes[j] = 2 + 2 * k
            bounds = ((0.0, two_pi),) + ((0.0, 1.0), (0.0, two_pi)) * (n - 1)
            periodic = (True,) + (False, True) * (n - 1)
            charts.append(BoundaryChart(f"face{face}", bounds, periodic, face_moduli, tuple(phase_axes), s))
        return charts

    profile, lo, hi = _profile(spec)
    critical = ((0, -math.pi / 2),) if kind == "burns-shnider" else ()

    def profile_moduli(q):
        return np.stack(profile(q[:, 0]), axis=1)

    return [BoundaryChart("profile", ((lo, hi), (0.0, two_pi), (0.0, two_pi)),
                          (False, True, True), profile_moduli, (1, 2), s, critical)]


def _chart_grid(chart: BoundaryChart, per_axis: int) -> np.ndarray:
    axes = []
    for (lo, hi), periodic in zip(chart.bounds, chart.periodic):
        if periodic:
            axes.append(np.linspace(lo, hi, per_axis, endpoint=False))
        else:
            axes.append(np.linspace(lo, hi, per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def boundary_mesh(spec: DomainSpec, count: int, *, shilov: bool = False) -> np.ndarray:
    """Deterministic structured boundary mesh with at least ``count`` nodes."""
    _check_count(count)
    charts = boundary_charts(spec, shilov=shilov)
    per_chart = math.ceil(count / len(charts))
    blocks = []
    for chart in charts:
        dims = len(chart.bounds)
        per_axis = max(2, math.ceil(per_chart ** (1.0 / dims)))
        while per_axis ** dims < per_chart:
            per_axis += 1
        blocks.append(chart.points(_chart_grid(chart, per_axis)))
    return np.concatenate(blocks, axis=0)


# =====================================================
# MONOMIAL NORMS
# =====================================================
def _check_alpha(spec: DomainSpec, alpha) -> tuple[int, ...]:
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if not spec.allowed(alpha):
        raise DomainError(f"Exponent {alpha} is not allowed on {spec.canonical}")
    return alpha


def _log_quad(log_integrand: Callable[[float], float], lo: float, hi: float) -> float:
    """log of the integral of exp(log_integrand) over [lo, hi]."""
    grid = np.linspace(lo, hi, 513)[1:-1]
    values = np.array([log_integrand(x) for x in grid])
    i = int(np.argmax(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda x: -log_integrand(x), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    peak_x = float(res.x) if -res.fun >= values[i] else float(grid[i])
    peak = max(-float(res.fun), float(values[i]))

    def shifted(x):
        value = log_integrand(x)
        return math.exp(value - peak) if math.isfinite(value) else 0.0

    result = quad(
        shifted,
        lo,
        hi,
        points=[peak_x] if lo < peak_x < hi else None,
        epsabs=Config.QUAD_ABSTOL,
        epsrel=Config.QUAD_RELTOL,
        limit=400,
        full_output=1,
    )
    integral, abserr = result[0], result[1]
    if len(result) > 3 or integral <= 0 or abserr > max(Config.QUAD_RELTOL * integral * 10, Config.QUAD_ABSTOL):
        message = result[3] if len(result) > 3 else "error estimate above target"
        raise QuadratureError(f"Radial quadrature did not converge: {message}")
    return peak + math.log(integral)


def _log_beta_quad(a: float, w: float) -> float:
    """log of int_0^1 t^a (1-t)^w dt by quadrature."""

    def log_f(t):
        if t <= 0.0 or t >= 1.0:
            return -math.inf
        return a * math.log(t) + w * math.log1p(-t)

    return _log_quad(log_f, 0.0, 1.0)


def _log_norm_closed(spec: DomainSpec, alpha: tuple[int, ...]) -> float:
    kind = spec.kind
    n = spec.n
    log_pi = math.log(math.pi)
    if kind in {"disc", "ball"}:
        total = sum(alpha)
        return n * log_pi + sum(gammaln(a + 1) for a in alpha) - gammaln(n + total + 1)
    if kind == "polydisc":
        return sum(log_pi - math.log(a + 1) for a in alpha)
    if kind == "annulus":
        k = alpha[0]
        log_r = math.log(spec.r)
        if k == -1:
            return math.log(2 * math.pi) + math.log(-log_r)
        e = 2 * k + 2
        if k > -1:
            return log_pi + math.log1p(-math.exp(e * log_r)) - math.log(k + 1)
        # r^e > 1 for negative e
        return log_pi + e * log_r + math.log1p(-math.exp(-e * log_r)) - math.log(-(k + 1))
    raise DomainError(f"No closed-form norm for {spec.canonical}")


def ellipsoid_norm_closed_form(p: int, alpha) -> float:
    """Beta-function value of the ellipsoid norm."""
    a, b = int(alpha[0]), int(alpha[1])
    q = (b + 1) / p
    log_value = (
        2 * math.log(2 * math.pi) - math.log(4 * p)
        + gammaln(a + 1) + gammaln(q) - gammaln(a + 2 + q)
    )
    return math.exp(log_value)


def _log_norm_quadrature(spec: DomainSpec, alpha: tuple[int, ...]) -> float:
    kind = spec.kind
    log_two_pi = math.log(2 * math.pi)

    if kind in {"disc", "ball"}:
        # I_n(alpha, w) = pi * B(alpha_n + 1, w + 1) * I_{n-1}(alpha', w + alpha_n + 1)
        total = 0.0
        weight = 0.0
        for a in reversed(alpha):
            total += math.log(math.pi) + _log_beta_quad(a, weight)
            weight += a + 1
        return total

    if kind == "polydisc":
        return sum(log_two_pi + _log_beta_quad(a, 0.0) - math.log(2.0) for a in alpha)

    if kind == "annulus":
        k = alpha[0]
        r = spec.r
        return log_two_pi + _log_quad(
            lambda rho: (2 * k + 1) * math.log(rho) if rho > 0 else -math.inf, r, 1.0
        )

    a, b = alpha
    if kind == "ellipsoid":
        p = spec.p
        lo, hi = 0.0, 1.0

        def log_h(a1):
            return math.log1p(-a1 * a1) / (2 * p)
    elif kind == "reinhardt-quartic":
        lo, hi = 0.0, math.sqrt(QUARTIC_X_MAX)

        def log_h(a1):
            x = a1 * a1
            rest = 1.0 - x - x * x
            return 0.5 * math.log(rest) if rest > 0 else -math.inf
    else:
        lo = math.exp(-math.pi + BURNS_SHNIDER_MARGIN)
        hi = math.exp(-BURNS_SHNIDER_MARGIN)

        def log_h(a1):
            value = -math.sin(math.log(a1))
            return 0.5 * math.log(value) if value > 0 else -math.inf

    def log_integrand(a1):
        if a1 <= 0.0 or a1 >= 1.0:
            return -math.inf
        lh = log_h(a1)
        if not math.isfinite(lh):
            return -math.inf
        return (2 * a + 1) * math.log(a1) + (2 * b + 2) * lh

    return 2 * log_two_pi - math.log(2 * b + 2) + _log_quad(log_integrand, lo, hi)


@lru_cache(maxsize=65536)
def _log_norm_base(spec: DomainSpec, alpha: tuple[int, ...], method: str) -> float:
    closed = spec.kind in {"disc", "ball", "polydisc", "annulus"}
    if method == "closed" or (method == "auto" and closed):
        return _log_norm_closed(spec, alpha)
    if method in {"quadrature", "auto"}:
        return _log_norm_quadrature(spec, alpha)
    raise DomainError(f"Unknown norm method: {method}")


def log_monomial_norm(spec: DomainSpec, alpha, *, method: str = "auto") -> float:
    alpha = _check_alpha(spec, alpha)
    base = DomainSpec(spec.kind, spec.n, spec.r, spec.p)
    log_value = _log_norm_base(base, alpha, method)
    if spec.scale != 1.0:
        log_value += (2 * sum(alpha) + 2 * spec.n) * math.log(spec.scale)
    return log_value


def monomial_norm(spec: DomainSpec, alpha, *, method: str = "auto") -> float:
    """Squared L2 norm of z**alpha over the domain."""
    return math.exp(log_monomial_norm(spec, alpha, method=method))
