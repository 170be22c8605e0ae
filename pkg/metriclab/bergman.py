# metriclab/bergman.py
"""Truncated Bergman kernels of catalog domains and everything derived from
them: metric, metric jet, holomorphic sectional curvature, representative
coordinates and the potential identities of constant-curvature domains.

All derivatives are taken term by term on the series.  Mixed derivatives of
``log K(z, z)`` come from the moment tensors ``M[h][k] = d^h dbar^k K`` through
the set-partition (cumulant) formula.
"""
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .domains import (
    DomainSpec,
    as_direction,
    as_point,
    contains,
    direction_fan,
    log_monomial_norm,
    parse_spec,
)
from .errors import DomainError, IndefiniteMetricError, NumericalError, ZeroSetError
from .utils.parallel import ordered_map

logger = logging.getLogger(__name__)

ZERO_SET_TOL = 1e-12
C2_SPREAD_LIMIT = 1e-2
C2_FAN_SIZE = 16


# =====================================================
# KERNEL SERIES
# =====================================================
@dataclass(frozen=True, eq=False)
class KernelSeries:
    spec: DomainSpec
    degree_cap: int
    exponents: np.ndarray
    log_norm: np.ndarray

    @property
    def coeff(self) -> np.ndarray:
        return np.exp(-self.log_norm)

    @property
    def entries(self) -> list[tuple[tuple[int, ...], float]]:
        return [
            (tuple(int(a) for a in alpha), float(c))
            for alpha, c in zip(self.exponents, self.coeff)
        ]

    def __len__(self) -> int:
        return int(self.exponents.shape[0])

    def to_json(self) -> str:
        payload = {
            "spec": self.spec.canonical,
            "degree_cap": self.degree_cap,
            "entries": [
                {"alpha": [int(a) for a in alpha], "coeff": float(math.exp(-ln)), "log_norm": float(ln)}
                for alpha, ln in zip(self.exponents, self.log_norm)
            ],
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "KernelSeries":
        payload = json.loads(text)
        spec = parse_spec(payload["spec"])
        entries = payload["entries"]
        exponents = np.array([e["alpha"] for e in entries], dtype=int).reshape(-1, spec.n)
        log_norm = np.array(
            [e["log_norm"] if "log_norm" in e else -math.log(e["coeff"]) for e in entries],
            dtype=float,
        )
        series = cls(spec, int(payload["degree_cap"]), exponents, log_norm)
        series.validate()
        return series

    def validate(self):
        if self.degree_cap < 2:
            raise DomainError(f"Degree cap must be >= 2, got {self.degree_cap}")
        if len({tuple(a) for a in self.exponents.tolist()}) != len(self):
            raise NumericalError("Kernel series has repeated exponents")
        if not np.all(np.isfinite(self.log_norm)):
            raise NumericalError("Kernel series has non-finite coefficients")


def allowed_exponents(spec: DomainSpec, degree_cap: int) -> np.ndarray:
    """Every allowed exponent with sum of absolute values at most the cap."""
    ranges = []
    for j in range(spec.n):
        if j in spec.laurent_axes:
            ranges.append(range(-degree_cap, degree_cap + 1))
        else:
            ranges.append(range(0, degree_cap + 1))
    out = [alpha for alpha in itertools.product(*ranges) if sum(abs(a) for a in alpha) <= degree_cap]
    out.sort(key=lambda a: (sum(abs(x) for x in a), a))
    return np.array(out, dtype=int).reshape(-1, spec.n)


def build_kernel_series(spec: DomainSpec, degree_cap: int) -> KernelSeries:
    if int(degree_cap) != degree_cap or degree_cap < 2:
        raise DomainError(f"Degree cap must be an integer >= 2, got {degree_cap}")
    exponents = allowed_exponents(spec, int(degree_cap))
    log_norm = np.array([log_monomial_norm(spec, tuple(alpha)) for alpha in exponents])
    logger.debug("Built %s-term kernel series for %s (D=%s)", len(exponents), spec.canonical, degree_cap)
    return KernelSeries(spec, int(degree_cap), exponents, log_norm)


# =====================================================
# WEIGHTED MONOMIAL DERIVATIVES
# =====================================================
def _falling(alpha: np.ndarray, h: tuple[int, ...]) -> np.ndarray:
    out = np.ones(alpha.shape[0])
    for j, hj in enumerate(h):
        for m in range(hj):
            out = out * (alpha[:, j] - m)
    return out


def weighted_derivative(series: KernelSeries, z: np.ndarray, h: tuple[int, ...]) -> np.ndarray:
    """Vector of sqrt(c_alpha) * d^h z^alpha over the series terms."""
    alpha = series.exponents
    factor = _falling(alpha, h)
    power = alpha - np.asarray(h, dtype=int)[None, :]
    moduli = np.abs(z)
    log_mod = np.log(np.where(moduli > 0, moduli, 1.0))
    angles = np.angle(z)

    log_abs = -0.5 * series.log_norm
    phase = np.zeros(alpha.shape[0])
    for j in range(z.shape[0]):
        pj = power[:, j]
        if moduli[j] > 0:
            log_abs = log_abs + pj * log_mod[j]
            phase = phase + pj * angles[j]
        else:
            log_abs = np.where(pj == 0, log_abs, -np.inf)
    with np.errstate(under="ignore"):
        values = np.exp(log_abs) * (np.cos(phase) + 1j * np.sin(phase))
    return np.where(factor != 0, factor * values, 0.0)


def _multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            h = [0] * n
            for j in combo:
                h[j] += 1
            out.append(tuple(h))
    return out


def _set_partitions(items: list) -> list[list[list]]:
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for partition in _set_partitions(rest):
        out.append([[first]] + partition)
        for i in range(len(partition)):
            out.append(partition[:i] + [[first] + partition[i]] + partition[i + 1:])
    return out


class _LogKernelDerivatives:
    """Mixed derivatives of log K(z, z) at one point, from moment tensors."""

    def __init__(self, series: KernelSeries, z: np.ndarray, order: int):
        n = series.spec.n
        self.n = n
        self.indices = _multi_indices(n, order)
        vectors = {h: weighted_derivative(series, z, h) for h in self.indices}
        self.vectors = vectors
        self.moments = {
            (h, k): complex(np.dot(vectors[h], np.conj(vectors[k])))
            for h in self.indices
            for k in self.indices
        }
        zero = tuple([0] * n)
        self.S = self.moments[(zero, zero)].real
        if not self.S > 0:
            raise NumericalError("Kernel diagonal is not positive")

    def _counts(self, labels: list[int]) -> tuple[int, ...]:
        h = [0] * self.n
        for j in labels:
            h[j] += 1
        return tuple(h)

    def __call__(self, holo: list[int], anti: list[int]) -> complex:
        items = [(0, j) for j in holo] + [(1, j) for j in anti]
        total = 0.0 + 0.0j
        for partition in _set_partitions(items):
            blocks = len(partition)
            weight = (-1) ** (blocks - 1) * math.factorial(blocks - 1)
            term = 1.0 + 0.0j
            for block in partition:
                h = self._counts([j for side, j in block if side == 0])
                k = self._counts([j for side, j in block if side == 1])
                term *= self.moments[(h, k)] / self.S
            total += weight * term
        return total


# =====================================================
# METRIC, JET, CURVATURE
# =====================================================
@dataclass(frozen=True)
class HermitianForm:
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > 1e-12 * scale:
            raise NumericalError("Metric matrix is not Hermitian")

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def length(self, v) -> float:
        return bergman_length(self.matrix, v)


@dataclass(frozen=True)
class MetricJet:
    g: HermitianForm
    dg: np.ndarray
    ddg: np.ndarray

    def kahler_defect(self) -> float:
        """max |d_c g_{a bbar} - d_a g_{c bbar}|."""
        return float(np.abs(self.dg - np.transpose(self.dg, (1, 0, 2))).max())


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _require_inside(spec: DomainSpec, point: np.ndarray):
    if not contains(spec, point):
        raise DomainError(f"Point {point.tolist()} is outside {spec.canonical}")


def _check_definite(g: np.ndarray, point: np.ndarray):
    eig = np.linalg.eigvalsh(g)
    if not eig.min() > 0:
        raise IndefiniteMetricError(
            f"Metric is not positive definite at {point.tolist()} (min eigenvalue {eig.min():.3e}); "
            "raise the degree cap"
        )


def metric_at(series: KernelSeries, z) -> HermitianForm:
    point = as_point(series.spec, z)
    _require_inside(series.spec, point)
    derivs = _LogKernelDerivatives(series, point, 1)
    n = series.spec.n
    g = np.empty((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            g[a, b] = derivs([a], [b])
    g = _hermitize(g)
    _check_definite(g, point)
    return HermitianForm(g)


def metric_jet(series: KernelSeries, z) -> MetricJet:
    """g[a,b] = g_{a bbar}; dg[c,a,b] = d_c g_{a bbar}; ddg[c,d,a,b] = d_c dbar_d g_{a bbar}."""
    point = as_point(series.spec, z)
    _require_inside(series.spec, point)
    derivs = _LogKernelDerivatives(series, point, 2)
    n = series.spec.n
    g = np.empty((n, n), dtype=complex)
    dg = np.empty((n, n, n), dtype=complex)
    ddg = np.empty((n, n, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            g[a, b] = derivs([a], [b])
            for c in range(n):
                dg[c, a, b] = derivs([c, a], [b])
                for d in range(n):
                    ddg[c, d, a, b] = derivs([c, a], [d, b])
    g = _hermitize(g)
    _check_definite(g, point)
    return MetricJet(HermitianForm(g), dg, ddg)


def curvature_tensor(jet: MetricJet) -> np.ndarray:
    """R[a,b,c,d] = -ddg[c,d,a,b] + sum dg[c,a,mu] ginv[mu,nu] conj(dg[d,b,nu])."""
    ginv = np.linalg.inv(jet.g.matrix)
    dg = jet.dg
    quad_term = np.einsum("cam,mv,dbv->abcd", dg, ginv, np.conj(dg))
    return -np.transpose(jet.ddg, (2, 3, 0, 1)) + quad_term


def hsc_from_jet(jet: MetricJet, v) -> float:
    v = np.asarray(v, dtype=complex)
    R = curvature_tensor(jet)
    vb = np.conj(v)
    num = np.einsum("abcd,a,b,c,d->", R, v, vb, v, vb)
    den = np.einsum("ab,a,b->", jet.g.matrix, v, vb).real
    return float(num.real / den ** 2)


def hsc_at(series: KernelSeries, z, v) -> float:
    direction = as_direction(series.spec, v)
    return hsc_from_jet(metric_jet(series, z), direction)


def bergman_length(g, v) -> float:
    matrix = g.matrix if isinstance(g, HermitianForm) else np.asarray(g, dtype=complex)
    v = np.asarray(v, dtype=complex)
    value = np.einsum("ab,a,b->", matrix, v, np.conj(v)).real
    return math.sqrt(max(value, 0.0))


@dataclass(frozen=True)
class CurvatureSummary:
    min: float
    max: float
    mean: float
    arg_min: tuple[int, int]
    arg_max: tuple[int, int]
    values: np.ndarray

    def as_dict(self) -> dict:
        return {
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "arg_min": list(self.arg_min),
            "arg_max": list(self.arg_max),
        }


def curvature_scan(series: KernelSeries, points: list, fan: list) -> CurvatureSummary:
    if not points or not fan:
        raise DomainError("curvature_scan needs nonempty point and direction lists")
    directions = [as_direction(series.spec, v) for v in fan]

    def row(z):
        jet = metric_jet(series, z)
        return [hsc_from_jet(jet, v) for v in directions]

    values = np.array(ordered_map(row, points), dtype=float)
    i_min = np.unravel_index(int(np.argmin(values)), values.shape)
    i_max = np.unravel_index(int(np.argmax(values)), values.shape)
    return CurvatureSummary(
        min=float(values.min()),
        max=float(values.max()),
        mean=float(values.mean()),
        arg_min=(int(i_min[0]), int(i_min[1])),
        arg_max=(int(i_max[0]), int(i_max[1])),
        values=values,
    )


# =====================================================
# CLOSED-FORM ORACLES (disc, ball, polydisc and dilations)
# =====================================================
_CLOSED_KINDS = {"disc", "ball", "polydisc"}


def has_closed_form(spec: DomainSpec) -> bool:
    return spec.kind in _CLOSED_KINDS


def _require_closed(spec: DomainSpec):
    if not has_closed_form(spec):
        raise DomainError(f"No closed-form Bergman kernel for {spec.canonical}")


def closed_form_kernel(spec: DomainSpec, z, t) -> complex:
    _require_closed(spec)
    s = spec.scale
    u = as_point(spec, z) / s
    w = as_point(spec, t) / s
    n = spec.n
    if spec.kind == "polydisc":
        value = np.prod(1.0 / (math.pi * (1.0 - u * np.conj(w)) ** 2))
    else:
        value = math.factorial(n) / math.pi ** n * (1.0 - np.vdot(w, u)) ** (-(n + 1))
    return complex(value) / s ** (2 * n)


def closed_form_metric(spec: DomainSpec, z) -> HermitianForm:
    _require_closed(spec)
    s = spec.scale
    u = as_point(spec, z) / s
    n = spec.n
    if spec.kind == "polydisc":
        g = np.diag(2.0 / (1.0 - np.abs(u) ** 2) ** 2).astype(complex)
    else:
        q = 1.0 - float(np.vdot(u, u).real)
        g = (n + 1) * (np.eye(n) / q + np.outer(np.conj(u), u) / q ** 2)
    return HermitianForm(g / s ** 2)


def closed_form_hsc(spec: DomainSpec, z, v) -> float:
    _require_closed(spec)
    v = as_direction(spec, v)
    if spec.kind == "polydisc":
        u = as_point(spec, z) / spec.scale
        g = 2.0 / (1.0 - np.abs(u) ** 2) ** 2
        w = np.abs(v) ** 2
        return float(-np.sum(g ** 2 * w ** 2) / np.sum(g * w) ** 2)
    return -2.0 / (spec.n + 1)


def closed_form_potential(spec: DomainSpec, p, z) -> float:
    kzz = closed_form_kernel(spec, z, z).real
    kpp = closed_form_kernel(spec, p, p).real
    kzp = abs(closed_form_kernel(spec, z, p))
    return math.log(kzz) + math.log(kpp) - 2.0 * math.log(kzp)


# =====================================================
# KERNEL EVALUATION AND REPRESENTATIVE COORDINATES
# =====================================================
def kernel_eval(series: KernelSeries, z, t) -> complex:
    spec = series.spec
    zp = as_point(spec, z)
    tp = as_point(spec, t)
    zero = tuple([0] * spec.n)
    return complex(np.dot(weighted_derivative(series, zp, zero), np.conj(weighted_derivative(series, tp, zero))))


def _check_zero_set(kzp: complex, kzz: float, kpp: float, z: np.ndarray):
    if abs(kzp) < ZERO_SET_TOL * math.sqrt(kzz * kpp):
        raise ZeroSetError(f"K(z, p) vanishes to tolerance at z = {z.tolist()}")


def potential_phi(series: KernelSeries, p, z) -> float:
    """log[K(z,z) K(p,p) / |K(z,p)|^2]."""
    spec = series.spec
    zp, pp = as_point(spec, z), as_point(spec, p)
    _require_inside(spec, zp)
    _require_inside(spec, pp)
    zero = tuple([0] * spec.n)
    vz = weighted_derivative(series, zp, zero)
    vp = weighted_derivative(series, pp, zero)
    kzz = float(np.vdot(vz, vz).real)
    kpp = float(np.vdot(vp, vp).real)
    kzp = complex(np.dot(vz, np.conj(vp)))
    _check_zero_set(kzp, kzz, kpp, zp)
    return math.log(kzz) + math.log(kpp) - 2.0 * math.log(abs(kzp))


@dataclass(frozen=True)
class RepCoordinates:
    base: np.ndarray
    inverse_metric_at_base: np.ndarray
    reference_form: HermitianForm
    curvature_constant: float
    curvature_spread: float = 0.0
    # sqrt(c) * d^{e_j} t^alpha at the base point, conjugated.
    _base_vectors: tuple = field(default=(), repr=False)

    @property
    def hypothesis_ok(self) -> bool:
        return self.curvature_spread <= C2_SPREAD_LIMIT

    @property
    def implied_dimension(self) -> float:
        return 2.0 / self.curvature_constant - 1.0

    def weighted_norm_sq(self, w) -> float:
        return float(np.einsum("a,ab,b->", w, self.reference_form.matrix, np.conj(w)).real)


def estimate_curvature_constant(series: KernelSeries, p, *, fan: list | None = None) -> tuple[float, float]:
    """Mean and spread of -H over a direction fan at p."""
    n = series.spec.n
    directions = fan if fan is not None else direction_fan(n, C2_FAN_SIZE, seed=0)
    jet = metric_jet(series, p)
    values = np.array([-hsc_from_jet(jet, v) for v in directions])
    return float(values.mean()), float(values.max() - values.min())


def rep_coords(series: KernelSeries, p) -> tuple[RepCoordinates, Callable]:
    spec = series.spec
    base = as_point(spec, p)
    _require_inside(spec, base)
    n = spec.n
    g_p = metric_at(series, base)
    ginv = np.linalg.inv(g_p.matrix)
    c2, spread = estimate_curvature_constant(series, base)
    if not c2 > 0:
        raise NumericalError(f"Curvature constant estimate is not positive: {c2}")
    if spread > C2_SPREAD_LIMIT:
        logger.warning(
            "Curvature at %s is not constant on the fan (spread %.3e); isometry hypothesis flagged",
            base.tolist(), spread,
        )

    zero = tuple([0] * n)
    units = [tuple(1 if k == j else 0 for k in range(n)) for j in range(n)]
    vp0 = np.conj(weighted_derivative(series, base, zero))
    vpj = [np.conj(weighted_derivative(series, base, e)) for e in units]
    kpp = float(np.dot(weighted_derivative(series, base, zero), vp0).real)
    # d_{tbar_j} log K(t,t) at t = p
    log_grad = np.array([np.dot(weighted_derivative(series, base, zero), v) / kpp for v in vpj])

    coords = RepCoordinates(
        base=base,
        inverse_metric_at_base=ginv,
        reference_form=g_p,
        curvature_constant=c2,
        curvature_spread=spread,
        _base_vectors=(vp0, tuple(vpj), log_grad, kpp),
    )
    return coords, partial(rep_map, series, coords)


def _rep_terms(series: KernelSeries, coords: RepCoordinates, z: np.ndarray):
    spec = series.spec
    n = spec.n
    vp0, vpj, log_grad, kpp = coords._base_vectors
    zero = tuple([0] * n)
    vz = weighted_derivative(series, z, zero)
    kzp = complex(np.dot(vz, vp0))
    kzz = float(np.vdot(vz, vz).real)
    _check_zero_set(kzp, kzz, kpp, z)
    dt = np.array([np.dot(vz, v) for v in vpj])
    return vz, kzp, dt


def rep_map(series: KernelSeries, coords: RepCoordinates, z) -> np.ndarray:
    point = as_point(series.spec, z)
    _require_inside(series.spec, point)
    _, kzp, dt = _rep_terms(series, coords, point)
    x = dt / kzp - coords._base_vectors[2]
    return x @ coords.inverse_metric_at_base


def rep_jacobian(series: KernelSeries, coords: RepCoordinates, z) -> np.ndarray:
    """J[i, b] = d w_i / d z_b."""
    spec = series.spec
    n = spec.n
    point = as_point(spec, z)
    _require_inside(spec, point)
    vp0, vpj, _, _ = coords._base_vectors
    _, kzp, dt = _rep_terms(series, coords, point)
    units = [tuple(1 if k == j else 0 for k in range(n)) for j in range(n)]
    dz = [weighted_derivative(series, point, e) for e in units]
    dk = np.array([np.dot(d, vp0) for d in dz])
    # dX[j, b] = d_b X_j
    dX = np.empty((n, n), dtype=complex)
    for b in range(n):
        for j in range(n):
            dX[j, b] = (np.dot(dz[b], vpj[j]) * kzp - dt[j] * dk[b]) / kzp ** 2
    return coords.inverse_metric_at_base.T @ dX


def reference_metric(coords: RepCoordinates, w) -> np.ndarray:
    """Hessian of -(2/c^2) log(1 - (c^2/2) <w, w>_{g(p)}) at w."""
    gp = coords.reference_form.matrix
    kappa = coords.curvature_constant / 2.0
    w = np.asarray(w, dtype=complex)
    s = 1.0 - kappa * coords.weighted_norm_sq(w)
    a = gp @ np.conj(w)
    b = gp.T @ w
    return gp / s + kappa * np.outer(a, b) / s ** 2


@dataclass(frozen=True)
class IsometryResidual:
    potential_residual: float
    pullback_residual: float
    image_ok: bool
    curvature_constant: float
    curvature_spread: float
    hypothesis_ok: bool
    implied_dimension: float
    identity_defect: float
    rows: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "potential_residual": self.potential_residual,
            "pullback_residual": self.pullback_residual,
            "image_ok": self.image_ok,
            "curvature_constant": self.curvature_constant,
            "curvature_spread": self.curvature_spread,
            "hypothesis_ok": self.hypothesis_ok,
            "implied_dimension": self.implied_dimension,
            "identity_defect": self.identity_defect,
        }


def isometry_residual(series: KernelSeries, p, samples: list) -> IsometryResidual:
    coords, T = rep_coords(series, p)
    c2 = coords.curvature_constant
    kappa = c2 / 2.0

    def row(z):
        point = as_point(series.spec, z)
        w = T(point)
        q = coords.weighted_norm_sq(w)
        inside = q < 1.0 / kappa
        phi = potential_phi(series, coords.base, point)
        if inside:
            pot = abs(phi + (1.0 / kappa) * math.log(1.0 - kappa * q))
            J = rep_jacobian(series, coords, point)
            pulled = J.T @ reference_metric(coords, w) @ np.conj(J)
            g = metric_at(series, point).matrix
            pull = float(np.linalg.norm(g - pulled, 2) / np.linalg.norm(g, 2))
        else:
            pot = math.inf
            pull = math.inf
        return {
            "z": point,
            "w": w,
            "weighted_norm_sq": q,
            "potential_residual": pot,
            "pullback_residual": pull,
            "inside_image": bool(inside),
            "identity_defect": float(np.abs(w - point).max()),
        }

    rows = ordered_map(row, samples)
    return IsometryResidual(
        potential_residual=max((r["potential_residual"] for r in rows), default=0.0),
        pullback_residual=max((r["pullback_residual"] for r in rows), default=0.0),
        image_ok=all(r["inside_image"] for r in rows),
        curvature_constant=c2,
        curvature_spread=coords.curvature_spread,
        hypothesis_ok=coords.hypothesis_ok,
        implied_dimension=coords.implied_dimension,
        identity_defect=max((r["identity_defect"] for r in rows), default=0.0),
        rows=rows,
    )
