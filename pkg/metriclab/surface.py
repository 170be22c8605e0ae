# metriclab/surface.py
"""One-dimensional potential theory on the disc and the annulus.

Conventions: the Poincaré density is normalized by lambda(0) = 1 on the unit
disc (tensor 1/(1 - |z|^2)^2, curvature -2 in the -(1/lambda^2) ddbar log
lambda^2 bookkeeping), so that on the disc

    B/2 = lambda^2 = c_beta^2 = c_B^2 = 1/(1 - |z|^2)^2.
"""
import logging
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .bergman import KernelSeries, hsc_at, metric_at
from .config import Config
from .domains import DomainSpec, as_point, boundary_charts, boundary_mesh, contains, defining_function
from .errors import CollocationError, CurvatureValidationError, DomainError
from .utils.convex import ConvexSolution, maximize_derivative

logger = logging.getLogger(__name__)

PLANAR_KINDS = {"disc", "annulus"}
CURVATURE_TOL = 1e-8
CLOSURE_TOL = 1e-12
MAX_TRUNCATION = 4096
CHAIN_TOL = 1e-6


def _require_planar(spec: DomainSpec):
    if spec.kind not in PLANAR_KINDS:
        raise DomainError(f"Planar potential theory needs a disc or an annulus, got {spec.canonical}")


def _scalar(spec: DomainSpec, z) -> complex:
    return complex(as_point(spec, z)[0])


def _require_inside(spec: DomainSpec, z: complex):
    if not contains(spec, np.array([z])):
        raise DomainError(f"Point {z} is outside {spec.canonical}")


# =====================================================
# POINCARE DENSITY
# =====================================================
def _log_density_sq(spec: DomainSpec, rho):
    """log lambda^2 at radius rho in base coordinates (mpmath or float)."""
    if spec.kind == "disc":
        return -2 * mpmath.log(1 - rho ** 2)
    strip = -mpmath.log(spec.r)
    x = mpmath.log(rho) - mpmath.log(spec.r)
    density = mpmath.pi / (2 * strip * rho * mpmath.sin(mpmath.pi * x / strip))
    return 2 * mpmath.log(density)


def _validate_curvature(spec: DomainSpec, rho: float):
    with mpmath.workdps(30):
        rho_mp = mpmath.mpf(rho)

        def f(t):
            return _log_density_sq(spec, t)

        first = mpmath.diff(f, rho_mp, 1)
        second = mpmath.diff(f, rho_mp, 2)
        laplacian_quarter = (second + first / rho_mp) / 4
        curvature = -laplacian_quarter / mpmath.exp(f(rho_mp))
        defect = float(abs(curvature + 2))
    if defect > CURVATURE_TOL:
        raise CurvatureValidationError(
            f"Poincaré density on {spec.canonical} fails the curvature check at |z| = {rho}: "
            f"defect {defect:.3e}"
        )


def poincare_density(spec: DomainSpec, z) -> float:
    """Density lambda with lambda^2 the Poincaré tensor; curvature-checked on every call."""
    _require_planar(spec)
    point = _scalar(spec, z)
    _require_inside(spec, point)
    s = spec.scale
    u = point / s
    rho = abs(u)

    if spec.kind == "disc":
        value = 1.0 / (1.0 - rho * rho)
        # the radial check is singular at the centre; the disc formula is radial and analytic there
        probe = rho if rho > 1e-6 else 0.5
    else:
        # covering map exp from the strip log r < Re w < 0
        strip = -math.log(spec.r)
        x = math.log(rho) - math.log(spec.r)
        value = math.pi / (2.0 * strip * rho * math.sin(math.pi * x / strip))
        probe = rho
    _validate_curvature(spec, probe)
    return value / s


# =====================================================
# HARMONIC CORRECTION OF THE GREEN'S FUNCTION
# =====================================================
@dataclass(frozen=True)
class HarmonicSolution:
    """u harmonic with u = -log|. - z0| on the boundary, in base coordinates.

    u(w) = A + B log|w| + Re sum a_k w^k + Re sum c_k (r/w)^k, evaluated after
    rotating w by ``phase`` so the pole sits on the positive real axis.
    """

    spec: DomainSpec
    z0: complex
    constant: float
    log_coeff: float
    outer: np.ndarray
    inner: np.ndarray
    truncation: int
    boundary_residual: float
    phase: complex = 1.0

    @property
    def coeffs(self) -> dict:
        """Coefficients over {1, log|z|, Re z^k, Im z^k, Re z^-k, Im z^-k} (base coordinates, rotated frame)."""
        ks = np.arange(1, self.truncation + 1)
        r = self.spec.r if self.spec.kind == "annulus" else 0.0
        inner = self.inner * r ** ks if r else np.zeros_like(self.outer)
        return {
            "one": self.constant,
            "log": self.log_coeff,
            "re_pos": self.outer.real.tolist(),
            "im_pos": (-self.outer.imag).tolist(),
            "re_neg": inner.real.tolist(),
            "im_neg": (-inner.imag).tolist(),
        }

    def evaluate_base(self, w: np.ndarray) -> np.ndarray:
        w = np.atleast_1d(np.asarray(w, dtype=complex)) * np.conj(self.phase)
        ks = np.arange(1, self.truncation + 1)
        value = self.constant + np.zeros(w.shape)
        value = value + np.real(np.power(w[:, None], ks[None, :]) @ self.outer)
        if self.spec.kind == "annulus":
            value = value + self.log_coeff * np.log(np.abs(w))
            value = value + np.real(np.power(self.spec.r / w[:, None], ks[None, :]) @ self.inner)
        return value

    def __call__(self, z) -> float:
        s = self.spec.scale
        return float(self.evaluate_base(np.array([_scalar(self.spec, z) / s]))[0]) - math.log(s)


def _fourier(data: np.ndarray, truncation: int) -> np.ndarray:
    return np.fft.fft(data)[: truncation + 1] / data.shape[0]


def _solve_modes(spec: DomainSpec, a: float, truncation: int) -> HarmonicSolution:
    nodes = 8 * truncation
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    circle = np.exp(1j * theta)
    F = _fourier(-np.log(np.abs(circle - a)), truncation)
    ks = np.arange(1, truncation + 1)

    if spec.kind == "disc":
        constant = float(F[0].real)
        log_coeff = 0.0
        outer = 2.0 * F[1:]
        inner = np.zeros(truncation, dtype=complex)
    else:
        r = spec.r
        E = _fourier(-np.log(np.abs(r * circle - a)), truncation)
        rk = r ** ks
        denom = 1.0 - rk * rk
        constant = float(F[0].real)
        log_coeff = float((E[0].real - constant) / math.log(r))
        outer = (2.0 * F[1:] - 2.0 * E[1:] * rk) / denom
        inner = np.conj((2.0 * E[1:] - 2.0 * F[1:] * rk) / denom)

    solution = HarmonicSolution(spec, complex(a), constant, log_coeff, outer, inner, truncation, 0.0)
    return _with_residual(solution, a, nodes)


def _with_residual(solution: HarmonicSolution, a: float, nodes: int) -> HarmonicSolution:
    # off-node check: half-step shifted samples on every boundary circle
    theta = 2.0 * math.pi * (np.arange(nodes) + 0.5) / nodes
    circles = [np.exp(1j * theta)]
    if solution.spec.kind == "annulus":
        circles.append(solution.spec.r * np.exp(1j * theta))
    residual = 0.0
    for w in circles:
        miss = solution.evaluate_base(w) + np.log(np.abs(w - a))
        residual = max(residual, float(np.abs(miss).max()))
    return HarmonicSolution(
        solution.spec,
        solution.z0,
        solution.constant,
        solution.log_coeff,
        solution.outer,
        solution.inner,
        solution.truncation,
        residual,
    )


def harmonic_correction(spec: DomainSpec, z0, truncation: int | None = None) -> HarmonicSolution:
    """Least-squares collocation for the harmonic part of G(., z0).

    With a fixed ``truncation`` the residual is only reported. Otherwise N
    doubles from the configured start until the residual meets the target.
    """
    _require_planar(spec)
    pole = _scalar(spec, z0)
    _require_inside(spec, pole)
    s = spec.scale
    a = abs(pole) / s
    phase = pole / abs(pole) if abs(pole) > 0 else 1.0
    tol = Config.GREEN_TOL

    if truncation is not None:
        if int(truncation) != truncation or truncation < 1:
            raise DomainError(f"Truncation must be a positive integer, got {truncation}")
        solution = _solve_modes(spec, a, int(truncation))
        if solution.boundary_residual > tol:
            logger.warning(
                "Collocation residual %.3e above %.1e at N=%s on %s",
                solution.boundary_residual, tol, truncation, spec.canonical,
            )
    else:
        N = Config.GREEN_TRUNCATION
        while True:
            solution = _solve_modes(spec, a, N)
            if solution.boundary_residual <= tol:
                break
            if N >= MAX_TRUNCATION:
                raise CollocationError(
                    f"Collocation residual {solution.boundary_residual:.3e} above {tol:.1e} "
                    f"at N={N} on {spec.canonical}"
                )
            N *= 2
    return HarmonicSolution(
        solution.spec,
        pole,
        solution.constant,
        solution.log_coeff,
        solution.outer,
        solution.inner,
        solution.truncation,
        solution.boundary_residual,
        phase,
    )


def greens_function(spec: DomainSpec, z, z0, *, truncation: int | None = None) -> float:
    """G(z, z0) = log|z - z0| + u(z); zero on the boundary, negative inside."""
    _require_planar(spec)
    point = _scalar(spec, z)
    pole = _scalar(spec, z0)
    if defining_function(spec, np.array([point])) > CLOSURE_TOL:
        raise DomainError(f"Point {point} is outside the closure of {spec.canonical}")
    if point == pole:
        raise DomainError("Green's function is singular at its pole")
    solution = harmonic_correction(spec, pole, truncation)
    return math.log(abs(point - pole)) + solution(point)


def log_capacity(spec: DomainSpec, z0, *, truncation: int | None = None) -> float:
    solution = harmonic_correction(spec, z0, truncation)
    return math.exp(solution(z0))


# =====================================================
# ANALYTIC CAPACITY
# =====================================================
@dataclass(frozen=True)
class CapacityBound:
    value: float
    solution: ConvexSolution
    exponents: tuple[int, ...]

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class CapacityBasis:
    """Mobius factor at the pole times the powers w^k, in base coordinates."""

    pole: float
    scale: float
    exponents: tuple[int, ...]

    def _parts(self, points):
        w = np.asarray(points, dtype=complex).reshape(-1, 1)[:, 0] / self.scale
        a = self.pole
        denom = 1.0 - a * w
        return w, (w - a) / denom, (1.0 - a * a) / denom ** 2

    def values(self, points: np.ndarray) -> np.ndarray:
        w, mobius, _ = self._parts(points)
        return mobius[:, None] * np.power(w[:, None], np.array(self.exponents)[None, :])

    def gradients(self, points: np.ndarray) -> np.ndarray:
        w, mobius, slope = self._parts(points)
        ks = np.array(self.exponents)[None, :]
        out = slope[:, None] * np.power(w[:, None], ks) + ks * mobius[:, None] * np.power(w[:, None], ks - 1.0)
        return out[:, :, None] / self.scale

    def derivative_bounds(self, points: np.ndarray, spread: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = np.asarray(points, dtype=complex).reshape(-1, 1)[:, 0] / self.scale
        r = np.asarray(spread, dtype=float).reshape(-1, 1)[:, 0] / self.scale
        a = self.pole
        gap = np.abs(1.0 - a * w) - a * r
        gap = np.where(gap > 0, gap, np.nan)
        mod = (np.abs(w - a) + r) / gap
        d1 = (1.0 - a * a) / gap ** 2
        d2 = 2.0 * a * (1.0 - a * a) / gap ** 3
        outer = np.abs(w) + r
        inner = np.abs(w) - r
        inner = np.where(inner > 0, inner, np.nan)

        def power(e):
            if e == 0:
                return np.ones_like(outer)
            return outer ** e if e > 0 else inner ** e

        first, second = [], []
        for k in self.exponents:
            first.append(d1 * power(k) + (abs(k) * mod * power(k - 1) if k else 0.0))
            term = d2 * power(k)
            if k:
                term = term + 2 * abs(k) * d1 * power(k - 1)
            if k not in (0, 1):
                term = term + abs(k * (k - 1)) * mod * power(k - 2)
            second.append(term)
        first = np.stack(first, axis=1)
        second = np.stack(second, axis=1)
        first = np.where(np.isnan(first), np.inf, first) / self.scale
        second = np.where(np.isnan(second), np.inf, second) / self.scale ** 2
        return first[:, :, None], second[:, :, None, None]


def _capacity_exponents(spec: DomainSpec, d: int) -> tuple[int, ...]:
    low = -d if spec.kind == "annulus" else 0
    return tuple(range(low, d + 1))


def analytic_capacity_bound(spec: DomainSpec, z0, d: int = 8, M: int | None = None) -> CapacityBound:
    _require_planar(spec)
    pole = _scalar(spec, z0)
    _require_inside(spec, pole)
    if d < 4:
        raise DomainError(f"Analytic capacity needs degree >= 4, got {d}")
    M = 32 * d if M is None else M
    if M < 16 * d:
        raise DomainError(f"Need at least {16 * d} boundary samples for degree {d}, got {M}")

    s = spec.scale
    # moduli are rotation invariant; solve with the pole on the positive axis
    a = abs(pole) / s
    exponents = _capacity_exponents(spec, d)
    ks = np.array(exponents)
    basis = CapacityBasis(a, s, exponents)
    gradient = np.power(complex(a), ks) / (1.0 - a * a) if a > 0 else (ks == 0).astype(complex)
    solution = maximize_derivative(gradient, basis, boundary_mesh(spec, M), boundary_charts(spec))
    return CapacityBound(solution.value / s, solution, exponents)


def analytic_capacity(spec: DomainSpec, z0, d: int = 8, M: int | None = None) -> float:
    """Certified lower bound for sup |f'(z0)| over f: Omega -> unit disc with f(z0) = 0."""
    return analytic_capacity_bound(spec, z0, d, M).value


# =====================================================
# CHAIN AND RIGIDITY
# =====================================================
@dataclass(frozen=True)
class ChainReport:
    z0: complex
    half_bergman: float
    poincare_sq: float
    log_cap_sq: float
    ana_cap_sq: float
    hsc: float
    harmonic_residual: float = 0.0
    capacity_diagnostics: dict = field(default_factory=dict)

    @property
    def margins(self) -> tuple[float, float, float]:
        return (
            self.half_bergman - self.poincare_sq,
            self.poincare_sq - self.log_cap_sq,
            self.log_cap_sq - self.ana_cap_sq,
        )

    def ordered(self, tol: float = CHAIN_TOL) -> bool:
        return all(m >= -tol for m in self.margins)

    def as_row(self) -> dict:
        m1, m2, m3 = self.margins
        return {
            "z0_re": self.z0.real,
            "z0_im": self.z0.imag,
            "half_B": self.half_bergman,
            "lambda_sq": self.poincare_sq,
            "cbeta_sq": self.log_cap_sq,
            "cB_sq": self.ana_cap_sq,
            "margin1": m1,
            "margin2": m2,
            "margin3": m3,
            "hsc": self.hsc,
            "residuals": self.harmonic_residual,
        }


def _check_series(spec: DomainSpec, series: KernelSeries):
    _require_planar(spec)
    if series.spec != spec:
        raise DomainError(f"Series is for {series.spec.canonical}, not {spec.canonical}")


def chain_report(spec: DomainSpec, series: KernelSeries, z0, *, d: int = 8, M: int | None = None) -> ChainReport:
    _check_series(spec, series)
    pole = _scalar(spec, z0)
    bergman = float(metric_at(series, pole).matrix[0, 0].real)
    harmonic = harmonic_correction(spec, pole)
    cap = analytic_capacity_bound(spec, pole, d, M)
    report = ChainReport(
        z0=pole,
        half_bergman=0.5 * bergman,
        poincare_sq=poincare_density(spec, pole) ** 2,
        log_cap_sq=math.exp(2.0 * harmonic(pole)),
        ana_cap_sq=cap.value ** 2,
        hsc=hsc_at(series, pole, [1.0]),
        harmonic_residual=harmonic.boundary_residual,
        capacity_diagnostics=cap.solution.as_dict(),
    )
    if report.hsc < -1.0 - 1e-3:
        logger.warning("Curvature hypothesis H >= -1 fails at %s: H = %.6f", pole, report.hsc)
    return report


def rigidity_gap(
    spec: DomainSpec,
    series: KernelSeries,
    z0,
    *,
    capacity: str = "analytic",
    d: int = 8,
    M: int | None = None,
) -> float:
    """B(z0) - 2 c^2(z0); vanishes on the disc."""
    _check_series(spec, series)
    pole = _scalar(spec, z0)
    bergman = float(metric_at(series, pole).matrix[0, 0].real)
    if capacity == "analytic":
        c = analytic_capacity(spec, pole, d, M)
    elif capacity == "logarithmic":
        c = log_capacity(spec, pole)
    else:
        raise DomainError(f"Unknown capacity {capacity!r}; use 'analytic' or 'logarithmic'")
    return bergman - 2.0 * c * c
