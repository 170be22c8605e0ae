import cmath
import math

import pytest

from metriclab.domains import parse_spec
from metriclab.errors import DomainError
from metriclab.surface import (
    analytic_capacity,
    analytic_capacity_bound,
    chain_report,
    greens_function,
    harmonic_correction,
    log_capacity,
    poincare_density,
    rigidity_gap,
)

DISC = parse_spec("disc")
ANNULUS = parse_spec("annulus:0.5")


# =====================================================
# POINCARE DENSITY
# =====================================================
def test_disc_density():
    assert poincare_density(DISC, 0) == pytest.approx(1.0)
    assert poincare_density(DISC, 0.5) == pytest.approx(4 / 3)
    assert poincare_density(parse_spec("disc*2.0"), 0) == pytest.approx(0.5)


def test_annulus_density_inversion_symmetry():
    r = 0.5
    for rho in (0.55, 0.62, 0.8, 0.93):
        mirrored = poincare_density(ANNULUS, r / rho) * r / rho ** 2
        assert mirrored == pytest.approx(poincare_density(ANNULUS, rho), rel=1e-12)


def test_annulus_core_circle_is_shortest():
    core = math.sqrt(0.5)
    core_length = poincare_density(ANNULUS, core) * core
    for rho in (0.55, 0.65, 0.8, 0.95):
        assert poincare_density(ANNULUS, rho) * rho > core_length


def test_annulus_density_is_radial():
    assert poincare_density(ANNULUS, 0.7j) == pytest.approx(poincare_density(ANNULUS, 0.7), rel=1e-14)


def test_density_errors():
    with pytest.raises(DomainError):
        poincare_density(ANNULUS, 0.3)
    with pytest.raises(DomainError):
        poincare_density(parse_spec("ball:2"), [0, 0])


# =====================================================
# GREEN'S FUNCTION AND LOGARITHMIC CAPACITY
# =====================================================
def test_disc_green_at_origin():
    for z in (0.3, -0.2 + 0.5j, 0.9j):
        assert greens_function(DISC, z, 0) == pytest.approx(math.log(abs(z)), abs=1e-10)


def test_disc_green_matches_mobius():
    z0 = 0.3 + 0.2j
    for z in (-0.4 + 0.1j, 0.7, 0.1 - 0.6j):
        expected = math.log(abs(z - z0)) - math.log(abs(1 - z0.conjugate() * z))
        assert greens_function(DISC, z, z0) == pytest.approx(expected, abs=1e-8)


def test_disc_green_vanishes_on_boundary():
    assert greens_function(DISC, 1.0, 0.3) == pytest.approx(0.0, abs=1e-8)
    assert greens_function(DISC, cmath.exp(2j), 0.3) == pytest.approx(0.0, abs=1e-8)


def test_annulus_green_is_symmetric():
    for z, w in ((0.6j, 0.8), (-0.7 + 0.1j, 0.55 + 0.3j)):
        assert greens_function(ANNULUS, z, w) == pytest.approx(greens_function(ANNULUS, w, z), abs=1e-8)


def test_annulus_green_vanishes_on_both_circles():
    for b in (0.5j, -1.0, 0.5 * cmath.exp(1j), cmath.exp(-2.5j)):
        assert greens_function(ANNULUS, b, 0.7) == pytest.approx(0.0, abs=1e-8)
    assert greens_function(ANNULUS, -0.6, 0.7) < 0


def test_green_errors():
    with pytest.raises(DomainError):
        greens_function(DISC, 0.3, 0.3)
    with pytest.raises(DomainError):
        greens_function(DISC, 1.2, 0.3)
    with pytest.raises(DomainError):
        harmonic_correction(ANNULUS, 0.7, truncation=0)


def test_harmonic_correction_reports_residual():
    solution = harmonic_correction(ANNULUS, 0.7)
    assert solution.boundary_residual <= 1e-10
    assert solution.truncation >= 32
    assert set(solution.coeffs) == {"one", "log", "re_pos", "im_pos", "re_neg", "im_neg"}


def test_disc_log_capacity():
    assert log_capacity(DISC, 0) == pytest.approx(1.0, abs=1e-12)
    assert log_capacity(DISC, 0.5) == pytest.approx(4 / 3, rel=1e-9)
    assert log_capacity(parse_spec("disc*2.0"), 0) == pytest.approx(0.5, rel=1e-12)


def test_annulus_log_capacity_is_stable_in_truncation():
    coarse = log_capacity(ANNULUS, 0.7, truncation=24)
    fine = log_capacity(ANNULUS, 0.7, truncation=48)
    assert coarse == pytest.approx(fine, abs=1e-6)


def test_annulus_log_capacity_is_rotation_invariant():
    assert log_capacity(ANNULUS, 0.7j) == pytest.approx(log_capacity(ANNULUS, 0.7), abs=1e-12)


# =====================================================
# ANALYTIC CAPACITY
# =====================================================
def test_disc_analytic_capacity():
    assert analytic_capacity(DISC, 0.4, 4) == pytest.approx(1 / 0.84, rel=1e-5)


def test_annulus_analytic_capacity_below_log_capacity():
    assert analytic_capacity(ANNULUS, 0.7) <= log_capacity(ANNULUS, 0.7) + 1e-6


def test_analytic_capacity_grows_with_degree():
    low = analytic_capacity(ANNULUS, 0.7, 4)
    high = analytic_capacity(ANNULUS, 0.7, 8)
    assert high >= low * (1 - 1e-6)


def test_analytic_capacity_bound_exponents():
    bound = analytic_capacity_bound(ANNULUS, 0.7, 4)
    assert bound.exponents == tuple(range(-4, 5))
    assert analytic_capacity_bound(DISC, 0.2, 4).exponents == tuple(range(0, 5))


def test_analytic_capacity_errors():
    with pytest.raises(DomainError):
        analytic_capacity(DISC, 0.3, 3)
    with pytest.raises(DomainError):
        analytic_capacity(DISC, 0.3, 4, 32)


# =====================================================
# CHAIN AND RIGIDITY
# =====================================================
def test_disc_chain_is_all_equal(series_for):
    report = chain_report(DISC, series_for("disc", 60), 0.5)
    expected = 1 / 0.75 ** 2
    assert report.half_bergman == pytest.approx(expected, rel=1e-6)
    assert report.poincare_sq == pytest.approx(expected, rel=1e-6)
    assert report.log_cap_sq == pytest.approx(expected, rel=1e-6)
    assert report.ana_cap_sq == pytest.approx(expected, rel=1e-5)
    assert report.ordered()
    assert report.hsc == pytest.approx(-1.0, abs=1e-6)


def test_annulus_chain_is_ordered(series_for):
    spec = parse_spec("annulus:0.3")
    report = chain_report(spec, series_for("annulus:0.3", 80), 0.6)
    assert report.ordered()
    assert report.margins[1] > 0
    row = report.as_row()
    assert list(row) == [
        "z0_re", "z0_im", "half_B", "lambda_sq", "cbeta_sq", "cB_sq",
        "margin1", "margin2", "margin3", "hsc", "residuals",
    ]
    assert row["z0_re"] == pytest.approx(0.6)


def test_chain_rejects_mismatched_series(series_for):
    with pytest.raises(DomainError):
        chain_report(ANNULUS, series_for("annulus:0.3", 10), 0.7)


def test_disc_rigidity_gap_vanishes(series_for):
    assert rigidity_gap(DISC, series_for("disc", 60), 0.4) == pytest.approx(0.0, abs=1e-4)


def test_annulus_rigidity_gap_is_positive(series_for):
    spec = parse_spec("annulus:0.3")
    assert rigidity_gap(spec, series_for("annulus:0.3", 80), 0.6) > 1e-4


def test_rigidity_gap_scales_under_dilation(series_for):
    spec = parse_spec("annulus:0.3")
    small = spec.scaled(0.5)
    gap = rigidity_gap(spec, series_for("annulus:0.3", 80), 0.6)
    scaled = rigidity_gap(small, series_for(small.canonical, 80), 0.3)
    assert scaled == pytest.approx(gap / 0.25, rel=1e-6)


def test_rigidity_gap_rejects_unknown_capacity(series_for):
    with pytest.raises(DomainError):
        rigidity_gap(DISC, series_for("disc", 10), 0.4, capacity="green")
