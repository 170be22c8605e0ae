# tests/test_convex.py
import numpy as np
import pytest

from metriclab.domains import boundary_charts, boundary_mesh, parse_spec
from metriclab.extremal import CandidateFamily
from metriclab.utils.convex import boundary_peak, certify, maximize_derivative


def _annulus_case():
    spec = parse_spec("annulus:0.5")
    family = CandidateFamily.build(spec, 0.7, 3)
    rng = np.random.default_rng(4)
    coeffs = rng.normal(size=family.size) + 1j * rng.normal(size=family.size)
    dense = np.abs(family.values(boundary_mesh(spec, 100_000)) @ coeffs).max()
    return spec, family, coeffs, dense


def test_certified_value_bounds_dense_samples():
    spec, family, coeffs, dense = _annulus_case()
    certified, info = certify(coeffs, family, boundary_charts(spec), 0.0, tol=1e-3)
    assert certified >= dense
    assert info["unresolved_cells"] == 0
    assert certified <= dense * (1 + 2e-3)
    assert info["boundary_peak"] <= certified


def test_certification_stays_an_upper_bound_at_the_cell_budget():
    spec, family, coeffs, dense = _annulus_case()
    certified, info = certify(coeffs, family, boundary_charts(spec), 0.0, tol=1e-9, max_cells=1000)
    assert info["unresolved_cells"] > 0
    assert certified >= dense


def test_boundary_peak_is_a_lower_estimate():
    spec, family, coeffs, dense = _annulus_case()
    peak, found = boundary_peak(coeffs, family, boundary_charts(spec))
    assert peak <= dense * (1 + 1e-6)
    assert peak >= 0.99 * dense
    assert found.shape[1] == spec.n


def test_maximize_derivative_on_disc():
    spec = parse_spec("disc")
    family = CandidateFamily.build(spec, 0.3, 2)
    mesh = boundary_mesh(spec, 64)
    solution = maximize_derivative(family.derivative(np.array([1.0])), family, mesh, boundary_charts(spec))
    assert solution.value == pytest.approx(1 / 0.91, rel=5e-3)
    assert solution.value <= (1 / 0.91) * (1 + 1e-9)
    assert solution.certified_sup >= solution.diagnostics["boundary_peak"]
    assert 0 <= solution.slack < 1
    assert solution.diagnostics["exchange_rounds"] >= 0
