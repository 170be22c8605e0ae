# metriclab/experiments/invariance.py
import math

import numpy as np
from scipy.stats import unitary_group

from ..bergman import bergman_length, closed_form_metric, has_closed_form, hsc_at, metric_at
from ..cache import get_or_build
from ..extremal import carath_value, ck_interval, kobayashi_upper_bound
from ..surface import PLANAR_KINDS, log_capacity
from .base import RunContext, experiment


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


@experiment(
    "invariance-suite",
    anchor="cross-module property checks (rotations, dilations, homogeneity, oracles)",
    defaults={
        "spec": "ball:2",
        "degree_cap": 30,
        "grid": {"count": 4, "seed": 8, "max_norm": 0.6},
        "fan": {"count": 4, "seed": 0},
        "tolerances": {
            "rotation": 1e-8,
            "unitary": 1e-8,
            "dilation": 1e-8,
            "homogeneity": 1e-10,
            "oracle": 1e-6,
            "capacity": 1e-10,
        },
        "solver": {"degree": 2, "samples": None},
        "params": {"dilation": 0.5, "phase_seed": 11},
    },
)
def invariance_suite(ctx: RunContext):
    """Symmetry and covariance checks that every module must satisfy."""
    spec = ctx.spec
    series = ctx.series
    points = ctx.points()
    fan = ctx.fan()
    factor = float(ctx.params["dilation"])
    scaled = spec.scaled(factor)
    scaled_series = get_or_build(scaled, ctx.config.degree_cap)
    rng = np.random.default_rng(int(ctx.params["phase_seed"]))
    d = ctx.config.solver.get("degree") or 2
    M = ctx.config.solver.get("samples")

    checks: dict[str, list[float]] = {}

    def record(name: str, index: int, value: float):
        checks.setdefault(name, []).append(value)
        ctx.report.rows.append({
            "index": len(ctx.report.rows),
            "check": name,
            "point_index": index,
            "value": value,
            "tolerance": ctx.tol[_TOLERANCE_OF[name]],
            "error": "",
        })

    for i, z in enumerate(points):
        phases = np.exp(2j * math.pi * rng.random(spec.n))
        v = fan[i % len(fan)]
        h = hsc_at(series, z, v)
        # every catalog domain is invariant under coordinate rotations
        record("hsc-rotation", i, abs(hsc_at(series, phases * z, phases * v) - h))
        record("hsc-dilation", i, abs(hsc_at(scaled_series, factor * z, v) - h))
        if spec.kind == "ball":
            # the ball is also invariant under the full unitary group
            U = unitary_group.rvs(spec.n, random_state=rng) if spec.n > 1 else phases.reshape(1, 1)
            record("hsc-unitary", i, abs(hsc_at(series, U @ z, U @ v) - h))

        g = metric_at(series, z).matrix
        # g_{rD}(rz) = g_D(z) / r^2
        g_scaled = metric_at(scaled_series, factor * z).matrix
        record("bergman-dilation", i, float(np.linalg.norm(g_scaled * factor ** 2 - g, 2) / np.linalg.norm(g, 2)))

        lam = 2.0 * np.exp(0.7j)
        c = carath_value(spec, z, v, d, M)
        record("carath-homogeneity", i, _relative(carath_value(spec, z, lam * v, d, M), abs(lam) * c))
        k = kobayashi_upper_bound(spec, z, v).value
        record("kobayashi-homogeneity", i, _relative(kobayashi_upper_bound(spec, z, lam * v).value, abs(lam) * k))
        record("bergman-homogeneity", i, _relative(bergman_length(g, lam * v), abs(lam) * bergman_length(g, v)))

        if has_closed_form(spec):
            exact = closed_form_metric(spec, z).matrix
            record("bergman-oracle", i, float(np.linalg.norm(g - exact, 2) / np.linalg.norm(exact, 2)))

        if spec.kind in PLANAR_KINDS:
            base = log_capacity(spec, z[0])
            record("capacity-rotation", i, _relative(log_capacity(spec, z[0] * phases[0]), base))

    if points:
        interval = ck_interval(spec, points[0], fan[0], max(d, 3), M)
        ctx.report.summary["bracket"] = {"lower": interval.lower, "upper": interval.upper, "exact": interval.exact}

    for name, values in checks.items():
        tol = ctx.tol[_TOLERANCE_OF[name]]
        worst = max(values)
        ctx.report.summary[name] = worst
        ctx.verdict(name, worst < tol, tolerance=tol, observed=worst)


_TOLERANCE_OF = {
    "hsc-rotation": "rotation",
    "hsc-unitary": "unitary",
    "hsc-dilation": "dilation",
    "bergman-dilation": "dilation",
    "carath-homogeneity": "homogeneity",
    "kobayashi-homogeneity": "homogeneity",
    "bergman-homogeneity": "homogeneity",
    "bergman-oracle": "oracle",
    "capacity-rotation": "capacity",
}
