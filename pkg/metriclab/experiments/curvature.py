# metriclab/experiments/curvature.py
import math

import numpy as np

from ..bergman import curvature_scan, hsc_from_jet, isometry_residual, metric_jet
from ..extremal import lu_lower_bound
from ..errors import MetricLabError
from ..utils.parallel import ordered_map
from .base import RunContext, experiment, finite, point_columns


def _ball_threshold(n: int) -> float:
    return -2.0 / (n + 1)


@experiment(
    "ball-curvature",
    anchor="Bergman HSC of the ball is the constant -2/(n+1), the comparison threshold",
    defaults={
        "spec": "ball:2",
        "degree_cap": 40,
        "grid": {"count": 25, "seed": 0, "max_norm": 0.7},
        "fan": {"count": 16, "seed": 0},
        "tolerances": {"hsc": 1e-3},
    },
)
def ball_curvature(ctx: RunContext):
    """Bergman holomorphic sectional curvature against the ball value -2/(n+1)."""
    spec = ctx.spec
    threshold = _ball_threshold(spec.n)
    fan = ctx.fan()
    series = ctx.series

    def row(z):
        jet = metric_jet(series, z)
        values = [hsc_from_jet(jet, v) for v in fan]
        return {
            **point_columns(z),
            "hsc_min": min(values),
            "hsc_max": max(values),
            "max_abs_error": max(abs(h - threshold) for h in values),
        }

    points = ctx.points()
    rows = ordered_map(lambda item: ctx.isolated(row, item[1], item[0]), list(enumerate(points)))
    ctx.report.rows = rows

    lows = finite(r.get("hsc_min") for r in rows)
    highs = finite(r.get("hsc_max") for r in rows)
    errors = finite(r.get("max_abs_error") for r in rows)
    ctx.report.summary = {
        "threshold": threshold,
        "hsc_min": min(lows, default=math.nan),
        "hsc_max": max(highs, default=math.nan),
        "max_abs_error": max(errors, default=math.nan),
    }

    tol = ctx.tol["hsc"]
    if spec.kind == "ball" or (spec.kind == "disc"):
        worst = max(errors, default=math.inf)
        ctx.verdict("hsc-equals-ball-value", worst < tol, tolerance=tol, observed=worst)
    else:
        # a non-ball domain must dip strictly below the ball value somewhere
        low = min(lows, default=math.inf)
        ctx.verdict(
            "hsc-below-ball-value",
            low < threshold - tol,
            tolerance=tol,
            observed=low,
            kind="conditional",
            detail="finite scan; absence of a dip is not a proof",
        )


@experiment(
    "rep-isometry",
    anchor="representative coordinates give a holomorphic isometry onto the weighted ball",
    defaults={
        "spec": "ball:2",
        "degree_cap": 40,
        "grid": {"count": 20, "seed": 1, "max_norm": 0.6},
        "fan": {"count": 16, "seed": 0},
        "tolerances": {"potential": 1e-6, "pullback": 1e-6, "constant": 1e-3, "identity": 1e-6, "control": 1e-2},
        "params": {"base": None},
    },
)
def rep_isometry(ctx: RunContext):
    """Representative coordinates map isometrically onto the weighted ball."""
    spec = ctx.spec
    base = ctx.point(ctx.params["base"]) if ctx.params["base"] is not None else np.zeros(spec.n, dtype=complex)
    result = isometry_residual(ctx.series, base, ctx.points())

    rows = []
    for i, r in enumerate(result.rows):
        rows.append({
            "index": i,
            **point_columns(r["z"]),
            **point_columns(r["w"], prefix="w"),
            "weighted_norm_sq": r["weighted_norm_sq"],
            "potential_residual": r["potential_residual"],
            "pullback_residual": r["pullback_residual"],
            "inside_image": r["inside_image"],
            "identity_defect": r["identity_defect"],
            "error": "",
        })
    ctx.report.rows = rows
    ctx.report.summary = {**result.as_dict(), "base": point_columns(base)}

    if result.hypothesis_ok:
        ctx.verdict("potential-identity", result.potential_residual < ctx.tol["potential"],
                    tolerance=ctx.tol["potential"], observed=result.potential_residual)
        ctx.verdict("pullback-identity", result.pullback_residual < ctx.tol["pullback"],
                    tolerance=ctx.tol["pullback"], observed=result.pullback_residual)
        ctx.verdict("image-in-weighted-ball", result.image_ok, tolerance=0.0)
        if spec.kind in {"ball", "disc"}:
            expected = -_ball_threshold(spec.n)
            ctx.verdict("curvature-constant", abs(result.curvature_constant - expected) < ctx.tol["constant"],
                        tolerance=ctx.tol["constant"], observed=result.curvature_constant,
                        detail=f"ball value {expected:.12g}")
            dimension = round(result.implied_dimension)
            ctx.verdict("implied-dimension", dimension == spec.n, tolerance=0.0,
                        observed=result.implied_dimension, detail=f"n = {spec.n}")
            if not np.any(base):
                # at the centre of the ball the coordinates are the identity
                ctx.verdict("identity-map", result.identity_defect < ctx.tol["identity"],
                            tolerance=ctx.tol["identity"], observed=result.identity_defect)
    else:
        # negative control: curvature is not constant, so the pulled-back metric must differ
        worst = result.pullback_residual
        ctx.verdict(
            "pullback-identity-breaks",
            worst > ctx.tol["control"],
            tolerance=ctx.tol["control"],
            observed=worst,
            kind="expected-fail",
        )


@experiment(
    "curvature-threshold",
    anchor="Bergman HSC is bounded above by -2 L^2 somewhere in the domain",
    defaults={
        "spec": "ball:2",
        "degree_cap": 120,
        "grid": {"count": 10, "seed": 2, "max_norm": 0.9},
        "fan": {"count": 8, "seed": 0},
        "tolerances": {"hsc": 1e-3},
        "solver": {"degree": 2, "samples": None},
        "params": {"exact": None},
    },
)
def curvature_threshold(ctx: RunContext):
    """Minimum strip curvature against -2 L_est^2 from the estimated Lu constant."""
    spec = ctx.spec
    points = ctx.strip_points()
    fan = ctx.fan()
    series = ctx.series

    summary = curvature_scan(series, points, fan)
    try:
        lu = lu_lower_bound(
            spec, series, points, fan,
            ctx.config.solver.get("degree") or 2,
            ctx.config.solver.get("samples"),
            exact=ctx.params["exact"],
        )
        lu_value = lu.value
        lu_error = ""
    except MetricLabError as e:
        lu_value = math.nan
        lu_error = f"{type(e).__name__}: {e}"

    rows = []
    for i, z in enumerate(points):
        values = summary.values[i]
        rows.append({
            "index": i,
            **point_columns(z),
            "hsc_min": float(values.min()),
            "hsc_max": float(values.max()),
            "error": "",
        })
    ctx.report.rows = rows

    bound = -2.0 * lu_value ** 2
    ctx.report.summary = {
        **summary.as_dict(),
        "boundary_strip": ctx.config.boundary_strip,
        "lu_estimate": lu_value,
        "threshold": bound,
    }
    if lu_error:
        ctx.report.diagnostics["lu_error"] = lu_error

    tol = ctx.tol["hsc"]
    ctx.verdict(
        "min-hsc-below-lu-threshold",
        math.isfinite(bound) and summary.min <= bound + tol,
        tolerance=tol,
        observed=summary.min,
        kind="conditional",
        detail="compared against the estimated (lower-bound) Lu constant",
    )
