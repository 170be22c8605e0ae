# metriclab/experiments/chain.py
import math

from ..cache import get_or_build
from ..surface import chain_report, rigidity_gap
from ..utils.parallel import ordered_map
from .base import RunContext, experiment, finite, point_columns


def _capacity_args(ctx: RunContext) -> dict:
    return {"d": ctx.config.solver.get("degree") or 8, "M": ctx.config.solver.get("samples")}


@experiment(
    "chain-annulus",
    anchor="chain of planar metrics: B/2 >= lambda^2 >= c_beta^2 >= c_B^2",
    defaults={
        "spec": "annulus:0.3",
        "degree_cap": 400,
        "grid": {"count": 40, "seed": 6, "min_norm": 0.35, "max_norm": 0.95},
        "fan": {"count": 1, "seed": 0},
        "tolerances": {"chain": 1e-6, "strict": 1e-4, "hsc": 1e-3, "disc": 1e-6},
        "solver": {"degree": 8, "samples": None},
    },
)
def chain_annulus(ctx: RunContext):
    """Ordering B/2 >= lambda^2 >= c_beta^2 >= c_B^2 at sampled points."""
    spec = ctx.spec
    series = ctx.series
    args = _capacity_args(ctx)

    def row(z):
        return chain_report(spec, series, z[0], **args).as_row()

    points = ctx.points()
    rows = ordered_map(lambda item: ctx.isolated(row, item[1], item[0]), list(enumerate(points)))
    ctx.report.rows = rows

    margins = {k: finite(r.get(k) for r in rows) for k in ("margin1", "margin2", "margin3")}
    hscs = finite(r.get("hsc") for r in rows)
    ctx.report.summary = {
        **{f"min_{k}": min(v, default=math.nan) for k, v in margins.items()},
        "min_hsc": min(hscs, default=math.nan),
        "max_residual": max(finite(r.get("residuals") for r in rows), default=math.nan),
    }

    tol = ctx.tol["chain"]
    worst = min((min(v, default=math.inf) for v in margins.values()), default=math.inf)
    ctx.verdict("chain-ordering", worst >= -tol, tolerance=tol, observed=worst)
    if spec.kind == "annulus":
        middle = min(margins["margin2"], default=-math.inf)
        ctx.verdict("poincare-above-log-capacity", middle > ctx.tol["strict"],
                    tolerance=ctx.tol["strict"], observed=middle,
                    detail="strict on a non-simply-connected surface")
    else:
        spread = 0.0
        for r in rows:
            if r.get("error"):
                continue
            target = 1.0 / (1.0 - (r["z0_re"] ** 2 + r["z0_im"] ** 2)) ** 2
            target *= 1.0 / spec.scale ** 2
            for key in ("half_B", "lambda_sq", "cbeta_sq", "cB_sq"):
                spread = max(spread, abs(r[key] - target))
        ctx.verdict("disc-equality", spread < ctx.tol["disc"], tolerance=ctx.tol["disc"], observed=spread)
    low = min(hscs, default=-math.inf)
    ctx.verdict("hsc-at-least-minus-one", low >= -1.0 - ctx.tol["hsc"], tolerance=ctx.tol["hsc"],
                observed=low, kind="conditional", detail="hypothesis of the one-dimensional chain")


@experiment(
    "rigidity-gap",
    anchor="rigidity: B(z0) = 2 c_B^2(z0) at one point forces a disc",
    defaults={
        "spec": "annulus:0.3",
        "degree_cap": 400,
        "grid": {"count": 10, "seed": 7, "min_norm": 0.35, "max_norm": 0.95},
        "fan": {"count": 1, "seed": 0},
        "tolerances": {"disc": 1e-5, "strict": 1e-4, "covariance": 1e-6},
        "solver": {"degree": 8, "samples": None},
        "params": {"rescale": 0.5},
    },
)
def rigidity_gap_run(ctx: RunContext):
    """Gap B - 2 c_B^2 (and B - 2 c_beta^2); zero only on the disc."""
    spec = ctx.spec
    series = ctx.series
    args = _capacity_args(ctx)

    def row(z):
        return {
            **point_columns(z, prefix="z0_"),
            "gap_analytic": rigidity_gap(spec, series, z[0], capacity="analytic", **args),
            "gap_logarithmic": rigidity_gap(spec, series, z[0], capacity="logarithmic"),
        }

    points = ctx.points()
    rows = ordered_map(lambda item: ctx.isolated(row, item[1], item[0]), list(enumerate(points)))
    ctx.report.rows = rows
    gaps = finite(r.get("gap_analytic") for r in rows)
    log_gaps = finite(r.get("gap_logarithmic") for r in rows)
    ctx.report.summary = {
        "min_gap_analytic": min(gaps, default=math.nan),
        "max_gap_analytic": max(gaps, default=math.nan),
        "min_gap_logarithmic": min(log_gaps, default=math.nan),
    }

    if spec.kind == "disc":
        worst = max((abs(g) for g in gaps), default=math.inf)
        ctx.verdict("gap-vanishes-on-disc", worst < ctx.tol["disc"], tolerance=ctx.tol["disc"], observed=worst)
    else:
        low = min(gaps, default=-math.inf)
        ctx.verdict("gap-positive", low > ctx.tol["strict"], tolerance=ctx.tol["strict"], observed=low)

    factor = ctx.params["rescale"]
    if factor and points and rows and not rows[0].get("error"):
        scaled = spec.scaled(float(factor))
        z = points[0][0] * factor
        gap_scaled = rigidity_gap(scaled, get_or_build(scaled, ctx.config.degree_cap), z, **args)
        expected = rows[0]["gap_analytic"] / factor ** 2
        drift = abs(gap_scaled - expected) / max(abs(expected), 1.0)
        ctx.report.summary["covariance"] = {"factor": factor, "scaled_gap": gap_scaled, "expected": expected}
        ctx.verdict("gap-scales-inverse-square", drift < ctx.tol["covariance"],
                    tolerance=ctx.tol["covariance"], observed=drift)
