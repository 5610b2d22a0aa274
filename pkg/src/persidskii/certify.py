"""Certification pipelines for the four annular properties.

For each query the relevant one or two feasibility problems (the upper
"stay below delta2" compartment and the lower "stay above delta1" one) are
assembled per scalar-parameter cell (beta, rho), pruned by cheap necessary
conditions, solved through the engine contract, and the winning cells are
packaged into a certificate whose every constraint margin can be recomputed
from scratch without trusting the solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np
from numpy.typing import NDArray

from . import lmi
from .lmi import (
    ConicProblem,
    DecisionVars,
    Feasible,
    GammaCondition,
    Infeasible,
    MatrixIneq,
    ScalarIneq,
    SolverFailure,
    VarTemplate,
    assemble_Q,
    beta_branch_constraints,
    exp_growth_factor,
    gamma_condition,
    solve_feasibility,
)
from .lyapunov import ClassKBound, LyapunovParams, alpha_lower, alpha_upper
from .model import (
    PersidskiiSystem,
    StabilityQuery,
    classify_nonlinearities,
    reorder_blocks,
    validate_system,
)

FloatArray = NDArray[np.float64]

SCHEMA_VERSION = 1


class InadmissibleInput(ValueError):
    """System or query fails its preconditions; distinct from NoCertificate."""


# ---------------------------------------------------------------------------
# search configuration
# ---------------------------------------------------------------------------

def default_beta_grid(points_per_sign: int = 25) -> FloatArray:
    """Zero plus two-sided logarithmic grid over [1e-2, 1e2]."""
    pos = np.logspace(-2, 2, points_per_sign)
    return np.concatenate([-pos[::-1], [0.0], pos])


@dataclass
class SearchConfig:
    beta_grid_upper: FloatArray = field(default_factory=default_beta_grid)
    beta_grid_lower: FloatArray = field(default_factory=default_beta_grid)
    rho_grid: tuple[float, ...] = (0.0, 1.0, 10.0)
    solver_tol: float = lmi.DEFAULT_SOLVE_TOL
    strict_margin: float = lmi.STRICT_MARGIN
    gamma_margin: float = lmi.STRICT_MARGIN
    exhaustive: bool = False  # True: score all feasible cells by min margin
    prefalsify: bool = False  # quick simulation search before any SDP
    prefalsify_samples: int = 16
    prefalsify_seed: int = 0
    variant: str = "standard"
    time_budget_s: float | None = None

    def __post_init__(self):
        if len(self.beta_grid_upper) == 0 or len(self.beta_grid_lower) == 0:
            raise ValueError("beta grids must be nonempty")
        if len(self.rho_grid) == 0:
            raise ValueError("rho grid must be nonempty")


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class CellResult:
    side: str
    beta: float
    rho: float
    status: str  # "feasible" | "infeasible" | "pruned" | "solver-failure" | "skipped"
    reason: str = ""
    min_margin: float = -np.inf


@dataclass
class NoCertificate:
    query: StabilityQuery
    trace: list[CellResult]
    reason: str
    witness: object = None  # simulate.Witness when pre-falsification hit

    def __bool__(self) -> bool:
        return False


@dataclass
class SideCertificate:
    side: str
    beta: float
    rho: float
    vars: DecisionVars
    alpha_in: float  # class-K level entering the envelope at t = 0
    alpha_out: float  # class-K level compared against at the horizon
    alpha_in_quad: float  # quadratic coefficient of the inner bound
    alpha_out_quad: float


@dataclass
class Certificate:
    query: StabilityQuery
    kind: str
    upper: SideCertificate
    lower: SideCertificate | None
    block_order: tuple[int, ...]
    mu: int
    variant: str
    margins: dict[str, float]
    provenance: dict

    def __bool__(self) -> bool:
        return True


@dataclass
class CheckReport:
    margins: dict[str, float]
    failures: list[str]
    tol: float

    @property
    def passed(self) -> bool:
        return not self.failures

    def __str__(self) -> str:
        if self.passed:
            worst = min(self.margins.values()) if self.margins else 0.0
            return f"pass (worst margin {worst:.3e})"
        return "fail:\n  " + "\n  ".join(self.failures)


# ---------------------------------------------------------------------------
# per-side problem assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SidePlan:
    side: str
    mode: str  # "interval" | "terminal"
    in_radius: float  # radius entering the t=0 bound
    out_radius: float  # radius compared against
    output_split: bool
    fix_lower_output: bool


def _plans(query: StabilityQuery) -> list[SidePlan]:
    mode = "terminal" if query.terminal else "interval"
    split = query.on_output
    plans = [
        SidePlan(
            side="upper",
            mode=mode,
            in_radius=query.eps2,
            out_radius=query.delta2,
            output_split=split,
            fix_lower_output=False,
        )
    ]
    if query.kind != "STBNZ" and query.delta1 > 0.0:
        plans.append(
            SidePlan(
                side="lower",
                mode=mode,
                in_radius=query.eps1,
                out_radius=query.delta1,
                output_split=split,
                fix_lower_output=split,
            )
        )
    return plans


def _integral_constants(sys: PersidskiiSystem, radius: float) -> list[FloatArray]:
    """Per-(block, component) antiderivative values at ||H_j^(i)|| * radius."""
    out = []
    for fam, h in zip(sys.families, sys.H):
        rn = np.linalg.norm(h, axis=1)
        out.append(
            np.array(
                [
                    float(c.antiderivative(rn[i] * radius))
                    for i, c in enumerate(fam.components)
                ]
            )
        )
    return out


def build_side_problem(
    sys: PersidskiiSystem,
    query: StabilityQuery,
    plan: SidePlan,
    beta: float,
    rho: float,
    mu: int,
    cfg: SearchConfig,
) -> ConicProblem:
    """One affine feasibility problem for a fixed (beta, rho) cell.

    The class-K levels enter through scalar epigraph variables (t_max for
    the quadratic top, s_int for the worst integral term, r_min for the
    quadratic bottom), keeping the gamma condition affine.
    """
    n, M = sys.n, sys.M
    K = sum(sys.widths)
    side = plan.side
    upper = side == "upper"
    template = VarTemplate(
        side=side,
        n=n,
        widths=sys.widths,
        p=sys.p,
        output_split=plan.output_split,
        fix_lower_output=plan.fix_lower_output,
    )
    scale = float(np.exp(min(beta * query.T, 700.0)))
    g = exp_growth_factor(beta, query.T)
    # integral constants: upper side bounds V at the initial radius, lower
    # side bounds V at the target radius
    int_radius = plan.in_radius if upper else plan.out_radius
    coefs = _integral_constants(sys, int_radius)
    sm = cfg.strict_margin

    def build(vars: DecisionVars):
        mats: list[MatrixIneq] = []
        scalars: list[ScalarIneq] = []
        t_max, s_int, r_min = (
            vars.aux["t_max"],
            vars.aux["s_int"],
            vars.aux["r_min"],
        )

        # variable structure
        if plan.output_split:
            mats.append(
                MatrixIneq(f"{side}-P2-pd", vars.P2, sense=1, margin=sm)
            )
            if not plan.fix_lower_output:
                mats.append(MatrixIneq(f"{side}-P1-psd", vars.P1, sense=1))
        elif upper:
            mats.append(MatrixIneq("upper-P-psd", vars.P, sense=1))
        else:
            # certified quadratic lower class-K bound needs P positive definite
            mats.append(MatrixIneq("lower-P-pd", vars.P, sense=1, margin=sm))
        for j in range(M):
            mats.append(
                MatrixIneq(f"{side}-Lambda-nonneg[{j}]", vars.Lambda[j], sense=1)
            )
        scalars.append(ScalarIneq(f"{side}-gamma-pos", vars.gamma, cfg.gamma_margin))

        # Finsler positivity of the Lyapunov function
        fins = vars.P
        for j in range(mu):
            fins = fins + rho * (sys.H[j].T @ vars.Lambda[j] @ sys.H[j])
        mats.append(MatrixIneq(f"{side}-finsler", fins, sense=1, margin=sm))

        # descriptor-form quadratic matrix
        mats.append(
            MatrixIneq(
                f"{side}-Q",
                assemble_Q(sys, vars, variant=cfg.variant),
                sense=1 if not upper else -1,
            )
        )

        # beta sign-branch constraints
        mats.extend(beta_branch_constraints(sys, vars, beta))

        # class-K epigraphs
        mats.append(
            MatrixIneq(
                f"{side}-alpha-top", t_max * np.eye(n) - vars.P, sense=1
            )
        )
        scalars.append(ScalarIneq(f"{side}-s-nonneg", s_int, 0.0))
        for j in range(M):
            lam = vars.Lambda[j]
            for i in range(sys.widths[j]):
                if coefs[j][i] != 0.0:
                    scalars.append(
                        ScalarIneq(
                            f"{side}-s-int[{j},{i}]",
                            s_int - lam[i, i] * coefs[j][i],
                            0.0,
                        )
                    )
        if plan.output_split:
            bottom = vars.P2
            d_bot = sys.p
        else:
            bottom = vars.P
            d_bot = n
        if upper:
            mats.append(
                MatrixIneq(
                    "upper-alpha-bottom", bottom - r_min * np.eye(d_bot), sense=1
                )
            )
        else:
            # the lower initial bound must hold on the state norm
            low = sys.C.T @ vars.P2 @ sys.C if plan.output_split else vars.P
            mats.append(
                MatrixIneq(
                    "lower-alpha-bottom", low - r_min * np.eye(n), sense=1
                )
            )
            if plan.output_split:
                # target-level top on the output weight
                mats.append(
                    MatrixIneq(
                        "lower-alpha-top-output",
                        t_max * np.eye(sys.p) - vars.P2,
                        sense=1,
                    )
                )

        # gain conditions on gamma (branch-free envelope comparison)
        e_in2 = plan.in_radius**2
        e_out2 = plan.out_radius**2
        if upper:
            alpha_in_expr = t_max * e_in2 + 2.0 * K * s_int
            alpha_out_expr = r_min * e_out2
            scalars.append(
                ScalarIneq(
                    "upper-gain",
                    alpha_out_expr - scale * alpha_in_expr
                    - vars.gamma * query.gamma0**2 * g,
                    0.0,
                )
            )
            if plan.mode == "interval":
                scalars.append(
                    ScalarIneq(
                        "upper-endpoint", alpha_out_expr - alpha_in_expr, 0.0
                    )
                )
        else:
            alpha_in_expr = r_min * e_in2
            alpha_out_expr = t_max * e_out2 + 2.0 * K * s_int
            scalars.append(
                ScalarIneq(
                    "lower-gain",
                    scale * alpha_in_expr
                    - vars.gamma * query.gamma0**2 * g
                    - alpha_out_expr,
                    0.0,
                )
            )
            if plan.mode == "interval":
                scalars.append(
                    ScalarIneq(
                        "lower-endpoint", alpha_in_expr - alpha_out_expr, 0.0
                    )
                )
        return mats, scalars

    def objective(vars: DecisionVars):
        # the feasible set is a cone; pulling the epigraph scalars down
        # pins the scale and keeps the solver well conditioned
        return vars.aux["t_max"] + vars.aux["s_int"] + vars.gamma

    return ConicProblem(template=template, build=build, C=sys.C,
                        objective=objective)


def _prune_cell(
    sys: PersidskiiSystem, query: StabilityQuery, plan: SidePlan, beta: float
) -> str | None:
    """Variable-free necessary conditions; a returned string prunes the cell.

    Both rely on the ordering lam_min <= lam_max of the same weight matrix,
    so they are valid for every admissible assignment.
    """
    with np.errstate(over="ignore"):
        scale = float(np.exp(beta * query.T))
    if not np.isfinite(scale) or not np.isfinite(exp_growth_factor(beta, query.T)):
        return "exponential overflow at this beta"
    svals = np.linalg.svd(sys.C, compute_uv=False)
    if plan.side == "upper":
        factor = float(svals.max()) ** 2 if plan.output_split else 1.0
        if scale * factor * plan.in_radius**2 > plan.out_radius**2:
            return (
                "necessary condition fails: e^{beta T} alpha2(eps2) "
                "exceeds every admissible alpha1(delta2)"
            )
        return None
    # lower side
    if plan.in_radius == 0.0:
        return (
            "lower bound unreachable: initial annulus touches the origin "
            "(alpha1(0) = 0) while delta1 > 0"
        )
    if plan.output_split:
        smin = float(svals.min()) if sys.p >= sys.n else 0.0
        if smin == 0.0:
            return (
                "output matrix is rank-deficient: the output-quadratic "
                "certificate has no positive lower class-K bound on the "
                "state norm"
            )
        factor = smin**2
    else:
        factor = 1.0
    if scale * factor * plan.in_radius**2 < plan.out_radius**2:
        return (
            "necessary condition fails: e^{beta T} alpha1(eps1) below "
            "every admissible alpha2(delta1)"
        )
    return None


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------

def certify(
    sys: PersidskiiSystem,
    query: StabilityQuery,
    cfg: SearchConfig | None = None,
    engine=None,
):
    """Decide the queried property; returns Certificate or NoCertificate.

    Inadmissible systems/queries raise InadmissibleInput.  The upper and
    lower problems are independent: their beta grids are searched
    separately, each cell pruned by the variable-free gain test before the
    engine runs.  Ties between feasible cells go to the largest minimum
    constraint margin, then grid order.
    """
    cfg = cfg or SearchConfig()
    report = validate_system(sys)
    if not report.ok:
        raise InadmissibleInput(f"system is inadmissible:\n{report}")
    for fam in sys.families:
        if fam.coefficients is None:
            raise InadmissibleInput(
                "every family needs integral sandwich coefficients for "
                "certification"
            )
    _, mu, order = classify_nonlinearities(sys)
    osys = reorder_blocks(sys, order)
    plans = _plans(query)
    deadline = (
        time.monotonic() + cfg.time_budget_s if cfg.time_budget_s else None
    )

    trace: list[CellResult] = []
    if cfg.prefalsify:
        from .simulate import falsify

        fr = falsify(
            sys,
            query,
            n_samples=cfg.prefalsify_samples,
            seed=cfg.prefalsify_seed,
            tol=1e-7,
        )
        if fr.violations > 0:
            return NoCertificate(
                query=query,
                trace=trace,
                reason=(
                    "property falsified by simulation before the LMI search "
                    f"(worst margin {fr.worst_margin:.3e}); the conditions "
                    "are sound, so no certificate exists"
                ),
                witness=fr.witness,
            )

    sides: dict[str, SideCertificate] = {}
    for plan in plans:
        grid = (
            cfg.beta_grid_upper if plan.side == "upper" else cfg.beta_grid_lower
        )
        best = None  # ((min_margin, -beta_idx, -rho_idx), beta, rho, Feasible)
        for idx, beta in enumerate(grid):
            prune = _prune_cell(osys, query, plan, float(beta))
            for ridx, rho in enumerate(cfg.rho_grid):
                if deadline is not None and time.monotonic() > deadline:
                    trace.append(
                        CellResult(plan.side, float(beta), float(rho), "skipped",
                                   "time budget exhausted")
                    )
                    continue
                if prune is not None:
                    trace.append(
                        CellResult(plan.side, float(beta), float(rho), "pruned",
                                   prune)
                    )
                    continue
                problem = build_side_problem(
                    osys, query, plan, float(beta), float(rho), mu, cfg
                )
                try:
                    result = solve_feasibility(
                        problem, tol=cfg.solver_tol, engine=engine
                    )
                except SolverFailure as exc:
                    trace.append(
                        CellResult(plan.side, float(beta), float(rho),
                                   "solver-failure", str(exc))
                    )
                    continue
                if isinstance(result, Infeasible):
                    trace.append(
                        CellResult(plan.side, float(beta), float(rho),
                                   "infeasible", result.reason)
                    )
                    continue
                mm = min(result.margins.values())
                trace.append(
                    CellResult(plan.side, float(beta), float(rho), "feasible",
                               min_margin=mm)
                )
                key = (mm, -idx, -ridx)
                if best is None or key > best[0]:
                    best = (key, float(beta), float(rho), result)
                if not cfg.exhaustive:
                    break
            if best is not None and not cfg.exhaustive:
                break
        if best is None:
            return NoCertificate(
                query=query,
                trace=trace,
                reason=f"no feasible ({plan.side}) cell in the search grid",
            )
        _, beta, rho, result = best
        sides[plan.side] = _side_certificate(
            osys, query, plan, beta, rho, result.vars
        )

    cert = Certificate(
        query=query,
        kind=query.kind,
        upper=sides["upper"],
        lower=sides.get("lower"),
        block_order=order,
        mu=mu,
        variant=cfg.variant,
        margins={},
        provenance={
            "solver": getattr(engine, "solver", None)
            or (
                engine.__class__.__name__
                if engine is not None
                else lmi.CvxpyEngine().solver
            ),
            "solver_tol": cfg.solver_tol,
            "strict_margin": cfg.strict_margin,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "schema": SCHEMA_VERSION,
        },
    )
    check = check_certificate(sys, query, cert, tol=cfg.solver_tol)
    if not check.passed:
        raise SolverFailure(
            "solved certificate failed independent re-verification:\n"
            + str(check)
        )
    cert.margins = check.margins
    return cert


def _side_certificate(
    osys: PersidskiiSystem,
    query: StabilityQuery,
    plan: SidePlan,
    beta: float,
    rho: float,
    vars: DecisionVars,
) -> SideCertificate:
    a_in, a_out, q_in, q_out = _exact_alphas(osys, query, plan, vars)
    return SideCertificate(
        side=plan.side,
        beta=beta,
        rho=rho,
        vars=vars,
        alpha_in=a_in,
        alpha_out=a_out,
        alpha_in_quad=q_in,
        alpha_out_quad=q_out,
    )


def _params_of(vars: DecisionVars) -> LyapunovParams:
    # solver noise can leave multipliers a hair below zero; the raw values
    # still appear in the margin report, only the class-K bounds are clipped
    return LyapunovParams(
        P=np.asarray(vars.P, dtype=float),
        Lambda=tuple(
            np.maximum(np.diag(np.asarray(l, dtype=float)), 0.0)
            for l in vars.Lambda
        ),
        rho=0.0,
    )


def _exact_alphas(
    osys: PersidskiiSystem,
    query: StabilityQuery,
    plan: SidePlan,
    vars: DecisionVars,
) -> tuple[float, float, float, float]:
    """Exact class-K levels (not the solver surrogates) for one side."""
    params = _params_of(vars)
    upper_bound = alpha_upper(params, osys)
    if plan.side == "upper":
        a_in = upper_bound(plan.in_radius)
        if plan.output_split:
            out_quad = float(np.linalg.eigvalsh(np.atleast_2d(vars.P2))[0])
        else:
            out_quad = float(np.linalg.eigvalsh(params.P)[0])
        a_out = out_quad * plan.out_radius**2
        return a_in, a_out, upper_bound.lam, out_quad
    # lower side: initial bound from lam_min on the state norm, target bound
    # from the output weight (output kinds) or the full P
    if plan.output_split:
        low = osys.C.T @ np.atleast_2d(vars.P2) @ osys.C
        in_quad = float(np.linalg.eigvalsh((low + low.T) / 2.0)[0])
        out_quad = float(np.linalg.eigvalsh(np.atleast_2d(vars.P2))[-1])
        a_out = out_quad * plan.out_radius**2  # Lambda is fixed zero here
    else:
        in_quad = float(np.linalg.eigvalsh(params.P)[0])
        out_quad = float(np.linalg.eigvalsh(params.P)[-1])
        a_out = alpha_upper(params, osys)(plan.out_radius)
    a_in = in_quad * plan.in_radius**2
    return a_in, a_out, in_quad, out_quad


# ---------------------------------------------------------------------------
# independent re-verification
# ---------------------------------------------------------------------------

def check_certificate(
    sys: PersidskiiSystem,
    query: StabilityQuery,
    cert: Certificate,
    tol: float = lmi.DEFAULT_SOLVE_TOL,
    cfg: SearchConfig | None = None,
) -> CheckReport:
    """Re-assemble every condition at the certified assignment.

    Matrix margins come from a fresh eigvalsh pass over re-built
    expressions; the gain conditions are re-evaluated with the exact
    class-K bounds through the envelope extremum, not the solver
    surrogates.  Pass means every margin clears -tol.
    """
    cfg = cfg or SearchConfig()
    margins: dict[str, float] = {}
    failures: list[str] = []
    report = validate_system(sys)
    if not report.ok:
        return CheckReport(margins, [f"system inadmissible: {report}"], tol)
    _, mu, order = classify_nonlinearities(sys)
    if tuple(order) != tuple(cert.block_order):
        failures.append("certificate block order does not match the system")
    osys = reorder_blocks(sys, order)
    plans = {p.side: p for p in _plans(query)}
    if "lower" in plans and cert.lower is None:
        failures.append("certificate is missing the required lower problem")

    local_cfg = replace(cfg, variant=cert.variant)
    for side_cert in filter(None, [cert.upper, cert.lower]):
        plan = plans.get(side_cert.side)
        if plan is None:
            continue
        problem = build_side_problem(
            osys, query, plan, side_cert.beta, side_cert.rho, cert.mu, local_cfg
        )
        side_margins = problem.margins_at(side_cert.vars)
        # replace the surrogate gain entries with the exact-alpha versions
        for name in (f"{plan.side}-gain", f"{plan.side}-endpoint"):
            side_margins.pop(name, None)
        a_in, a_out, _, _ = _exact_alphas(osys, query, plan, side_cert.vars)
        cond = gamma_condition(
            side=plan.side,
            alpha_in=a_in,
            alpha_out=a_out,
            beta=side_cert.beta,
            gamma0=query.gamma0,
            T=query.T,
            mode=plan.mode,
        )
        gamma = float(side_cert.vars.gamma)
        side_margins[f"{plan.side}-gain"] = float(cond.margin(gamma))
        if plan.mode == "interval":
            side_margins[f"{plan.side}-endpoint"] = (
                (a_out - a_in) if plan.side == "upper" else (a_in - a_out)
            )
        if plan.output_split and plan.side == "lower":
            lam_norm = max(
                (float(np.abs(np.diag(l)).max()) if np.asarray(l).size else 0.0)
                for l in side_cert.vars.Lambda
            ) if side_cert.vars.Lambda else 0.0
            side_margins["lower-output-restriction"] = -lam_norm
        margins.update(side_margins)
    for name, value in margins.items():
        if not np.isfinite(value) or value < -tol:
            failures.append(f"{name}: margin {value:.6e} < -{tol:.1e}")
    return CheckReport(margins=margins, failures=failures, tol=tol)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _vars_to_dict(vars: DecisionVars) -> dict:
    out = {
        "side": vars.side,
        "P": np.asarray(vars.P, dtype=float).tolist(),
        "Lambda": [np.diag(np.asarray(l)).tolist() for l in vars.Lambda],
        "Upsilon0": [np.diag(np.asarray(u)).tolist() for u in vars.Upsilon0],
        "UpsilonX": {
            f"{s},{z}": np.diag(np.asarray(m)).tolist()
            for (s, z), m in vars.UpsilonX.items()
        },
        "Omega": [np.asarray(o, dtype=float).tolist() for o in vars.Omega],
        "Gamma": np.asarray(vars.Gamma, dtype=float).tolist(),
        "Psi": np.asarray(vars.Psi, dtype=float).tolist(),
        "Xi0": np.asarray(vars.Xi0, dtype=float).tolist(),
        "Xi": [np.asarray(x, dtype=float).tolist() for x in vars.Xi],
        "gamma": float(vars.gamma),
        "aux": {k: float(v) for k, v in vars.aux.items()},
    }
    if vars.P1 is not None:
        out["P1"] = np.asarray(vars.P1, dtype=float).tolist()
    if vars.P2 is not None:
        out["P2"] = np.atleast_2d(np.asarray(vars.P2, dtype=float)).tolist()
    return out


def _vars_from_dict(d: dict) -> DecisionVars:
    return DecisionVars(
        side=d["side"],
        P=np.asarray(d["P"], dtype=float),
        Lambda=tuple(np.diag(v) for v in d["Lambda"]),
        Upsilon0=tuple(np.diag(v) for v in d["Upsilon0"]),
        UpsilonX={
            tuple(int(i) for i in k.split(",")): np.diag(v)
            for k, v in d["UpsilonX"].items()
        },
        Omega=tuple(np.asarray(o, dtype=float) for o in d["Omega"]),
        Gamma=np.asarray(d["Gamma"], dtype=float),
        Psi=np.asarray(d["Psi"], dtype=float),
        Xi0=np.asarray(d["Xi0"], dtype=float),
        Xi=tuple(np.asarray(x, dtype=float) for x in d["Xi"]),
        gamma=float(d["gamma"]),
        P1=np.asarray(d["P1"], dtype=float) if "P1" in d else None,
        P2=np.asarray(d["P2"], dtype=float) if "P2" in d else None,
        aux=dict(d.get("aux", {})),
    )


def _side_to_dict(sc: SideCertificate) -> dict:
    return {
        "side": sc.side,
        "beta": sc.beta,
        "rho": sc.rho,
        "vars": _vars_to_dict(sc.vars),
        "alpha_in": sc.alpha_in,
        "alpha_out": sc.alpha_out,
        "alpha_in_quad": sc.alpha_in_quad,
        "alpha_out_quad": sc.alpha_out_quad,
    }


def _side_from_dict(d: dict) -> SideCertificate:
    return SideCertificate(
        side=d["side"],
        beta=float(d["beta"]),
        rho=float(d["rho"]),
        vars=_vars_from_dict(d["vars"]),
        alpha_in=float(d["alpha_in"]),
        alpha_out=float(d["alpha_out"]),
        alpha_in_quad=float(d["alpha_in_quad"]),
        alpha_out_quad=float(d["alpha_out_quad"]),
    )


def certificate_to_dict(cert: Certificate) -> dict:
    from .model import query_to_dict

    return {
        "schema": SCHEMA_VERSION,
        "kind": cert.kind,
        "query": query_to_dict(cert.query),
        "upper": _side_to_dict(cert.upper),
        "lower": _side_to_dict(cert.lower) if cert.lower else None,
        "block_order": list(cert.block_order),
        "mu": cert.mu,
        "variant": cert.variant,
        "margins": cert.margins,
        "provenance": cert.provenance,
    }


def certificate_from_dict(d: dict) -> Certificate:
    from .model import query_from_dict

    return Certificate(
        query=query_from_dict(d["query"]),
        kind=d["kind"],
        upper=_side_from_dict(d["upper"]),
        lower=_side_from_dict(d["lower"]) if d.get("lower") else None,
        block_order=tuple(d["block_order"]),
        mu=int(d["mu"]),
        variant=d.get("variant", "standard"),
        margins=dict(d.get("margins", {})),
        provenance=dict(d.get("provenance", {})),
    )
