"""Affine matrix-inequality assembly and the semidefinite feasibility contract.

The descriptor-form quadratic matrix Q over w = [dx; x; F_1; ...; F_M; u]
is assembled blockwise for the upper ("unstable compartment") and lower
("stable compartment") problems.  For fixed scalar parameters (beta, rho)
every constraint is affine in the decision variables, so feasibility is a
plain semidefinite program.  Solving goes through an engine contract; any
Feasible answer is re-verified here with an independent eigenvalue routine.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .model import PersidskiiSystem

FloatArray = NDArray[np.float64]

STRICT_MARGIN = 1e-7  # realization of strict ">" constraints
DEFAULT_SOLVE_TOL = 1e-7


# ---------------------------------------------------------------------------
# decision variables
# ---------------------------------------------------------------------------

@dataclass
class DecisionVars:
    """One side's decision variables; entries are numpy arrays or solver
    expressions (the assembly code only uses +, -, scalar *, @ and .T).

    Diagonal variables are stored as full (diagonal) matrices.  For the
    output-annulus decomposition ``P`` is derived as P1 + C'P2C and the
    parts are kept alongside.  ``aux`` holds the scalar epigraph variables
    of the class-K surrogates used by the gamma conditions.
    """

    side: str  # "upper" | "lower"
    P: object
    Lambda: tuple
    Upsilon0: tuple
    UpsilonX: dict
    Omega: tuple
    Gamma: object
    Psi: object
    Xi0: object
    Xi: tuple
    gamma: object
    P1: object = None
    P2: object = None
    aux: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VarTemplate:
    """Shapes and structure needed to instantiate one side's variables."""

    side: str
    n: int
    widths: tuple[int, ...]
    p: int = 0
    output_split: bool = False  # P = P1 + C'P2C
    fix_lower_output: bool = False  # P1 = 0 and Lambda = 0 (output-annulus lower side)
    aux_names: tuple[str, ...] = ("t_max", "s_int", "r_min")

    def cvxpy_vars(self, C: FloatArray | None = None) -> tuple[DecisionVars, dict]:
        """Instantiate cvxpy variables; returns (vars, raw-variable map)."""
        import cvxpy as cp

        n, M = self.n, len(self.widths)
        raw: dict[str, object] = {}

        def sym(name, d):
            raw[name] = cp.Variable((d, d), symmetric=True, name=name)
            return raw[name]

        def diag(name, d, fixed_zero=False):
            if fixed_zero:
                return np.zeros((d, d))
            raw[name] = cp.Variable(d, name=name)
            return cp.diag(raw[name])

        if self.output_split:
            P2 = sym("P2", self.p)
            if self.fix_lower_output:
                P1 = np.zeros((n, n))
            else:
                P1 = sym("P1", n)
            P = P1 + C.T @ P2 @ C
        else:
            P1 = P2 = None
            P = sym("P", n)
        lam = tuple(
            diag(f"Lambda_{j}", k, self.fix_lower_output)
            for j, k in enumerate(self.widths)
        )
        ups0 = tuple(diag(f"Upsilon0_{j}", k) for j, k in enumerate(self.widths))
        upsx = {
            (s, z): diag(f"UpsilonX_{s}_{z}", n)
            for s in range(M)
            for z in range(s + 1, M)
        }
        omega = tuple(
            cp.Variable((n, k), name=f"Omega_{j}") for j, k in enumerate(self.widths)
        )
        for j, om in enumerate(omega):
            raw[f"Omega_{j}"] = om
        gamma = cp.Variable(name="gamma")
        raw["gamma"] = gamma
        aux = {}
        for name in self.aux_names:
            raw[name] = cp.Variable(name=name)
            aux[name] = raw[name]
        return (
            DecisionVars(
                side=self.side,
                P=P,
                Lambda=lam,
                Upsilon0=ups0,
                UpsilonX=upsx,
                Omega=omega,
                Gamma=sym("Gamma", n),
                Psi=sym("Psi", n),
                Xi0=sym("Xi0", n),
                Xi=tuple(sym(f"Xi_{j}", k) for j, k in enumerate(self.widths)),
                gamma=gamma,
                P1=P1,
                P2=P2,
                aux=aux,
            ),
            raw,
        )

    def value_vars(self, raw_values: dict, C: FloatArray | None = None) -> DecisionVars:
        """Build a numpy DecisionVars from a flat name -> array mapping."""
        n, M = self.n, len(self.widths)

        def diag_of(name, d):
            if self.fix_lower_output and name.startswith("Lambda"):
                return np.zeros((d, d))
            return np.diag(np.asarray(raw_values[name], dtype=float).ravel())

        if self.output_split:
            P2 = np.atleast_2d(np.asarray(raw_values["P2"], dtype=float))
            P1 = (
                np.zeros((n, n))
                if self.fix_lower_output
                else np.asarray(raw_values["P1"], dtype=float)
            )
            P = P1 + C.T @ P2 @ C
        else:
            P1 = P2 = None
            P = np.asarray(raw_values["P"], dtype=float)
        return DecisionVars(
            side=self.side,
            P=P,
            Lambda=tuple(diag_of(f"Lambda_{j}", k) for j, k in enumerate(self.widths)),
            Upsilon0=tuple(
                diag_of(f"Upsilon0_{j}", k) for j, k in enumerate(self.widths)
            ),
            UpsilonX={
                (s, z): diag_of(f"UpsilonX_{s}_{z}", n)
                for s in range(M)
                for z in range(s + 1, M)
            },
            Omega=tuple(
                np.asarray(raw_values[f"Omega_{j}"], dtype=float).reshape(n, k)
                for j, k in enumerate(self.widths)
            ),
            Gamma=np.asarray(raw_values["Gamma"], dtype=float),
            Psi=np.asarray(raw_values["Psi"], dtype=float),
            Xi0=np.asarray(raw_values["Xi0"], dtype=float),
            Xi=tuple(
                np.asarray(raw_values[f"Xi_{j}"], dtype=float)
                for j, k in enumerate(self.widths)
            ),
            gamma=float(raw_values["gamma"]),
            P1=P1,
            P2=P2,
            aux={name: float(raw_values.get(name, 0.0)) for name in self.aux_names},
        )

    def random_vars(
        self,
        rng: np.random.Generator,
        scale: float = 1.0,
        C: FloatArray | None = None,
    ) -> DecisionVars:
        """Random numpy assignment (structure-respecting); for identity and
        affinity tests, not for certificates."""
        n = self.n

        def sym(d):
            a = rng.standard_normal((d, d)) * scale
            return a + a.T

        def psd(d):
            a = rng.standard_normal((d, d)) * scale
            return a @ a.T / d

        values: dict[str, object] = {
            "Gamma": sym(n),
            "Psi": sym(n),
            "Xi0": sym(n),
            "gamma": float(rng.uniform(0.1, 2.0) * scale),
        }
        if self.output_split:
            values["P2"] = psd(self.p)
            if not self.fix_lower_output:
                values["P1"] = psd(n)
        else:
            values["P"] = psd(n)
        for j, k in enumerate(self.widths):
            values[f"Lambda_{j}"] = rng.uniform(0.0, scale, size=k)
            values[f"Upsilon0_{j}"] = rng.standard_normal(k) * scale
            values[f"Omega_{j}"] = rng.standard_normal((n, k)) * scale
            values[f"Xi_{j}"] = sym(k)
        for s in range(len(self.widths)):
            for z in range(s + 1, len(self.widths)):
                values[f"UpsilonX_{s}_{z}"] = rng.standard_normal(n) * scale
        for name in self.aux_names:
            values[name] = 0.0
        return self.value_vars(values, C=C)

    def index_map(self) -> list[tuple[str, str, tuple]]:
        """Flattened scalar-coordinate layout: (name, kind, shape) per variable.

        kind is "sym" (upper triangle), "diag" (vector) or "scalar"; used by
        the SDP exchange dump and anywhere a flat vector view is needed.
        """
        out: list[tuple[str, str, tuple]] = []
        if self.output_split:
            out.append(("P2", "sym", (self.p, self.p)))
            if not self.fix_lower_output:
                out.append(("P1", "sym", (self.n, self.n)))
        else:
            out.append(("P", "sym", (self.n, self.n)))
        for j, k in enumerate(self.widths):
            if not self.fix_lower_output:
                out.append((f"Lambda_{j}", "diag", (k,)))
            out.append((f"Upsilon0_{j}", "diag", (k,)))
            out.append((f"Omega_{j}", "full", (self.n, k)))
            out.append((f"Xi_{j}", "sym", (k, k)))
        for s in range(len(self.widths)):
            for z in range(s + 1, len(self.widths)):
                out.append((f"UpsilonX_{s}_{z}", "diag", (self.n,)))
        out.append(("Gamma", "sym", (self.n, self.n)))
        out.append(("Psi", "sym", (self.n, self.n)))
        out.append(("Xi0", "sym", (self.n, self.n)))
        out.append(("gamma", "scalar", ()))
        for name in self.aux_names:
            out.append((name, "scalar", ()))
        return out


# ---------------------------------------------------------------------------
# constraints and problems
# ---------------------------------------------------------------------------

@dataclass
class MatrixIneq:
    """Affine symmetric expression required to satisfy
    sense * expr >= margin * I (sense +1: PSD, -1: NSD)."""

    name: str
    expr: object
    sense: int = 1
    margin: float = 0.0
    trivial: bool = False


@dataclass
class ScalarIneq:
    """Affine scalar expression required to satisfy expr >= margin."""

    name: str
    expr: object
    margin: float = 0.0
    trivial: bool = False


@dataclass
class ConicProblem:
    """An affine conic feasibility problem over one VarTemplate.

    ``build`` maps a DecisionVars (numpy or solver expressions) to the
    constraint lists; calling it on numpy values re-assembles everything
    for independent verification.  ``objective`` (optional, affine) only
    pins the scale of the otherwise homogeneous feasible cone; any point
    of the cone remains acceptable.
    """

    template: VarTemplate
    build: Callable[[DecisionVars], tuple[list[MatrixIneq], list[ScalarIneq]]]
    C: FloatArray | None = None  # output matrix when output_split
    objective: Callable[[DecisionVars], object] | None = None

    def margins_at(self, vars: DecisionVars) -> dict[str, float]:
        """Signed constraint margins at a concrete assignment (eigvalsh based)."""
        mats, scalars = self.build(vars)
        out: dict[str, float] = {}
        for m in mats:
            e = np.atleast_2d(np.asarray(m.expr, dtype=float))
            e = (e + e.T) / 2.0
            out[m.name] = float(np.linalg.eigvalsh(m.sense * e)[0]) - m.margin
        for s in scalars:
            out[s.name] = float(s.expr) - s.margin
        return out


def _is_symbolic(x) -> bool:
    return not (isinstance(x, (np.ndarray, float, int)) or np.isscalar(x))


def _bmat(rows: list[list]) -> object:
    if any(_is_symbolic(b) for row in rows for b in row):
        import cvxpy as cp

        return cp.bmat(rows)
    return np.block(rows)


# ---------------------------------------------------------------------------
# Q assembly
# ---------------------------------------------------------------------------

def assemble_Q(
    sys: PersidskiiSystem, vars: DecisionVars, variant: str = "standard"
) -> object:
    """The (M+3)-block symmetric matrix over w = [dx; x; F_1..F_M; u].

    The upper-side matrix is the one required NSD, the lower-side one PSD;
    they differ only in the sign of the gamma block.  ``variant="expanded"``
    additionally substitutes the dynamics into the P-terms, moving
    A0'P + PA0 into the x-x block with the matching changes in the x-F and
    x-u blocks.
    """
    if variant not in ("standard", "expanded"):
        raise ValueError(f"unknown assembly variant {variant!r}")
    n, M = sys.n, sys.M
    if len(vars.Lambda) != M or len(vars.Omega) != M or len(vars.Xi) != M:
        raise ValueError("decision variable block count does not match system")
    expanded = variant == "expanded"
    A0, A, H = sys.A0, sys.A, sys.H
    P, Gam, Psi = vars.P, vars.Gamma, vars.Psi
    nblocks = M + 3
    B: list[list] = [[None] * nblocks for _ in range(nblocks)]

    B[0][0] = -(Psi.T + Psi)
    B[0][1] = Psi.T @ A0 - Gam + (0 if expanded else P)
    for j in range(M):
        B[0][2 + j] = vars.Omega[j] + H[j].T @ vars.Lambda[j] + Psi.T @ A[j]
    B[0][M + 2] = Psi.T

    GA = Gam.T @ A0
    B[1][1] = GA + GA.T + vars.Xi0
    if expanded:
        PA = P @ A0
        B[1][1] = B[1][1] + PA.T + PA
    for j in range(M):
        B[1][2 + j] = (
            Gam.T @ A[j] + H[j].T @ vars.Upsilon0[j] - A0.T @ vars.Omega[j]
        )
        if expanded:
            B[1][2 + j] = B[1][2 + j] + P @ A[j]
    B[1][M + 2] = Gam.T + (P if expanded else 0)

    for j in range(M):
        OA = vars.Omega[j].T @ A[j]
        B[2 + j][2 + j] = -(OA + OA.T) + vars.Xi[j]
        for z in range(j + 1, M):
            B[2 + j][2 + z] = (
                -vars.Omega[j].T @ A[z]
                - A[j].T @ vars.Omega[z]
                + H[j] @ vars.UpsilonX[(j, z)] @ H[z].T
            )
        B[2 + j][M + 2] = -vars.Omega[j].T

    gsign = -1.0 if vars.side == "upper" else 1.0
    B[M + 2][M + 2] = gsign * vars.gamma * np.eye(n)

    # mirror the strict lower triangle so the result is exactly symmetric
    for a in range(nblocks):
        for b in range(a):
            B[a][b] = B[b][a].T
    return _bmat(B)


# ---------------------------------------------------------------------------
# beta-branch constraints
# ---------------------------------------------------------------------------

def beta_branch_constraints(
    sys: PersidskiiSystem,
    vars: DecisionVars,
    beta: float,
    bounds: list | None = None,
) -> list[MatrixIneq]:
    """Sign-branch constraints tying the penalty variables to beta * V.

    ``bounds`` holds one SectorIntegralBounds per block, generated at the
    decision-side multipliers (the reference multipliers are taken equal to
    the decision ones, which the integral sandwich allows since it holds
    for every diagonal multiplier).  Returns the 1 + 3M + M(M-1)/2
    inequalities of the branch selected by the sign of beta; the
    multiplier-comparison entries are then identities and marked trivial.
    """
    n, M = sys.n, sys.M
    if bounds is None:
        bounds = [
            fam.bounds(vars.Lambda[j], j) for j, fam in enumerate(sys.families)
        ]
    upper = vars.side == "upper"
    # eta branch: (upper, beta < 0) or (lower, beta >= 0); kappa otherwise
    use_eta = (beta < 0) if upper else (beta >= 0)
    zero_n = np.zeros((n, n))
    cons: list[MatrixIneq] = []
    tag = "eta" if use_eta else "kappa"
    # multiplier comparisons (identically zero under the equal-reference choice)
    for j, k in enumerate(sys.widths):
        cons.append(
            MatrixIneq(
                name=f"{vars.side}-lambda-compare[{j}]",
                expr=np.zeros((k, k)),
                sense=1,
                trivial=True,
            )
        )

    # x-quadratic entry
    quad = 0
    for j in range(M):
        coef = bounds[j].eta0 if use_eta else bounds[j].kappa0
        quad = quad + sys.H[j].T @ coef @ sys.H[j]
    base = vars.P + quad if M else vars.P + zero_n
    if upper:
        expr = vars.Xi0 + beta * base
    else:
        expr = -vars.Xi0 - beta * base
    cons.append(MatrixIneq(name=f"{vars.side}-beta-{tag}-x", expr=expr, sense=1))

    # F-quadratic entries, one per block b (summed over the sandwich index)
    for b in range(M):
        acc = 0
        for a in range(M):
            d = bounds[a].eta1 if use_eta else bounds[a].kappa1
            if b in d:
                acc = acc + d[b]
        acc = acc + np.zeros((sys.widths[b], sys.widths[b]))
        if upper:
            expr = vars.Xi[b] + beta * acc
        else:
            expr = -vars.Xi[b] - beta * acc
        cons.append(
            MatrixIneq(name=f"{vars.side}-beta-{tag}-F[{b}]", expr=expr, sense=1)
        )

    # x-F cross entries
    for b in range(M):
        acc = 0
        for a in range(M):
            d = bounds[a].eta2 if use_eta else bounds[a].kappa2
            if b in d:
                acc = acc + d[b]
        acc = acc + np.zeros((sys.widths[b], sys.widths[b]))
        if upper:
            expr = vars.Upsilon0[b] + beta * acc
        else:
            expr = -vars.Upsilon0[b] - beta * acc
        cons.append(
            MatrixIneq(name=f"{vars.side}-beta-{tag}-xF[{b}]", expr=expr, sense=1)
        )

    # F-F cross entries
    for s in range(M):
        for z in range(s + 1, M):
            acc = 0
            for a in range(M):
                d = bounds[a].eta3 if use_eta else bounds[a].kappa3
                if (s, z) in d:
                    acc = acc + d[(s, z)]
            acc = acc + zero_n
            if upper:
                expr = vars.UpsilonX[(s, z)] + beta * acc
            else:
                expr = -vars.UpsilonX[(s, z)] - beta * acc
            cons.append(
                MatrixIneq(
                    name=f"{vars.side}-beta-{tag}-FF[{s},{z}]", expr=expr, sense=1
                )
            )
    return cons


# ---------------------------------------------------------------------------
# scalar exponential bounds and gamma conditions
# ---------------------------------------------------------------------------

def exp_growth_factor(beta: float, T: float) -> float:
    """(e^(beta T) - 1)/beta, continuously extended to T at beta = 0."""
    if beta == 0.0:
        return T
    with np.errstate(over="ignore"):
        return float(np.expm1(beta * T) / beta)


def sup_exp_bound(
    a: float, c: float, beta: float, T: float, direction: str = "sup"
) -> float:
    """Exact extremum over [0, T] of the trajectory-level envelope.

    sup direction: t -> a e^(bt) + (c/b)(e^(bt) - 1); inf direction flips
    the sign of the input term.  The map is monotone in t, so the extremum
    sits at an endpoint; beta = 0 uses the limit a +- c t.
    """
    if direction not in ("sup", "inf"):
        raise ValueError(f"unknown direction {direction!r}")
    if a < 0 or c < 0:
        raise ValueError("a and c must be nonnegative")
    if not (T > 0):
        raise ValueError("T must be positive")
    g = exp_growth_factor(beta, T)
    with np.errstate(over="ignore"):
        scale = float(np.exp(beta * T))
    if direction == "sup":
        return max(a, a * scale + c * g)
    return min(a, a * scale - c * g)


@dataclass(frozen=True)
class GammaCondition:
    """The input-gain condition as an affine inequality coeff * gamma <= bound.

    ``endpoint_ok`` carries the gamma-free comparison required at t = 0 in
    interval mode (vacuously true in terminal mode).  An unsatisfiable
    condition is reported through ``feasible()``, never as an exception.
    """

    side: str
    mode: str
    beta: float
    gamma0: float
    T: float
    alpha_in: float
    alpha_out: float
    coeff: float
    bound: float
    endpoint_ok: bool

    def satisfied(self, gamma: float, tol: float = 0.0) -> bool:
        return self.endpoint_ok and self.coeff * gamma <= self.bound + tol

    def margin(self, gamma: float) -> float:
        if not self.endpoint_ok:
            return -np.inf
        return self.bound - self.coeff * gamma

    def feasible(self) -> bool:
        """Does any gamma > 0 satisfy the condition?"""
        if not self.endpoint_ok:
            return False
        if self.coeff == 0.0:
            return self.bound >= 0.0
        return self.bound > 0.0

    def max_gamma(self) -> float:
        if not self.feasible():
            return -np.inf
        if self.coeff == 0.0:
            return np.inf
        return self.bound / self.coeff


def gamma_condition(
    side: str,
    alpha_in: float,
    alpha_out: float,
    beta: float,
    gamma0: float,
    T: float,
    mode: str = "interval",
) -> GammaCondition:
    """Branch-free gain condition equivalent to the envelope comparison.

    Upper side: sup over [0,T] (or the value at T in terminal mode) of
    a e^(bt) + gamma gamma0^2 (e^(bt)-1)/b with a = alpha_in must not
    exceed alpha_out.  Lower side: the inf (or terminal value) of
    a e^(bt) - gamma gamma0^2 (...) must not fall below alpha_out.  Both
    reduce to one affine inequality on gamma plus, in interval mode, the
    gamma-free endpoint comparison at t = 0.
    """
    if side not in ("upper", "lower"):
        raise ValueError(f"unknown side {side!r}")
    if mode not in ("interval", "terminal"):
        raise ValueError(f"unknown mode {mode!r}")
    g = exp_growth_factor(beta, T)
    with np.errstate(over="ignore"):
        scale = float(np.exp(beta * T))
    coeff = gamma0 * gamma0 * g
    if side == "upper":
        bound = alpha_out - alpha_in * scale
        endpoint_ok = mode == "terminal" or alpha_in <= alpha_out
    else:
        bound = alpha_in * scale - alpha_out
        endpoint_ok = mode == "terminal" or alpha_in >= alpha_out
    return GammaCondition(
        side=side,
        mode=mode,
        beta=beta,
        gamma0=gamma0,
        T=T,
        alpha_in=alpha_in,
        alpha_out=alpha_out,
        coeff=coeff,
        bound=bound,
        endpoint_ok=bool(endpoint_ok),
    )


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------

@dataclass
class Feasible:
    vars: DecisionVars
    margins: dict[str, float]
    solver: str


@dataclass
class Infeasible:
    reason: str


class SolverFailure(RuntimeError):
    """The engine neither produced a point nor proved infeasibility."""


SOLVER_ENV_VAR = "PERSIDSKII_SOLVER"


def _constant_value(expr):
    if isinstance(expr, np.ndarray):
        return expr
    if np.isscalar(expr):
        return float(expr)
    return None


_SOLVER_DEFAULTS = {
    "CLARABEL": {"tol_feas": 1e-10, "tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10},
    "SCS": {"eps": 1e-9, "max_iters": 100000},
}


class CvxpyEngine:
    """Default engine: hands the affine cone program to cvxpy."""

    def __init__(self, solver: str | None = None, **options):
        self.solver = solver or os.environ.get(SOLVER_ENV_VAR, "CLARABEL")
        self.options = options or _SOLVER_DEFAULTS.get(self.solver, {})

    def solve(self, problem: ConicProblem, tol: float):
        import cvxpy as cp

        vars, raw = problem.template.cvxpy_vars(C=problem.C)
        mats, scalars = problem.build(vars)
        constraints = []
        for m in mats:
            const = _constant_value(m.expr)
            if const is not None:
                e = np.atleast_2d(const)
                lam = float(np.linalg.eigvalsh(m.sense * (e + e.T) / 2.0)[0])
                if lam < m.margin - tol:
                    return Infeasible(f"trivially contradictory constraint {m.name}")
                continue
            d = m.expr.shape[0]
            sym = (m.expr + m.expr.T) / 2
            constraints.append(m.sense * sym >> m.margin * np.eye(d))
        for s in scalars:
            const = _constant_value(s.expr)
            if const is not None:
                if const < s.margin - tol:
                    return Infeasible(f"trivially contradictory constraint {s.name}")
                continue
            constraints.append(s.expr >= s.margin)
        objective = (
            cp.Minimize(problem.objective(vars))
            if problem.objective is not None
            else cp.Minimize(0)
        )
        prob = cp.Problem(objective, constraints)
        try:
            prob.solve(solver=self.solver, **self.options)
        except cp.error.SolverError as exc:
            raise SolverFailure(str(exc)) from exc
        status = prob.status
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            values = {}
            for name, var in raw.items():
                if var.value is None:
                    raise SolverFailure(f"solver returned no value for {name}")
                values[name] = np.asarray(var.value, dtype=float)
            out = problem.template.value_vars(values, C=problem.C)
            return Feasible(vars=out, margins={}, solver=self.solver)
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return Infeasible(f"solver status {status}")
        raise SolverFailure(f"solver status {status}")


class MockEngine:
    """Test engine returning a canned assignment (or None for infeasible)."""

    def __init__(self, assignment: Callable[[ConicProblem], DecisionVars | None]):
        self.assignment = assignment

    def solve(self, problem: ConicProblem, tol: float):
        vars = self.assignment(problem)
        if vars is None:
            return Infeasible("mock engine: no assignment")
        return Feasible(vars=vars, margins={}, solver="mock")


def solve_feasibility(
    problem: ConicProblem,
    tol: float = DEFAULT_SOLVE_TOL,
    engine=None,
):
    """Solve and independently re-verify; never trust the solver's margins.

    Returns Feasible (with eigvalsh-computed margins all >= -tol) or
    Infeasible.  A claimed-feasible point failing re-verification raises
    SolverFailure, which is distinct from infeasibility.
    """
    engine = engine or CvxpyEngine()
    result = engine.solve(problem, tol)
    if isinstance(result, Infeasible):
        return result
    margins = problem.margins_at(result.vars)
    worst = min(margins.values()) if margins else 0.0
    if worst < -tol:
        bad = min(margins, key=margins.get)
        raise SolverFailure(
            f"engine returned an assignment violating {bad} "
            f"(margin {margins[bad]:.3e} < -{tol:.1e})"
        )
    return Feasible(vars=result.vars, margins=margins, solver=result.solver)


# ---------------------------------------------------------------------------
# SDP exchange dump (sparse SDPA format)
# ---------------------------------------------------------------------------

def _coordinates(template: VarTemplate) -> list[tuple[str, tuple]]:
    coords: list[tuple[str, tuple]] = []
    for name, kind, shape in template.index_map():
        if kind == "scalar":
            coords.append((name, ()))
        elif kind == "diag":
            coords.extend((name, (i,)) for i in range(shape[0]))
        elif kind == "sym":
            d = shape[0]
            coords.extend((name, (i, j)) for i in range(d) for j in range(i, d))
        else:  # full
            r, c = shape
            coords.extend((name, (i, j)) for i in range(r) for j in range(c))
    return coords


def _zero_values(template: VarTemplate) -> dict:
    values: dict[str, np.ndarray] = {}
    for name, kind, shape in template.index_map():
        values[name] = np.zeros(shape) if shape else np.zeros(())
    return values


def _set_coordinate(values: dict, name: str, idx: tuple, val: float):
    if idx == ():
        values[name] = np.asarray(val, dtype=float)
        return
    arr = values[name].copy()
    arr[idx] = val
    if len(idx) == 2 and arr.shape[0] == arr.shape[1]:
        arr[idx[1], idx[0]] = val  # symmetric coordinate
    values[name] = arr


def write_sdpa(problem: ConicProblem, path: str, tol: float = 0.0) -> None:
    """Dump the feasibility problem in sparse SDPA (.dat-s) form.

    Encodes sum_i y_i F_i - F0 in the PSD cone per block; scalar
    inequalities become 1x1 diagonal blocks.  Intended for debugging with
    external solvers, not for the hot path.
    """
    template = problem.template
    coords = _coordinates(template)

    def constraints_at(values):
        vars = template.value_vars(values, C=problem.C)
        mats, scalars = problem.build(vars)
        blocks = []
        for m in mats:
            e = np.atleast_2d(np.asarray(m.expr, dtype=float))
            blocks.append((m.sense * (e + e.T) / 2.0, m.margin, e.shape[0]))
        for s in scalars:
            blocks.append((np.array([[float(s.expr)]]), s.margin, 1))
        return blocks

    base_values = _zero_values(template)
    base = constraints_at(base_values)
    nblocks = len(base)
    lines = [f"{len(coords)}", f"{nblocks}"]
    lines.append(" ".join(str(dim) for _, _, dim in base))
    lines.append(" ".join("0.0" for _ in coords))
    entries: list[str] = []
    for bno, (e0, margin, dim) in enumerate(base, start=1):
        f0 = margin * np.eye(dim) - e0
        for i in range(dim):
            for j in range(i, dim):
                if f0[i, j] != 0.0:
                    entries.append(f"0 {bno} {i+1} {j+1} {f0[i, j]:.17g}")
    for vno, (name, idx) in enumerate(coords, start=1):
        values = _zero_values(template)
        _set_coordinate(values, name, idx, 1.0)
        cur = constraints_at(values)
        for bno, ((ei, _, dim), (e0, _, _)) in enumerate(zip(cur, base), start=1):
            fi = ei - e0
            for i in range(dim):
                for j in range(i, dim):
                    if abs(fi[i, j]) > 1e-14:
                        entries.append(f"{vno} {bno} {i+1} {j+1} {fi[i, j]:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines + entries) + "\n")
