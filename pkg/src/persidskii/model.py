"""Data model for generalized Persidskii systems and annular stability queries.

The dynamics handled by this package are

    dx/dt = A0 x + sum_j A_j F_j(H_j x) + u,      y = C x,

where each nonlinearity block F_j acts componentwise on the scalar
functionals H_j^(i) x and satisfies a sector condition.  This module holds
the immutable system/query containers, the builtin nonlinearity families
(with exact antiderivatives and integral-sandwich coefficient generators),
validation, block classification, and the JSON wire format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from scipy.integrate import quad

FloatArray = NDArray[np.float64]

QUADRATURE_ABS_TOL = 1e-10
SECTOR_GRID_POINTS = 1001
SECTOR_GRID_RANGE = 10.0

KINDS = ("ASTS", "STBNZ", "AS", "oAS")


# ---------------------------------------------------------------------------
# scalar nonlinearities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarNonlinearity:
    """One sector-bounded scalar function with its exact antiderivative.

    ``antiderivative(nu)`` must equal the integral of ``f`` from 0 to nu.
    ``radially_unbounded`` marks f(nu) -> +-inf; ``unbounded_integral`` marks
    the antiderivative -> +inf (implied by the former).  ``sector_relaxed``
    admits nu*f(nu) = 0 away from the origin (e.g. relu) and downgrades the
    strict sector check to a warning.
    """

    name: str
    f: Callable[[FloatArray], FloatArray]
    antiderivative: Callable[[FloatArray], FloatArray]
    radially_unbounded: bool
    unbounded_integral: bool
    sector_relaxed: bool = False
    analytic: bool = True


def _quadrature_antiderivative(f: Callable) -> Callable:
    """Adaptive-quadrature fallback antiderivative for user functions."""

    def integral(nu):
        scalar = np.isscalar(nu)
        nus = np.atleast_1d(np.asarray(nu, dtype=float))
        out = np.array(
            [quad(f, 0.0, v, epsabs=QUADRATURE_ABS_TOL)[0] for v in nus]
        )
        return float(out[0]) if scalar else out

    return integral


def scalar_tanh() -> ScalarNonlinearity:
    return ScalarNonlinearity(
        name="tanh",
        f=np.tanh,
        antiderivative=lambda nu: np.log(np.cosh(np.minimum(np.abs(nu), 350.0)))
        + np.maximum(np.abs(nu) - 350.0, 0.0),  # log cosh overflow guard
        radially_unbounded=False,
        unbounded_integral=True,
    )


def scalar_bipolar_sigmoid() -> ScalarNonlinearity:
    # (1 - e^-nu)/(1 + e^-nu) = tanh(nu/2); integral 2*log(cosh(nu/2))
    base = scalar_tanh()
    return ScalarNonlinearity(
        name="bipolar_sigmoid",
        f=lambda nu: np.tanh(np.asarray(nu) / 2.0),
        antiderivative=lambda nu: 2.0 * base.antiderivative(np.asarray(nu) / 2.0),
        radially_unbounded=False,
        unbounded_integral=True,
    )


def scalar_odd_poly(coeffs: Sequence[float]) -> ScalarNonlinearity:
    """Odd polynomial sum_m c_m nu^(2m+1); coefficients must be >= 0."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("odd polynomial needs a nonempty coefficient list")
    if np.any(c < 0):
        raise ValueError("odd polynomial coefficients must be nonnegative")
    if not np.any(c > 0):
        raise ValueError("odd polynomial must have a positive coefficient")
    degrees = 2 * np.arange(c.size) + 1

    def f(nu):
        nu = np.asarray(nu, dtype=float)
        return sum(ck * nu**d for ck, d in zip(c, degrees))

    def antider(nu):
        nu = np.asarray(nu, dtype=float)
        return sum(ck * nu ** (d + 1) / (d + 1) for ck, d in zip(c, degrees))

    label = "poly:" + json.dumps([float(x) for x in c])
    return ScalarNonlinearity(
        name=label,
        f=f,
        antiderivative=antider,
        radially_unbounded=True,
        unbounded_integral=True,
    )


def scalar_relu() -> ScalarNonlinearity:
    return ScalarNonlinearity(
        name="relu",
        f=lambda nu: np.maximum(np.asarray(nu, dtype=float), 0.0),
        antiderivative=lambda nu: np.maximum(np.asarray(nu, dtype=float), 0.0) ** 2 / 2.0,
        radially_unbounded=False,  # one-sided growth only
        unbounded_integral=False,
        sector_relaxed=True,
    )


def scalar_from_table(
    nu_grid: Sequence[float],
    values: Sequence[float],
    radially_unbounded: bool = False,
    unbounded_integral: bool = False,
) -> ScalarNonlinearity:
    """Tabulated nonlinearity (linear interpolation, trapezoid antiderivative)."""
    nu_grid = np.asarray(nu_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if nu_grid.ndim != 1 or nu_grid.shape != values.shape:
        raise ValueError("table grid and values must be 1-d and equal length")
    if np.any(np.diff(nu_grid) <= 0):
        raise ValueError("table grid must be strictly increasing")
    from scipy.integrate import cumulative_trapezoid

    cum = np.concatenate([[0.0], cumulative_trapezoid(values, nu_grid)])
    # shift so the antiderivative is anchored at nu = 0
    anchor = np.interp(0.0, nu_grid, cum)

    def f(nu):
        return np.interp(nu, nu_grid, values)

    def antider(nu):
        return np.interp(nu, nu_grid, cum) - anchor

    return ScalarNonlinearity(
        name="table",
        f=f,
        antiderivative=antider,
        radially_unbounded=radially_unbounded,
        unbounded_integral=unbounded_integral or radially_unbounded,
        analytic=False,
    )


# ---------------------------------------------------------------------------
# integral sandwich coefficients (per-unit-multiplier form)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundsCoefficients:
    """Per-unit-multiplier sandwich coefficients for one family.

    For a diagonal multiplier L the instantiated coefficient matrices are
    ``L @ diag(coef)``, so the generated bounds stay affine in L.  ``eta0``
    bounds the integral term by the quadratic x' H' eta0 H x from above,
    ``kappa2``/``eta2`` use the cross term 2 F' kappa2 H x instead (the
    natural choice for polynomials, where the sandwich is exact).
    """

    kappa0: float = 0.0
    eta0: float = 0.0
    kappa1: float = 0.0
    eta1: float = 0.0
    kappa2: float = 0.0
    eta2: float = 0.0


_BUILTIN_BOUNDS = {
    "tanh": BoundsCoefficients(eta0=1.0),  # 2*log cosh(nu) <= nu^2
    "bipolar_sigmoid": BoundsCoefficients(eta0=0.5),  # 4*log cosh(nu/2) <= nu^2/2
    "relu": BoundsCoefficients(kappa2=0.5, eta2=0.5),  # integral == nu*f/2
}


def _poly_bounds(coeffs: Sequence[float]) -> BoundsCoefficients:
    c = np.asarray(coeffs, dtype=float)
    degrees = 2 * np.arange(c.size) + 1
    active = degrees[c > 0]
    # termwise: integral of c nu^d is c nu^(d+1)/(d+1), nu*f is c nu^(d+1)
    return BoundsCoefficients(
        kappa2=1.0 / (1.0 + active.max()),
        eta2=1.0 / (1.0 + active.min()),
    )


@dataclass(frozen=True)
class SectorIntegralBounds:
    """Instantiated sandwich bounds for one block at a given multiplier.

    All entries are diagonal matrices (numpy arrays or solver expressions):
    ``kappa0``/``eta0`` are k x k quadratic-in-(Hx) coefficients,
    ``kappa1``/``eta1`` and ``kappa2``/``eta2`` map block index -> k_b x k_b,
    ``kappa3``/``eta3`` map ordered block pairs -> n x n.  Missing keys mean
    zero, matching the convention that dominated terms are omitted.
    """

    width: int
    kappa0: object
    eta0: object
    kappa1: dict = field(default_factory=dict)
    eta1: dict = field(default_factory=dict)
    kappa2: dict = field(default_factory=dict)
    eta2: dict = field(default_factory=dict)
    kappa3: dict = field(default_factory=dict)
    eta3: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearityFamily:
    """A block of scalar nonlinearities with its sandwich generator."""

    width: int
    components: tuple[ScalarNonlinearity, ...]
    coefficients: BoundsCoefficients | None = None

    def __post_init__(self):
        if len(self.components) != self.width:
            raise ValueError("family width does not match component count")

    @property
    def radially_unbounded(self) -> bool:
        return all(c.radially_unbounded for c in self.components)

    @property
    def unbounded_integral(self) -> bool:
        return all(
            c.unbounded_integral or c.radially_unbounded for c in self.components
        )

    def values(self, nu: FloatArray) -> FloatArray:
        nu = np.asarray(nu, dtype=float)
        return np.array([c.f(nu[i]) for i, c in enumerate(self.components)])

    def integrals(self, nu: FloatArray) -> FloatArray:
        nu = np.asarray(nu, dtype=float)
        return np.array(
            [c.antiderivative(nu[i]) for i, c in enumerate(self.components)]
        )

    def bounds(self, lam, own_index: int) -> SectorIntegralBounds:
        """Sandwich bounds at multiplier ``lam`` (k x k diagonal, affine in it).

        ``lam`` may be a numpy diagonal matrix or a solver expression; the
        returned entries reference it linearly.
        """
        if self.coefficients is None:
            raise ValueError(
                "family has no sandwich coefficient generator; supply "
                "BoundsCoefficients to use it in certification"
            )
        c = self.coefficients
        k = self.width
        zero = np.zeros((k, k))
        out = SectorIntegralBounds(
            width=k,
            kappa0=c.kappa0 * lam if c.kappa0 else zero,
            eta0=c.eta0 * lam if c.eta0 else zero,
        )
        if c.kappa1:
            out.kappa1[own_index] = c.kappa1 * lam
        if c.eta1:
            out.eta1[own_index] = c.eta1 * lam
        if c.kappa2:
            out.kappa2[own_index] = c.kappa2 * lam
        if c.eta2:
            out.eta2[own_index] = c.eta2 * lam
        return out


def tanh_family(width: int) -> NonlinearityFamily:
    return NonlinearityFamily(
        width, tuple(scalar_tanh() for _ in range(width)), _BUILTIN_BOUNDS["tanh"]
    )


def bipolar_sigmoid_family(width: int) -> NonlinearityFamily:
    return NonlinearityFamily(
        width,
        tuple(scalar_bipolar_sigmoid() for _ in range(width)),
        _BUILTIN_BOUNDS["bipolar_sigmoid"],
    )


def odd_poly_family(width: int, coeffs: Sequence[float]) -> NonlinearityFamily:
    return NonlinearityFamily(
        width,
        tuple(scalar_odd_poly(coeffs) for _ in range(width)),
        _poly_bounds(coeffs),
    )


def cubic_family(width: int) -> NonlinearityFamily:
    return odd_poly_family(width, [0.0, 1.0])


def relu_family(width: int) -> NonlinearityFamily:
    return NonlinearityFamily(
        width, tuple(scalar_relu() for _ in range(width)), _BUILTIN_BOUNDS["relu"]
    )


# ---------------------------------------------------------------------------
# system
# ---------------------------------------------------------------------------

def _as_matrix(a, shape_hint: str) -> FloatArray:
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{shape_hint} must be a 2-d matrix, got ndim={a.ndim}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PersidskiiSystem:
    """Immutable container for dx/dt = A0 x + sum_j A_j F_j(H_j x) + u, y = Cx."""

    A0: FloatArray
    A: tuple[FloatArray, ...]
    H: tuple[FloatArray, ...]
    C: FloatArray
    families: tuple[NonlinearityFamily, ...]

    def __init__(self, A0, A=(), H=(), C=None, families=()):
        object.__setattr__(self, "A0", _as_matrix(A0, "A0"))
        object.__setattr__(
            self, "A", tuple(_as_matrix(a, f"A[{j}]") for j, a in enumerate(A))
        )
        object.__setattr__(
            self, "H", tuple(_as_matrix(h, f"H[{j}]") for j, h in enumerate(H))
        )
        n = self.A0.shape[0]
        if C is None:
            C = np.eye(n)
        object.__setattr__(self, "C", _as_matrix(C, "C"))
        object.__setattr__(self, "families", tuple(families))

    @property
    def n(self) -> int:
        return self.A0.shape[0]

    @property
    def M(self) -> int:
        return len(self.A)

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(h.shape[0] for h in self.H)

    def nonlinearity_values(self, x: FloatArray) -> list[FloatArray]:
        return [fam.values(h @ x) for fam, h in zip(self.families, self.H)]

    def rhs(self, x: FloatArray, u: FloatArray) -> FloatArray:
        out = self.A0 @ x + u
        for a, fj in zip(self.A, self.nonlinearity_values(x)):
            out = out + a @ fj
        return out

    def output(self, x: FloatArray) -> FloatArray:
        return self.C @ x


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityQuery:
    """A decision query: property kind, horizon, annuli, and input bound.

    ``eps`` radii bound the initial state annulus, ``delta`` the target
    annulus (state for ASTS/STBNZ/AS, output for oAS), ``gamma0`` the
    essential-sup input norm.  Invalid combinations raise ValueError at
    construction; a query object is always admissible.
    """

    kind: str
    T: float
    eps1: float
    eps2: float
    delta1: float
    delta2: float
    gamma0: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if not (self.T > 0):
            raise ValueError("horizon T must be positive")
        if not (0 <= self.eps1 < self.eps2):
            raise ValueError("need 0 <= eps1 < eps2")
        if not (0 <= self.delta1 < self.delta2):
            raise ValueError("need 0 <= delta1 < delta2")
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be nonnegative")
        if self.kind == "STBNZ" and (self.eps1 != 0 or self.delta1 != 0):
            raise ValueError("STBNZ forces eps1 = delta1 = 0")
        if self.kind == "ASTS" and not (
            self.delta1 <= self.eps1 and self.eps2 <= self.delta2
        ):
            raise ValueError(
                "ASTS query violates (eps1, eps2) ⊆ (delta1, delta2)"
            )

    @property
    def terminal(self) -> bool:
        return self.kind in ("AS", "oAS")

    @property
    def on_output(self) -> bool:
        return self.kind == "oAS"


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        lines = [f"error: {e}" for e in self.errors]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok"


def validate_system(
    sys: PersidskiiSystem,
    grid_points: int = SECTOR_GRID_POINTS,
    grid_range: float = SECTOR_GRID_RANGE,
) -> ValidationReport:
    """Check shapes and sample the sector/integral conditions.

    Builtin families carry analytic guarantees but are sampled anyway; the
    grid is the only tool available for user-supplied functions.  An empty
    error list means the system is admissible.
    """
    rep = ValidationReport()
    n = sys.n
    if sys.A0.shape != (n, n):
        rep.errors.append(f"A0 must be square, got {sys.A0.shape}")
    if not (len(sys.A) == len(sys.H) == len(sys.families)):
        rep.errors.append(
            f"block count mismatch: {len(sys.A)} A, {len(sys.H)} H, "
            f"{len(sys.families)} families"
        )
        return rep
    if sys.C.shape[1] != n:
        rep.errors.append(f"C must have {n} columns, got {sys.C.shape}")
    for j, (a, h, fam) in enumerate(zip(sys.A, sys.H, sys.families)):
        k = a.shape[1]
        if a.shape[0] != n:
            rep.errors.append(f"A[{j}] must have {n} rows, got {a.shape}")
        if h.shape != (k, n):
            rep.errors.append(
                f"H[{j}] must be {k}x{n} to match A[{j}] {a.shape}, got {h.shape}"
            )
        if fam.width != k:
            rep.errors.append(
                f"family[{j}] width {fam.width} does not match A[{j}] columns {k}"
            )

    nu = np.linspace(-grid_range, grid_range, grid_points)
    nu = nu[nu != 0.0]
    for j, fam in enumerate(sys.families):
        for i, comp in enumerate(fam.components):
            fv = np.asarray(comp.f(nu), dtype=float)
            prod = nu * fv
            if comp.sector_relaxed:
                if np.any(prod < 0):
                    rep.errors.append(
                        f"family[{j}] component {i} ({comp.name}): "
                        f"nu*f(nu) < 0 at nu={nu[np.argmin(prod)]:.4g}"
                    )
                else:
                    rep.warnings.append(
                        f"family[{j}] component {i} ({comp.name}): relaxed "
                        "sector (nu*f(nu) = 0 off the origin is tolerated)"
                    )
            elif np.any(prod <= 0):
                bad = nu[np.argmin(prod)]
                rep.errors.append(
                    f"family[{j}] component {i} ({comp.name}): sector "
                    f"violation nu*f(nu) = {np.min(prod):.4g} at nu={bad:.4g}"
                )
            anti = np.asarray(comp.antiderivative(nu), dtype=float)
            if np.any(anti < -QUADRATURE_ABS_TOL):
                rep.errors.append(
                    f"family[{j}] component {i} ({comp.name}): antiderivative "
                    f"negative ({np.min(anti):.4g})"
                )
            if comp.radially_unbounded and not comp.unbounded_integral:
                rep.errors.append(
                    f"family[{j}] component {i}: radially unbounded flag "
                    "requires unbounded integral flag"
                )
    return rep


def classify_nonlinearities(
    sys: PersidskiiSystem,
) -> tuple[int, int, tuple[int, ...]]:
    """Return (c, mu, order): block counts and the stable reordering.

    ``order`` permutes blocks so the radially unbounded ones come first,
    then those with divergent integrals; ``c`` counts the former, ``mu``
    the union (c <= mu <= M).
    """

    def key(j: int):
        fam = sys.families[j]
        return (not fam.radially_unbounded, not fam.unbounded_integral, j)

    order = tuple(sorted(range(sys.M), key=key))
    c = sum(1 for fam in sys.families if fam.radially_unbounded)
    mu = sum(
        1
        for fam in sys.families
        if fam.radially_unbounded or fam.unbounded_integral
    )
    return c, mu, order


def reorder_blocks(sys: PersidskiiSystem, order: Sequence[int]) -> PersidskiiSystem:
    return PersidskiiSystem(
        A0=sys.A0,
        A=tuple(sys.A[j] for j in order),
        H=tuple(sys.H[j] for j in order),
        C=sys.C,
        families=tuple(sys.families[j] for j in order),
    )


def check_integral_bounds(
    sys: PersidskiiSystem,
    j: int,
    lam: FloatArray,
    xs: FloatArray,
) -> float:
    """Worst sandwich violation for block j at multiplier lam over states xs.

    Returns max(lower - middle, middle - upper, 0); zero means the sampled
    sandwich holds.  Used as a numerical spot check of generated bounds.
    """
    lam_mat = np.diag(np.asarray(lam, dtype=float))
    bounds = sys.families[j].bounds(lam_mat, j)
    worst = 0.0
    for x in np.atleast_2d(xs):
        mid = 2.0 * float(
            np.sum(np.diag(lam_mat) * sys.families[j].integrals(sys.H[j] @ x))
        )
        lo = hi = 0.0
        hxj = sys.H[j] @ x
        lo += float(hxj @ np.asarray(bounds.kappa0) @ hxj)
        hi += float(hxj @ np.asarray(bounds.eta0) @ hxj)
        for b in range(sys.M):
            fb = sys.families[b].values(sys.H[b] @ x)
            hxb = sys.H[b] @ x
            if b in bounds.kappa1:
                lo += float(fb @ np.asarray(bounds.kappa1[b]) @ fb)
            if b in bounds.eta1:
                hi += float(fb @ np.asarray(bounds.eta1[b]) @ fb)
            if b in bounds.kappa2:
                lo += 2.0 * float(fb @ np.asarray(bounds.kappa2[b]) @ hxb)
            if b in bounds.eta2:
                hi += 2.0 * float(fb @ np.asarray(bounds.eta2[b]) @ hxb)
        for (s, z), mat in bounds.kappa3.items():
            fs = sys.families[s].values(sys.H[s] @ x)
            fz = sys.families[z].values(sys.H[z] @ x)
            lo += 2.0 * float(fs @ sys.H[s] @ np.asarray(mat) @ sys.H[z].T @ fz)
        for (s, z), mat in bounds.eta3.items():
            fs = sys.families[s].values(sys.H[s] @ x)
            fz = sys.families[z].values(sys.H[z] @ x)
            hi += 2.0 * float(fs @ sys.H[s] @ np.asarray(mat) @ sys.H[z].T @ fz)
        worst = max(worst, lo - mid, mid - hi)
    return worst


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------

def family_to_dict(fam: NonlinearityFamily) -> dict:
    names = {c.name for c in fam.components}
    if len(names) == 1:
        name = next(iter(names))
        if name == "tanh":
            return {"kind": "tanh", "width": fam.width}
        if name == "bipolar_sigmoid":
            return {"kind": "bipolar_sigmoid", "width": fam.width}
        if name == "relu":
            return {"kind": "relu", "width": fam.width}
        if name.startswith("poly:"):
            return {
                "kind": "poly",
                "width": fam.width,
                "coeffs": json.loads(name[len("poly:"):]),
            }
    raise ValueError("only named builtin families serialize to JSON")


def family_from_dict(d: dict) -> NonlinearityFamily:
    kind = d.get("kind")
    width = int(d["width"])
    if kind == "tanh":
        return tanh_family(width)
    if kind == "bipolar_sigmoid":
        return bipolar_sigmoid_family(width)
    if kind == "relu":
        return relu_family(width)
    if kind == "poly":
        return odd_poly_family(width, d["coeffs"])
    if kind == "table":
        comp = scalar_from_table(
            d["nu"],
            d["f"],
            radially_unbounded=bool(d.get("radially_unbounded", False)),
            unbounded_integral=bool(d.get("unbounded_integral", False)),
        )
        return NonlinearityFamily(width, tuple(comp for _ in range(width)))
    raise ValueError(f"unknown family descriptor {kind!r}")


def system_to_dict(sys: PersidskiiSystem) -> dict:
    return {
        "A0": sys.A0.tolist(),
        "A": [a.tolist() for a in sys.A],
        "H": [h.tolist() for h in sys.H],
        "C": sys.C.tolist(),
        "families": [family_to_dict(f) for f in sys.families],
    }


def system_from_dict(d: dict) -> PersidskiiSystem:
    return PersidskiiSystem(
        A0=d["A0"],
        A=d.get("A", ()),
        H=d.get("H", ()),
        C=d.get("C"),
        families=tuple(family_from_dict(f) for f in d.get("families", ())),
    )


def query_to_dict(q: StabilityQuery) -> dict:
    return {
        "kind": q.kind,
        "T": q.T,
        "eps": [q.eps1, q.eps2],
        "delta": [q.delta1, q.delta2],
        "gamma0": q.gamma0,
    }


def query_from_dict(d: dict) -> StabilityQuery:
    return StabilityQuery(
        kind=d["kind"],
        T=float(d["T"]),
        eps1=float(d["eps"][0]),
        eps2=float(d["eps"][1]),
        delta1=float(d["delta"][0]),
        delta2=float(d["delta"][1]),
        gamma0=float(d["gamma0"]),
    )
