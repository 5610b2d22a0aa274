"""Trajectory integration, annular containment monitoring, falsification.

Also holds the executable algebraic identity tying the assembled Q matrix to
the time derivative of the Lyapunov function along trajectories; that test
is the main drift guard on the block assembly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .lmi import DecisionVars, assemble_Q
from .model import PersidskiiSystem, StabilityQuery

FloatArray = NDArray[np.float64]

DEFAULT_TOL = 1e-9
INCONCLUSIVE_FACTOR = 10.0
NORM_CHECK_POINTS = 1000
CROSSING_TIME_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Step-size underflow or solver breakdown; carries the last valid time."""

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


# ---------------------------------------------------------------------------
# input signals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InputSignal:
    """An L-infinity input u(t) with a declared norm bound.

    ``fn`` maps a scalar time to an (n,) vector.  ``verify_bound`` samples
    the norm on a grid and checks the declared bound, which downstream code
    compares against a query's gamma0.
    """

    kind: str
    dim: int
    bound: float
    fn: Callable[[float], FloatArray]
    description: dict = field(default_factory=dict)

    def __call__(self, t: float) -> FloatArray:
        return self.fn(t)

    def verify_bound(self, T: float, points: int = NORM_CHECK_POINTS,
                     tol: float = 1e-9) -> bool:
        ts = np.linspace(0.0, T, points)
        sup = max(float(np.linalg.norm(self.fn(t))) for t in ts)
        return sup <= self.bound + tol


def zero_input(dim: int) -> InputSignal:
    z = np.zeros(dim)
    return InputSignal(kind="zero", dim=dim, bound=0.0, fn=lambda t: z)


def constant_input(value: Sequence[float]) -> InputSignal:
    v = np.asarray(value, dtype=float)
    return InputSignal(
        kind="constant",
        dim=v.size,
        bound=float(np.linalg.norm(v)),
        fn=lambda t: v,
        description={"value": v.tolist()},
    )


def sinusoid_input(
    amplitudes: Sequence[float],
    frequencies: Sequence[float],
    phases: Sequence[float] | None = None,
) -> InputSignal:
    """Per-channel a_i * cos(w_i t + phi_i); bound is the amplitude norm."""
    a = np.asarray(amplitudes, dtype=float)
    w = np.asarray(frequencies, dtype=float)
    phi = np.zeros_like(a) if phases is None else np.asarray(phases, dtype=float)
    if not (a.shape == w.shape == phi.shape):
        raise ValueError("sinusoid parameter shapes must match")
    return InputSignal(
        kind="sinusoid",
        dim=a.size,
        bound=float(np.linalg.norm(a)),
        fn=lambda t: a * np.cos(w * t + phi),
        description={
            "amplitudes": a.tolist(),
            "frequencies": w.tolist(),
            "phases": phi.tolist(),
        },
    )


def piecewise_constant_input(
    dim: int,
    bound: float,
    T: float,
    pieces: int,
    rng: np.random.Generator,
) -> InputSignal:
    """Random piecewise-constant input on the norm sphere of radius bound."""
    edges = np.linspace(0.0, T, pieces + 1)
    dirs = rng.standard_normal((pieces, dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    values = bound * dirs

    def fn(t):
        i = min(int(np.searchsorted(edges, t, side="right")) - 1, pieces - 1)
        return values[max(i, 0)]

    return InputSignal(
        kind="piecewise-constant",
        dim=dim,
        bound=bound,
        fn=fn,
        description={"edges": edges.tolist(), "values": values.tolist()},
    )


def table_input(times: Sequence[float], values, bound: float | None = None) -> InputSignal:
    """Tabulated input, linearly interpolated between samples."""
    ts = np.asarray(times, dtype=float)
    vs = np.atleast_2d(np.asarray(values, dtype=float))
    if vs.shape[0] != ts.size:
        vs = vs.T
    if vs.shape[0] != ts.size:
        raise ValueError("table shape does not match time grid")
    if bound is None:
        bound = float(np.max(np.linalg.norm(vs, axis=1)))

    def fn(t):
        return np.array([np.interp(t, ts, vs[:, i]) for i in range(vs.shape[1])])

    return InputSignal(kind="table", dim=vs.shape[1], bound=bound, fn=fn)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    t: FloatArray
    x: FloatArray  # (n, len(t))
    y: FloatArray  # (p, len(t))
    sol: object  # dense-output interpolant over [0, T]
    T: float
    C: FloatArray
    stats: dict

    def state(self, t: float) -> FloatArray:
        return np.asarray(self.sol(t), dtype=float)

    def norms(self, ts: FloatArray, output: bool = False) -> FloatArray:
        xs = np.atleast_2d(self.sol(ts))
        if output:
            xs = self.C @ xs
        return np.linalg.norm(xs, axis=0)


def integrate(
    sys: PersidskiiSystem,
    x0: Sequence[float],
    u: InputSignal,
    T: float,
    tol: float = DEFAULT_TOL,
) -> Trajectory:
    """Adaptive embedded Runge-Kutta (RK45) with dense output."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise ValueError(f"x0 must have shape ({sys.n},)")
    if not (tol > 0):
        raise ValueError("tol must be positive")

    def rhs(t, x):
        return sys.rhs(x, u(t))

    res = solve_ivp(
        rhs, (0.0, T), x0, method="RK45", rtol=tol, atol=tol, dense_output=True
    )
    if not res.success:
        last = float(res.t[-1]) if res.t.size else 0.0
        raise IntegrationError(
            f"integration stopped at t={last:.6g}: {res.message}", last
        )
    x = res.y
    return Trajectory(
        t=res.t,
        x=x,
        y=sys.C @ x,
        sol=res.sol,
        T=T,
        C=sys.C,
        stats={"nfev": int(res.nfev), "steps": int(res.t.size - 1)},
    )


def trajectory_to_csv(traj: Trajectory, path: str, points: int = 501) -> None:
    """Columns t, x_1..x_n, ||x||, ||y|| on a uniform grid (for plotting)."""
    ts = np.linspace(0.0, traj.T, points)
    xs = np.atleast_2d(traj.sol(ts))
    n = xs.shape[0]
    ynorm = np.linalg.norm(np.atleast_2d(traj.C @ xs), axis=0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i+1}" for i in range(n)] + ["norm_x", "norm_y"])
        for k, t in enumerate(ts):
            row = [f"{t:.9g}"] + [f"{xs[i, k]:.9g}" for i in range(n)]
            row += [f"{np.linalg.norm(xs[:, k]):.9g}", f"{ynorm[k]:.9g}"]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# containment monitor
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    mode: str
    passed: bool
    margin: float
    violation_time: float | None = None
    violation_state: FloatArray | None = None
    terminal_value: float | None = None

    def __bool__(self) -> bool:
        return self.passed


_MODES = {
    "ASTS": "interval-annulus",
    "STBNZ": "interval-ball",
    "AS": "terminal-annulus",
    "oAS": "terminal-output-annulus",
}


def _refine_extremum(norm_fn, ts, values, want_max: bool):
    idx = int(np.argmax(values) if want_max else np.argmin(values))
    lo = ts[max(idx - 1, 0)]
    hi = ts[min(idx + 1, len(ts) - 1)]
    if hi <= lo:
        return float(ts[idx]), float(values[idx])
    sign = -1.0 if want_max else 1.0
    res = minimize_scalar(
        lambda t: sign * norm_fn(t),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": CROSSING_TIME_TOL / 10},
    )
    t_star, v_star = float(res.x), float(sign * res.fun)
    if (want_max and values[idx] > v_star) or (not want_max and values[idx] < v_star):
        return float(ts[idx]), float(values[idx])
    return t_star, v_star


def _first_crossing(norm_fn, ts, values, level, upward: bool):
    """Bisect the dense output to localize the first level crossing."""
    above = values > level
    for k in range(len(ts) - 1):
        if above[k] != above[k + 1]:
            crossing_up = not above[k]
            if crossing_up == upward:
                try:
                    return float(
                        brentq(
                            lambda t: norm_fn(t) - level,
                            ts[k],
                            ts[k + 1],
                            xtol=CROSSING_TIME_TOL,
                        )
                    )
                except ValueError:
                    return float(ts[k + 1])
    return None


def monitor_annulus(traj: Trajectory, query: StabilityQuery,
                    C: FloatArray | None = None) -> Verdict:
    """Containment verdict per the query kind.

    Interval kinds check the whole horizon on the dense output with
    event-refined extrema; terminal kinds check t = T only.  The margin is
    the signed distance into [delta1, delta2] (only the upper distance for
    the ball mode).
    """
    mode = _MODES[query.kind]
    on_output = query.kind == "oAS"
    if on_output and C is None:
        raise ValueError("output mode needs the output matrix C")

    def norm_at(t):
        v = np.asarray(traj.sol(t), dtype=float)
        if on_output:
            v = C @ v
        return float(np.linalg.norm(v))

    if query.terminal:
        value = norm_at(query.T)
        margin = min(query.delta2 - value, value - query.delta1)
        if query.delta1 == 0.0:
            margin = query.delta2 - value
        state = traj.state(query.T)
        return Verdict(
            mode=mode,
            passed=margin >= 0,
            margin=margin,
            violation_time=None if margin >= 0 else query.T,
            violation_state=None if margin >= 0 else state,
            terminal_value=value,
        )

    ts = np.unique(np.concatenate([traj.t, np.linspace(0.0, query.T, 2049)]))
    xs = np.atleast_2d(traj.sol(ts))
    values = np.linalg.norm(xs, axis=0)
    t_hi, v_hi = _refine_extremum(norm_at, ts, values, want_max=True)
    margin = query.delta2 - v_hi
    t_bad, v_bad = t_hi, v_hi
    check_lower = query.delta1 > 0.0
    if check_lower:
        t_lo, v_lo = _refine_extremum(norm_at, ts, values, want_max=False)
        low_margin = v_lo - query.delta1
        if low_margin < margin:
            margin = low_margin
            t_bad, v_bad = t_lo, v_lo
    if margin >= 0:
        return Verdict(mode=mode, passed=True, margin=margin,
                       terminal_value=norm_at(query.T))
    # localize the first exit time for the witness
    if v_bad > query.delta2:
        t_cross = _first_crossing(norm_at, ts, values, query.delta2, upward=True)
    else:
        t_cross = _first_crossing(norm_at, ts, values, query.delta1, upward=False)
    t_viol = t_cross if t_cross is not None else t_bad
    return Verdict(
        mode=mode,
        passed=False,
        margin=margin,
        violation_time=t_viol,
        violation_state=traj.state(t_viol),
        terminal_value=norm_at(query.T),
    )


# ---------------------------------------------------------------------------
# falsification
# ---------------------------------------------------------------------------

@dataclass
class Witness:
    x0: FloatArray
    input_kind: str
    input_description: dict
    time: float | None
    margin: float
    sample_index: int


@dataclass
class FalsificationReport:
    n_samples: int
    violations: int
    inconclusive: int
    worst_margin: float
    witness: Witness | None
    seed: int
    terminal_values: FloatArray
    margins: FloatArray

    @property
    def clean(self) -> bool:
        return self.violations == 0


def sample_annulus(
    rng: np.random.Generator, n: int, r1: float, r2: float
) -> FloatArray:
    """Uniform sample of the closed annulus via inverse CDF on r^n."""
    d = rng.standard_normal(n)
    d /= np.linalg.norm(d)
    u = rng.uniform()
    r = (r1**n + u * (r2**n - r1**n)) ** (1.0 / n)
    return r * d


def default_input_family(
    dim: int, gamma0: float, T: float
) -> list[Callable[[np.random.Generator], InputSignal]]:
    """Extremal constants, scaled sinusoids, random piecewise constants, zero.

    Worst cases typically sit on the norm boundary, so every non-zero
    member has norm exactly gamma0.
    """
    if gamma0 == 0.0:
        return [lambda rng: zero_input(dim)]
    family: list[Callable[[np.random.Generator], InputSignal]] = [
        lambda rng: zero_input(dim)
    ]
    for i in range(dim):
        for sign in (1.0, -1.0):
            e = np.zeros(dim)
            e[i] = sign * gamma0
            family.append(lambda rng, vec=e: constant_input(vec))

    def make_sin(rng):
        w = rng.uniform(0.5, 3.0 * np.pi / max(T, 1e-9), size=dim)
        phi = rng.uniform(0, 2 * np.pi, size=dim)
        a = rng.standard_normal(dim)
        a *= gamma0 / max(np.linalg.norm(a), 1e-300)
        return sinusoid_input(a, w, phi)

    def make_pwc(rng):
        return piecewise_constant_input(dim, gamma0, T, pieces=8, rng=rng)

    family.append(make_sin)
    family.append(make_pwc)
    return family


def falsify(
    sys: PersidskiiSystem,
    query: StabilityQuery,
    n_samples: int,
    seed: int,
    inputs: Sequence[InputSignal] | None = None,
    tol: float = DEFAULT_TOL,
) -> FalsificationReport:
    """Monte Carlo search for a trajectory violating the queried property.

    Initial states are uniform on the closed eps-annulus; inputs come from
    ``inputs`` (cycled) or the default admissible family.  Deterministic
    in (seed, n_samples, input family).  Margins within 10*tol of zero are
    inconclusive rather than violations.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    factories = None
    if inputs is not None:
        fixed = list(inputs)
        for sig in fixed:
            if sig.bound > query.gamma0 + 1e-9:
                raise ValueError(
                    f"input bound {sig.bound} exceeds query gamma0 {query.gamma0}"
                )
            if not sig.verify_bound(query.T):
                raise ValueError("input violates its declared norm bound")
        factories = [lambda rng, s=s: s for s in fixed]
    else:
        factories = default_input_family(sys.n, query.gamma0, query.T)

    children = np.random.SeedSequence(seed).spawn(n_samples)
    threshold = INCONCLUSIVE_FACTOR * tol
    worst = np.inf
    witness = None
    violations = 0
    inconclusive = 0
    margins = np.empty(n_samples)
    terminal = np.empty(n_samples)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        x0 = sample_annulus(rng, sys.n, query.eps1, query.eps2)
        sig = factories[i % len(factories)](rng)
        traj = integrate(sys, x0, sig, query.T, tol=tol)
        verdict = monitor_annulus(traj, query, C=sys.C)
        margins[i] = verdict.margin
        terminal[i] = verdict.terminal_value
        if verdict.margin <= -threshold:
            violations += 1
        elif abs(verdict.margin) < threshold:
            inconclusive += 1
        if verdict.margin < worst:
            worst = verdict.margin
            if verdict.margin <= -threshold:
                witness = Witness(
                    x0=x0,
                    input_kind=sig.kind,
                    input_description=sig.description,
                    time=verdict.violation_time,
                    margin=verdict.margin,
                    sample_index=i,
                )
    return FalsificationReport(
        n_samples=n_samples,
        violations=violations,
        inconclusive=inconclusive,
        worst_margin=float(worst),
        witness=witness,
        seed=seed,
        terminal_values=terminal,
        margins=margins,
    )


# ---------------------------------------------------------------------------
# the Q-matrix / Lyapunov-derivative identity
# ---------------------------------------------------------------------------

def vdot_identity_residual(
    sys: PersidskiiSystem,
    vars: DecisionVars,
    point: tuple[Sequence[float], Sequence[float]],
    variant: str = "standard",
) -> float:
    """Relative residual of the descriptor-form expansion at one point.

    With w = [dx; x; F_1..F_M; u] and dx taken from the dynamics, the
    quadratic form w'Qw minus the penalty corrections and the signed
    gamma u'u term must equal grad V . dx exactly, for any Psi, Gamma,
    Omega (the descriptor slack multiplies the vanishing residual of the
    dynamics).  Returns |lhs - rhs| / max(1, |w'Qw|, |rhs|).
    """
    x, u = (np.asarray(v, dtype=float) for v in point)
    F = sys.nonlinearity_values(x)
    xdot = sys.rhs(x, u)
    w = np.concatenate([xdot, x] + [np.asarray(f) for f in F] + [u])
    Q = np.asarray(assemble_Q(sys, vars, variant=variant), dtype=float)
    quad = float(w @ Q @ w)
    corr = -float(x @ np.asarray(vars.Xi0) @ x)
    for j in range(sys.M):
        corr -= float(F[j] @ np.asarray(vars.Xi[j]) @ F[j])
        corr -= 2.0 * float(x @ sys.H[j].T @ np.asarray(vars.Upsilon0[j]) @ F[j])
    for (s, z), ups in vars.UpsilonX.items():
        corr -= 2.0 * float(F[s] @ sys.H[s] @ np.asarray(ups) @ sys.H[z].T @ F[z])
    gamma = float(vars.gamma)
    gterm = (gamma if vars.side == "upper" else -gamma) * float(u @ u)
    lhs = quad + corr + gterm

    grad = 2.0 * np.asarray(vars.P) @ x
    for j in range(sys.M):
        grad = grad + 2.0 * sys.H[j].T @ np.asarray(vars.Lambda[j]) @ F[j]
    rhs = float(grad @ xdot)
    return abs(lhs - rhs) / max(1.0, abs(quad), abs(rhs))
