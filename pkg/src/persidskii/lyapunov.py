"""Lyapunov function evaluation, class-K sandwich bounds, Finsler positivity.

The candidate function is V(x) = x'Px + 2 sum_{j,i} Lambda_j^i * integral of
f_j^i from 0 to H_j^(i) x.  Positivity of V can hold even for singular P
through the Finsler-type condition on P + rho * sum_j H_j' Lambda_j H_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .model import PersidskiiSystem

FloatArray = NDArray[np.float64]

PSD_TOL_COEFF = 1e-8


class NoCertifiedBoundError(ValueError):
    """Raised when no certified class-K lower bound exists for the request."""


def psd_tol(matrix: FloatArray) -> float:
    """Relative positive-definiteness margin: 1e-8 * (1 + ||matrix||)."""
    return PSD_TOL_COEFF * (1.0 + float(np.linalg.norm(matrix, 2)))


@dataclass(frozen=True)
class LyapunovParams:
    """P (symmetric PSD), diagonal multipliers per block, Finsler scalar rho."""

    P: FloatArray
    Lambda: tuple[FloatArray, ...]  # diagonal entries, one vector per block
    rho: float = 0.0

    def __init__(self, P, Lambda=(), rho=0.0):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        if not np.allclose(P, P.T, atol=1e-12):
            raise ValueError("P must be symmetric within 1e-12")
        lams = tuple(np.asarray(l, dtype=float).ravel() for l in Lambda)
        for l in lams:
            if np.any(l < 0):
                raise ValueError("Lambda diagonal entries must be nonnegative")
        object.__setattr__(self, "P", (P + P.T) / 2.0)
        object.__setattr__(self, "Lambda", lams)
        object.__setattr__(self, "rho", float(rho))


@dataclass(frozen=True)
class ClassKBound:
    """A class-K(-infinity) comparison function tau -> value.

    ``kind`` is "quadratic", "quadratic-plus-integral" or "sampled";
    only the first two are certified and admissible in certificates.
    """

    kind: str
    lam: float
    integral: Callable[[float], float] | None = None
    certified: bool = True

    def __call__(self, tau) -> float:
        tau = abs(float(tau))
        val = self.lam * tau * tau
        if self.integral is not None:
            val += self.integral(tau)
        return val


def eval_V(
    params: LyapunovParams, sys: PersidskiiSystem, x: FloatArray
) -> float:
    """V(x) = x'Px + 2 sum_j sum_i Lambda_j^i * antiderivative(H_j^(i) x)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"x must have shape ({sys.n},), got {x.shape}")
    if len(params.Lambda) != sys.M:
        raise ValueError("Lambda block count does not match system")
    val = float(x @ params.P @ x)
    for lam, fam, h in zip(params.Lambda, sys.families, sys.H):
        val += 2.0 * float(lam @ fam.integrals(h @ x))
    return val


def grad_V(
    params: LyapunovParams, sys: PersidskiiSystem, x: FloatArray
) -> FloatArray:
    """Gradient of V: 2Px + 2 sum_j H_j' Lambda_j F_j(H_j x)."""
    x = np.asarray(x, dtype=float)
    g = 2.0 * params.P @ x
    for lam, fam, h in zip(params.Lambda, sys.families, sys.H):
        g = g + 2.0 * h.T @ (lam * fam.values(h @ x))
    return g


def alpha_upper(params: LyapunovParams, sys: PersidskiiSystem) -> ClassKBound:
    """Certified upper bound: lam_max(P) tau^2 plus the worst integral term.

    The integral term is 2 (sum_j k_j) * max_{j,i} Lambda_j^i *
    integral of f_j^i over [0, ||H_j^(i)|| tau].
    """
    lam_max = float(np.linalg.eigvalsh(params.P)[-1]) if params.P.size else 0.0
    total_width = sum(sys.widths)
    entries = []  # (multiplier, row norm, component)
    for lam, fam, h in zip(params.Lambda, sys.families, sys.H):
        row_norms = np.linalg.norm(h, axis=1)
        for i, comp in enumerate(fam.components):
            if lam[i] > 0:
                entries.append((float(lam[i]), float(row_norms[i]), comp))
    if not entries:
        return ClassKBound(kind="quadratic", lam=lam_max)

    def integral_term(tau: float) -> float:
        return 2.0 * total_width * max(
            m * float(c.antiderivative(r * tau)) for m, r, c in entries
        )

    return ClassKBound(
        kind="quadratic-plus-integral", lam=lam_max, integral=integral_term
    )


def alpha_lower(
    params: LyapunovParams,
    sys: PersidskiiSystem,
    strategy: str = "quadratic-certified",
    P2: FloatArray | None = None,
    samples: int = 256,
    seed: int = 0,
) -> ClassKBound:
    """Certified (or sampled) lower bound on V.

    * ``quadratic-certified``: lam_min(P) tau^2, sound because the integral
      terms are nonnegative; requires P positive definite beyond psd_tol.
    * ``output-quadratic``: lam_min(P2) s^2 as a bound on V in terms of
      s = ||Cx||; requires P = C'P2C + (PSD remainder) with P2 positive
      definite.  Used by the output-annulus pipeline.
    * ``sampled``: empirical minimum of V/||x||^2 over random directions,
      flagged non-certified and rejected by certificates.
    """
    if strategy == "quadratic-certified":
        lam_min = float(np.linalg.eigvalsh(params.P)[0])
        if lam_min <= psd_tol(params.P):
            raise NoCertifiedBoundError(
                "no certified lower bound: P is not positive definite "
                f"(lam_min = {lam_min:.3e})"
            )
        return ClassKBound(kind="quadratic", lam=lam_min)
    if strategy == "output-quadratic":
        if P2 is None:
            raise NoCertifiedBoundError(
                "output-quadratic lower bound needs the output weight P2"
            )
        P2 = np.atleast_2d(np.asarray(P2, dtype=float))
        lam_min = float(np.linalg.eigvalsh(P2)[0])
        if lam_min <= psd_tol(P2):
            raise NoCertifiedBoundError(
                "no certified lower bound: P2 is not positive definite "
                f"(lam_min = {lam_min:.3e})"
            )
        resid = params.P - sys.C.T @ P2 @ sys.C
        if float(np.linalg.eigvalsh((resid + resid.T) / 2.0)[0]) < -psd_tol(
            params.P
        ):
            raise NoCertifiedBoundError(
                "no certified lower bound: P - C'P2C is not PSD"
            )
        return ClassKBound(kind="quadratic", lam=lam_min)
    if strategy == "sampled":
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((samples, sys.n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        ratios = [eval_V(params, sys, d) for d in dirs]
        return ClassKBound(
            kind="sampled", lam=max(min(ratios), 0.0), certified=False
        )
    raise ValueError(f"unknown lower-bound strategy {strategy!r}")


def finsler_matrix(
    params: LyapunovParams, sys: PersidskiiSystem, mu: int
) -> FloatArray:
    """P + rho * sum over the first mu blocks of H_j' Lambda_j H_j."""
    m = params.P.copy()
    for j in range(mu):
        m = m + params.rho * sys.H[j].T @ (params.Lambda[j][:, None] * sys.H[j])
    return (m + m.T) / 2.0


def finsler_positive(
    params: LyapunovParams, sys: PersidskiiSystem, mu: int
) -> bool:
    """True iff lam_min(P + rho sum_{j<=mu} H_j' Lambda_j H_j) clears psd_tol."""
    m = finsler_matrix(params, sys, mu)
    return float(np.linalg.eigvalsh(m)[0]) > psd_tol(m)
