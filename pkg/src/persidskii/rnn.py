"""Continuous-time recurrent neural networks as Persidskii systems.

A CTRNN dchi/dt = A chi + W0 g(W1 chi + b0) + u with output y = C~ chi maps
onto the single-block Persidskii form; nonzero biases are absorbed through a
constant auxiliary state.  Sandwich coefficient generators for the standard
activations live with the builtin families.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .model import (
    NonlinearityFamily,
    PersidskiiSystem,
    SectorIntegralBounds,
    bipolar_sigmoid_family,
    relu_family,
    tanh_family,
)

FloatArray = NDArray[np.float64]

ACTIVATIONS = {
    "tanh": tanh_family,
    "bipolar_sigmoid": bipolar_sigmoid_family,
    "relu": relu_family,
}


@dataclass(frozen=True)
class Ctrnn:
    """Weights of one hidden-layer continuous-time recurrent network."""

    A: FloatArray
    W0: FloatArray
    W1: FloatArray
    Ctilde: FloatArray
    activation: str = "tanh"
    b0: FloatArray | None = None

    def __init__(self, A, W0, W1, Ctilde, activation="tanh", b0=None):
        A = np.asarray(A, dtype=float)
        W0 = np.asarray(W0, dtype=float)
        W1 = np.asarray(W1, dtype=float)
        Ctilde = np.atleast_2d(np.asarray(Ctilde, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        N = W0.shape[1]
        if W0.shape != (n, N) or W1.shape != (N, n):
            raise ValueError(
                f"weight shapes inconsistent: W0 {W0.shape}, W1 {W1.shape}"
            )
        if Ctilde.shape[1] != n:
            raise ValueError("Ctilde must have n columns")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if b0 is not None:
            b0 = np.asarray(b0, dtype=float).ravel()
            if b0.shape != (N,):
                raise ValueError("b0 must be an N-vector")
            if not np.any(b0):
                b0 = None
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "W0", W0)
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "Ctilde", Ctilde)
        object.__setattr__(self, "activation", activation)
        object.__setattr__(self, "b0", b0)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.W0.shape[1]

    @property
    def hidden_smaller_than_state(self) -> bool:
        return self.N < self.n


def ctrnn_to_persidskii(rnn: Ctrnn) -> PersidskiiSystem:
    """Bias-free network as the single-block system (M = 1).

    Substitutions: A0 <- A, A1 <- W0, H1 <- W1, the activation becomes the
    block family, C <- C~.  Networks with nonzero bias must go through
    ``augment_bias`` instead.
    """
    if rnn.b0 is not None:
        raise ValueError(
            "network has a nonzero bias; use augment_bias(rnn) instead"
        )
    family = ACTIVATIONS[rnn.activation](rnn.N)
    return PersidskiiSystem(
        A0=rnn.A, A=(rnn.W0,), H=(rnn.W1,), C=rnn.Ctilde, families=(family,)
    )


def augment_bias(rnn: Ctrnn) -> PersidskiiSystem:
    """Absorb the bias through constant auxiliary states (eta(0) = 1).

    The augmented state is xi = [chi; eta] with eta' = 0; the activation
    argument becomes W1 chi + diag(b0) eta, so eta = 1 reproduces the bias.
    The activation block is duplicated verbatim (its second copy multiplies
    a zero weight block and is inert).  Inputs embed as [u; 0]; the output
    matrix ignores eta.
    """
    if rnn.b0 is None:
        raise ValueError("network has no bias; use ctrnn_to_persidskii")
    n, N, p = rnn.n, rnn.N, rnn.Ctilde.shape[0]
    A_tilde = np.block(
        [[rnn.A, np.zeros((n, N))], [np.zeros((N, n)), np.zeros((N, N))]]
    )
    W0_tilde = np.block(
        [[rnn.W0, np.zeros((n, N))], [np.zeros((N, N)), np.zeros((N, N))]]
    )
    H_half = np.hstack([rnn.W1, np.diag(rnn.b0)])
    H_tilde = np.vstack([H_half, H_half])
    C_hat = np.hstack([rnn.Ctilde, np.zeros((p, N))])
    family = ACTIVATIONS[rnn.activation](2 * N)
    return PersidskiiSystem(
        A0=A_tilde, A=(W0_tilde,), H=(H_tilde,), C=C_hat, families=(family,)
    )


def embed_state(rnn: Ctrnn, chi0: FloatArray) -> FloatArray:
    """Initial augmented state [chi0; 1] for a bias-augmented network."""
    chi0 = np.asarray(chi0, dtype=float)
    return np.concatenate([chi0, np.ones(rnn.N)])


def embed_input(rnn: Ctrnn, u):
    """Wrap an n-dim input signal as the (n+N)-dim augmented input [u; 0]."""
    from .simulate import InputSignal

    pad = np.zeros(rnn.N)
    return InputSignal(
        kind=f"augmented-{u.kind}",
        dim=rnn.n + rnn.N,
        bound=u.bound,
        fn=lambda t: np.concatenate([u.fn(t), pad]),
        description=u.description,
    )


def tanh_bounds(lam: FloatArray) -> SectorIntegralBounds:
    """Sandwich coefficients for a tanh block at diagonal multiplier lam.

    All kappas vanish and eta0 equals the multiplier, from
    0 <= 2 L log cosh(nu) <= L nu^2 componentwise.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 1:
        lam = np.diag(lam)
    if np.any(np.diag(lam) < 0):
        raise ValueError("multiplier must be nonnegative")
    k = lam.shape[0]
    return tanh_family(k).bounds(lam, 0)


def bipolar_sigmoid_bounds(lam: FloatArray) -> SectorIntegralBounds:
    """Sandwich coefficients for a bipolar-sigmoid block (eta0 = lam / 2)."""
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 1:
        lam = np.diag(lam)
    if np.any(np.diag(lam) < 0):
        raise ValueError("multiplier must be nonnegative")
    return bipolar_sigmoid_family(lam.shape[0]).bounds(lam, 0)


# ---------------------------------------------------------------------------
# checkpoint import
# ---------------------------------------------------------------------------

def ctrnn_from_dict(d: dict) -> Ctrnn:
    return Ctrnn(
        A=d["A"],
        W0=d["W0"],
        W1=d["W1"],
        Ctilde=d["C"],
        activation=d.get("activation", "tanh"),
        b0=d.get("b0"),
    )


def ctrnn_to_dict(rnn: Ctrnn) -> dict:
    out = {
        "A": rnn.A.tolist(),
        "W0": rnn.W0.tolist(),
        "W1": rnn.W1.tolist(),
        "C": rnn.Ctilde.tolist(),
        "activation": rnn.activation,
    }
    if rnn.b0 is not None:
        out["b0"] = rnn.b0.tolist()
    return out


def load_checkpoint(path: str | Path) -> Ctrnn:
    """Read a weight checkpoint: JSON (one object) or CSV (one matrix per
    section header line '# name')."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path) as fh:
            return ctrnn_from_dict(json.load(fh))
    if path.suffix.lower() == ".csv":
        sections: dict[str, list[list[float]]] = {}
        current: str | None = None
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                if row[0].startswith("#"):
                    current = row[0].lstrip("# ").strip()
                    sections[current] = []
                    continue
                if current is None:
                    raise ValueError("CSV checkpoint must start with a '# name' row")
                sections[current].append([float(v) for v in row])
        d: dict = dict(sections)
        d.setdefault("activation", "tanh")  # CSV carries matrices only
        return ctrnn_from_dict(d)
    raise ValueError(f"unsupported checkpoint format {path.suffix!r}")
