"""SVIRS parameters, state fields and the right-hand side of the network model.

Per node x the dynamics are

    dS/dt = εΔS + μ(1-r)N - (μ+p)S - βSI + ξV + ηR
    dV/dt = εΔV + μrN + pS - βσVI - (μ+ξ)V
    dI/dt = εΔI + βSI + βσVI - (μ+γ)I
    dR/dt = εΔR + γI - (μ+η)R

``sigma`` multiplies the force of infection acting on vaccinated people:
sigma = 0 is a perfectly protective vaccine, sigma = 1 gives no protection.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, ParameterError
from .graph import LaplacianOperator, apply_laplacian

COMPARTMENTS = ("S", "V", "I", "R")

PARAM_NAMES = ("N", "r", "mu", "p", "beta", "xi", "eta", "sigma", "gamma", "epsilon")


@dataclass(frozen=True)
class SvirsParams:
    """The ten model parameters; rates are per day.

    Ranges: N > 0, 0 < r < 1, 0 <= p <= 1, 0 <= sigma <= 1,
    0 < epsilon <= 1, every other rate non-negative. Additionally
    mu + gamma > 0 and mu + p + xi > 0.
    """

    N: float
    r: float
    mu: float
    p: float
    beta: float
    xi: float
    eta: float
    sigma: float
    gamma: float
    epsilon: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ParameterError(f"{name} must be a real number, got {value!r}") from None
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

        def bad(name, rule):
            raise ParameterError(f"{name}={getattr(self, name)!r} violates {rule}")

        if not self.N > 0:
            bad("N", "N > 0")
        if not 0 < self.r < 1:
            bad("r", "0 < r < 1")
        if not 0 <= self.p <= 1:
            bad("p", "0 <= p <= 1")
        if not 0 <= self.sigma <= 1:
            bad("sigma", "0 <= sigma <= 1")
        if not 0 < self.epsilon <= 1:
            bad("epsilon", "0 < epsilon <= 1")
        for name in ("mu", "beta", "xi", "eta", "gamma"):
            if getattr(self, name) < 0:
                bad(name, f"{name} >= 0")
        if not self.mu + self.gamma > 0:
            raise ParameterError("mu + gamma must be positive")
        if not self.mu + self.p + self.xi > 0:
            raise ParameterError("mu + p + xi must be positive")

    def replace(self, **changes) -> "SvirsParams":
        return dataclasses.replace(self, **changes)

    @property
    def beta_over_N(self) -> float:
        return self.beta * self.N

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}


@dataclass
class StateField:
    """Per-node compartment values at time ``t`` (days)."""

    S: np.ndarray
    V: np.ndarray
    I: np.ndarray
    R: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, c), dtype=np.float64) for c in COMPARTMENTS]
        n = arrays[0].shape
        if len(n) != 1 or any(a.shape != n for a in arrays):
            raise DimensionMismatch("S, V, I, R must be 1-D arrays of equal length")
        for c, a in zip(COMPARTMENTS, arrays):
            setattr(self, c, a)
        self.t = float(self.t)

    @property
    def n(self) -> int:
        return self.S.size

    @classmethod
    def uniform(cls, n, S, V, I, R, t=0.0) -> "StateField":
        return cls(np.full(n, float(S)), np.full(n, float(V)),
                   np.full(n, float(I)), np.full(n, float(R)), t)

    @classmethod
    def from_array(cls, X, t=0.0) -> "StateField":
        X = np.asarray(X, dtype=np.float64)
        return cls(X[0].copy(), X[1].copy(), X[2].copy(), X[3].copy(), t)

    def as_array(self) -> np.ndarray:
        """Stack into a C-contiguous ``(4, n)`` array."""
        return np.stack([self.S, self.V, self.I, self.R])

    def totals(self) -> np.ndarray:
        return self.S + self.V + self.I + self.R

    def is_admissible(self, N: float, rtol: float = 1e-9) -> bool:
        X = self.as_array()
        if not np.all(np.isfinite(X)) or np.any(X < 0):
            return False
        return bool(np.max(np.abs(self.totals() - N)) <= rtol * N)


class Derivative(NamedTuple):
    dS: np.ndarray
    dV: np.ndarray
    dI: np.ndarray
    dR: np.ndarray


def _check_dims(L: LaplacianOperator, *vectors):
    for vec in vectors:
        if vec.shape != (L.n,):
            raise DimensionMismatch(f"state has {vec.shape[0]} nodes, Laplacian has {L.n}")


def rhs_full(params: SvirsParams, L: LaplacianOperator, state: StateField) -> Derivative:
    """Time derivative of all four compartments at every node."""
    S, V, I, R = state.S, state.V, state.I, state.R
    _check_dims(L, S, V, I, R)
    m = params
    eps = m.epsilon
    si = m.beta * S * I
    vi = m.beta * m.sigma * V * I
    dS = (eps * apply_laplacian(L, S) + m.mu * (1 - m.r) * m.N - (m.mu + m.p) * S
          - si + m.xi * V + m.eta * R)
    dV = eps * apply_laplacian(L, V) + m.mu * m.r * m.N + m.p * S - vi - (m.mu + m.xi) * V
    dI = eps * apply_laplacian(L, I) + si + vi - (m.mu + m.gamma) * I
    dR = eps * apply_laplacian(L, R) + m.gamma * I - (m.mu + m.eta) * R
    return Derivative(dS, dV, dI, dR)


def rhs_reduced(params: SvirsParams, L: LaplacianOperator, S, V, I):
    """Three-compartment form with R eliminated through R = N - S - V - I."""
    S = np.asarray(S, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    I = np.asarray(I, dtype=np.float64)
    _check_dims(L, S, V, I)
    m = params
    eps = m.epsilon
    si = m.beta * S * I
    vi = m.beta * m.sigma * V * I
    dS = (eps * apply_laplacian(L, S) + m.mu * (1 - m.r) * m.N - (m.mu + m.p) * S
          - si + m.xi * V + m.eta * (m.N - S - V - I))
    dV = eps * apply_laplacian(L, V) + m.mu * m.r * m.N + m.p * S - vi - (m.mu + m.xi) * V
    dI = eps * apply_laplacian(L, I) + si + vi - (m.mu + m.gamma) * I
    return dS, dV, dI


class PackedRHS:
    """Right-hand side on a packed ``(4, n)`` state, for the time stepper.

    Diffusion of all four compartments is a single sparse product with
    ``ε·blockdiag(L, L, L, L)``; the reaction terms are accumulated in place
    into that product, so a call allocates only its output.
    """

    def __init__(self, params: SvirsParams, L: LaplacianOperator):
        self.params = params
        self.n = L.n
        block = sp.kron(sp.identity(4, format="csr"), L.matrix, format="csr")
        self._diffusion = (params.epsilon * block).tocsr()
        self._diffusion.sort_indices()
        self._a = np.empty(self.n)
        self._b = np.empty(self.n)
        m = params
        self._c = dict(
            birth_s=m.mu * (1 - m.r) * m.N,
            birth_v=m.mu * m.r * m.N,
            out_s=m.mu + m.p,
            out_v=m.mu + m.xi,
            out_i=m.mu + m.gamma,
            out_r=m.mu + m.eta,
            beta=m.beta,
            beta_sigma=m.beta * m.sigma,
        )

    def __call__(self, X: np.ndarray) -> np.ndarray:
        m, c = self.params, self._c
        a, b = self._a, self._b
        S, V, I, R = X
        out = (self._diffusion @ X.reshape(-1)).reshape(4, self.n)
        dS, dV, dI, dR = out

        np.multiply(S, I, out=a)
        a *= c["beta"]                      # βSI
        np.multiply(V, I, out=b)
        b *= c["beta_sigma"]                # βσVI

        dS += c["birth_s"]
        dS -= a
        dI += a
        dI += b
        dV -= b
        dV += c["birth_v"]

        np.multiply(S, c["out_s"], out=a)
        dS -= a
        np.multiply(S, m.p, out=a)
        dV += a
        np.multiply(V, m.xi, out=a)
        dS += a
        np.multiply(V, c["out_v"], out=a)
        dV -= a
        np.multiply(R, m.eta, out=a)
        dS += a
        np.multiply(I, c["out_i"], out=a)
        dI -= a
        np.multiply(I, m.gamma, out=a)
        dR += a
        np.multiply(R, c["out_r"], out=a)
        dR -= a
        return out
