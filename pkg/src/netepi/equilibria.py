"""Spatially uniform equilibria and the basic reproduction number.

The endemic point is found by eliminating R = γI/(μ+η), solving the two
remaining linear balance equations for (S, V) at a trial I, and locating the
unique I in (0, N] where β(S + σV) = μ + γ. Clearing denominators in that
condition gives a quadratic a I² + b I + c = 0 whose coefficients are
reported alongside, as an independent check on the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceFailure, NoBracket, NotConnected, ParameterError
from .graph import LaplacianOperator, check_connected
from .model import StateField, SvirsParams, rhs_full

REPORT_FIELDS = (
    "S0", "V0", "R0_closed", "R0_spectral", "endemic_exists",
    "S_star", "V_star", "I_star", "R_star",
    "residual_dfe", "residual_endemic", "a", "b", "c",
)


def compute_dfe(params: SvirsParams):
    """Disease-free equilibrium (S0, V0); I and R vanish there."""
    m = params
    denom = m.mu + m.p + m.xi
    S0 = (m.xi + m.mu * (1 - m.r)) * m.N / denom
    V0 = (m.p + m.mu * m.r) * m.N / denom
    return S0, V0


def compute_r0_closed(params: SvirsParams) -> float:
    S0, V0 = compute_dfe(params)
    return params.beta * (S0 + params.sigma * V0) / (params.mu + params.gamma)


def power_iteration(matvec, n, tol=1e-11, max_iter=20000, seed=0):
    """Dominant eigenpair of a symmetric operator by power iteration.

    Stops once the residual ``||Mv - θv|| <= tol·|θ|``, which for a symmetric
    operator bounds the distance from θ to the spectrum by the same amount.
    """
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.5, 1.5, n)
    v /= np.linalg.norm(v)
    w = matvec(v)
    for k in range(1, max_iter + 1):
        theta = float(v @ w)
        if np.linalg.norm(w - theta * v) <= tol * abs(theta):
            return theta, v, k
        v = w / np.linalg.norm(w)
        w = matvec(v)
    raise ConvergenceFailure(f"power iteration did not converge in {max_iter} iterations")


def transition_matrix(params: SvirsParams, L: LaplacianOperator) -> sp.csc_matrix:
    """(μ+γ)·Id - εL, symmetric positive definite."""
    n = L.n
    return ((params.mu + params.gamma) * sp.identity(n, format="csc")
            - params.epsilon * L.matrix.tocsc()).tocsc()


def compute_r0_spectral(params: SvirsParams, L: LaplacianOperator, method="shift-invert",
                        tol=1e-11, max_iter=20000) -> float:
    """Spectral radius of the next-generation matrix 𝕋Σ⁻¹.

    𝕋 = β(S0 + σV0)·Id, so the radius is that coefficient times the largest
    eigenvalue of Σ⁻¹. ``method`` selects how that eigenvalue is found:
    ``"shift-invert"`` (Lanczos on Σ⁻¹ via ARPACK), ``"power"`` (plain power
    iteration with a sparse LU of Σ) or ``"dense"`` (full eigendecomposition).
    """
    if not check_connected(L):
        raise NotConnected("R0 on a disconnected graph: the Laplacian has a repeated zero eigenvalue")
    S0, V0 = compute_dfe(params)
    coef = params.beta * (S0 + params.sigma * V0)
    sigma_mat = transition_matrix(params, L)
    n = L.n
    if method == "dense" or n <= 2:
        lam_min = float(np.linalg.eigvalsh(sigma_mat.toarray())[0])
        return coef / lam_min
    if method == "shift-invert":
        vals = spla.eigsh(sigma_mat, k=1, sigma=0.0, which="LM", tol=0,
                          return_eigenvectors=False)
        return coef / float(vals[0])
    if method == "power":
        solve = spla.factorized(sigma_mat)
        theta, _, _ = power_iteration(solve, n, tol=tol, max_iter=max_iter)
        return coef * theta
    raise ValueError(f"unknown method {method!r}")


def quadratic_coefficients(params: SvirsParams):
    """Coefficients of a I² + b I + c whose positive root is the endemic I*.

    Obtained by clearing the denominator of β(S(I) + σV(I)) = μ + γ and
    dividing by β. ``c`` is written in factored form through R0.
    """
    m = params
    if m.beta == 0:
        return 0.0, math.nan, math.nan
    k = m.gamma * m.eta / (m.mu + m.eta)
    a = m.beta * m.sigma * m.mu * (m.mu + m.gamma + m.eta) / (m.mu + m.eta)
    b = ((m.mu + m.gamma) * (m.sigma * (m.mu + m.p) + (m.mu + m.xi))
         - m.mu * m.sigma * m.beta * m.N
         - (m.mu + m.xi + m.sigma * m.p) * k)
    c = m.mu * (m.mu + m.gamma) * (m.mu + m.xi + m.p) * (1 - compute_r0_closed(m)) / m.beta
    return a, b, c


def constant_term_expanded(params: SvirsParams) -> float:
    """The constant coefficient before factoring out (1 - R0)."""
    m = params
    return ((m.mu + m.gamma) / m.beta * ((m.mu + m.p) * (m.mu + m.xi) - m.xi * m.p)
            - m.mu * m.N * (m.xi + (1 - m.r) * m.mu)
            - m.sigma * m.mu * m.N * (m.p + m.r * m.mu))


def quadratic_roots(a, b, c):
    """Real roots (smaller, larger) computed without cancellation."""
    if a == 0:
        return (-c / b,) * 2
    disc = b * b - 4 * a * c
    if disc < 0:
        return math.nan, math.nan
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    r1, r2 = q / a, (c / q if q != 0 else -b / a)
    return min(r1, r2), max(r1, r2)


def susceptible_vaccinated_at(params: SvirsParams, I: float):
    """Solve the S and V balance equations for a fixed infected level I."""
    m = params
    removed = m.gamma * I / (m.mu + m.eta)
    a11 = m.mu + m.p + m.beta * I
    a12 = -m.xi
    a21 = -m.p
    a22 = m.mu + m.xi + m.beta * m.sigma * I
    f1 = m.mu * (1 - m.r) * m.N + m.eta * removed
    f2 = m.mu * m.r * m.N
    det = a11 * a22 - a12 * a21
    S = (f1 * a22 - a12 * f2) / det
    V = (a11 * f2 - a21 * f1) / det
    return S, V


def _bracketed_root(f, lo, hi, rel_width=1e-12, max_iter=200):
    """Bisection alternated with secant steps, keeping a sign-change bracket."""
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi):
        raise NoBracket(f"no sign change on [{lo:g}, {hi:g}]: f = ({flo:g}, {fhi:g})")
    for it in range(max_iter):
        if hi - lo <= rel_width * hi:
            break
        if it % 2:
            x = hi - fhi * (hi - lo) / (fhi - flo)
            if not lo < x < hi:
                x = 0.5 * (lo + hi)
        else:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx == 0:
            return x, it + 1
        if fx > 0:
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
    else:
        raise ConvergenceFailure(f"root bracket did not shrink below {rel_width:g} in {max_iter} steps")
    x = hi - fhi * (hi - lo) / (fhi - flo)
    if not lo <= x <= hi:
        x = 0.5 * (lo + hi)
    return x, it + 1


@dataclass
class EndemicPoint:
    """Endemic equilibrium with its quadratic cross-check.

    Unpacks as ``S, V, I, R = point``.
    """

    S: float
    V: float
    I: float
    R: float
    quadratic: tuple
    roots: tuple
    root_residual: float
    iterations: int

    def __iter__(self):
        return iter((self.S, self.V, self.I, self.R))


def compute_endemic(params: SvirsParams) -> Optional[EndemicPoint]:
    """Unique endemic equilibrium, or None when R0 <= 1."""
    m = params
    if compute_r0_closed(m) <= 1:
        return None
    if m.mu <= 0:
        raise ParameterError("the endemic solve needs mu > 0 (total population is pinned by births)")

    def f(I):
        S, V = susceptible_vaccinated_at(m, I)
        return m.beta * S + m.beta * m.sigma * V - (m.mu + m.gamma)

    I_star, iterations = _bracketed_root(f, 1e-12 * m.N, m.N)
    S_star, V_star = susceptible_vaccinated_at(m, I_star)
    R_star = m.gamma * I_star / (m.mu + m.eta)
    a, b, c = quadratic_coefficients(m)
    roots = quadratic_roots(a, b, c)
    return EndemicPoint(S_star, V_star, I_star, R_star, (a, b, c), roots,
                        abs(I_star - roots[1]), iterations)


def uniform_residual(params: SvirsParams, point, L: Optional[LaplacianOperator] = None) -> float:
    """Max-norm of the full right-hand side at a spatially uniform state."""
    S, V, I, R = point
    if L is None:
        L = LaplacianOperator(sp.csr_matrix((1, 1)))
    state = StateField.uniform(L.n, S, V, I, R)
    return float(np.max(np.abs(np.array(rhs_full(params, L, state)))))


@dataclass
class EquilibriumReport:
    dfe: tuple
    r0_closed: float
    r0_spectral: float
    endemic: Optional[tuple]
    endemic_exists: bool
    residual_dfe: float
    residual_endemic: Optional[float]
    quadratic: tuple
    roots: Optional[tuple] = field(default=None)

    def as_row(self) -> dict:
        S0, V0 = self.dfe[:2]
        star = self.endemic if self.endemic is not None else (None,) * 4
        a, b, c = self.quadratic
        values = (S0, V0, self.r0_closed, self.r0_spectral, self.endemic_exists,
                  *star, self.residual_dfe, self.residual_endemic, a, b, c)
        return dict(zip(REPORT_FIELDS, values))

    def to_text(self) -> str:
        return "".join(f"{k} = {format_value(v)}\n" for k, v in self.as_row().items())


def format_value(value) -> str:
    """Shortest round-trip text for floats, lower-case booleans, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def analyze(params: SvirsParams, L: Optional[LaplacianOperator] = None,
            spectral_method="shift-invert") -> EquilibriumReport:
    """Everything known about the uniform equilibria for one parameter set.

    The spectral R0 is only computed when a Laplacian is supplied; otherwise
    it is NaN.
    """
    S0, V0 = compute_dfe(params)
    r0 = compute_r0_closed(params)
    r0_spec = compute_r0_spectral(params, L, method=spectral_method) if L is not None else math.nan
    endemic = compute_endemic(params)
    res_dfe = uniform_residual(params, (S0, V0, 0.0, 0.0))
    if endemic is not None:
        point = tuple(endemic)
        res_end = uniform_residual(params, point)
        quad, roots = endemic.quadratic, endemic.roots
    else:
        point, res_end, roots = None, None, None
        quad = quadratic_coefficients(params)
    return EquilibriumReport((S0, V0, 0.0, 0.0), r0, r0_spec, point, endemic is not None,
                             res_dfe, res_end, quad, roots)
