"""Time integration of the network model and Lyapunov descent monitors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .equilibria import compute_dfe, compute_endemic
from .errors import NonpositiveState, NotConnected, UnstableStep
from .graph import LaplacianOperator, check_connected
from .model import PackedRHS, StateField, SvirsParams

METHODS = ("rk4_fixed", "rk4_adaptive")
TARGETS = ("dfe", "endemic", "none")


@dataclass(frozen=True)
class IntegratorConfig:
    """Time stepping and stopping controls (all times in days).

    ``negative_tol`` sets the clamping policy: entries in
    ``[-negative_tol*N, 0)`` are set to zero and counted, anything lower
    aborts the run.
    """

    dt: float = 0.01
    t_end: float = 500.0
    method: str = "rk4_fixed"
    adaptive_tol: float = 1e-6
    record_every: float = 0.5
    convergence_tol: float = 1e-6
    convergence_target: str = "none"
    negative_tol: float = 1e-9
    keep_snapshots: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.convergence_target not in TARGETS:
            raise ValueError(f"convergence_target must be one of {TARGETS}")
        if not (0 < self.dt <= self.record_every <= self.t_end):
            raise ValueError("need 0 < dt <= record_every <= t_end")
        for name in ("adaptive_tol", "convergence_tol", "negative_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        ratio = self.record_every / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("record_every must be an integer multiple of dt")


@dataclass
class Certificate:
    descent_ok: bool
    first_violation: Optional[tuple] = None
    undefined: int = 0
    first_defined: Optional[float] = None


@dataclass
class PeakStats:
    """Infection peaks seen at every time step (not just at snapshots)."""

    node_peak: np.ndarray
    node_value: float = 0.0
    node_index: int = -1
    node_time: float = 0.0
    total_value: float = 0.0
    total_time: float = 0.0


@dataclass
class Trajectory:
    times: list
    snapshots: list
    aggregates: np.ndarray
    final: StateField
    peaks: PeakStats
    lyapunov_series: Optional[list] = None
    certificate: Optional[Certificate] = None
    converged_at: Optional[float] = None
    clamp_count: int = 0
    max_total_drift: float = 0.0
    captured: dict = field(default_factory=dict)
    steps: int = 0


def lyapunov_dfe(params: SvirsParams, dfe, state: StateField) -> float:
    """Σ_x [(S-S0)²/(2S0) + (V-V0)²/(2V0) + I]."""
    S0, V0 = dfe[0], dfe[1]
    return float(np.sum((state.S - S0) ** 2 / (2 * S0) + (state.V - V0) ** 2 / (2 * V0) + state.I))


def _volterra(u, u_star):
    return u - u_star - u_star * np.log(u / u_star)


def lyapunov_endemic(params: SvirsParams, endemic, state: StateField) -> float:
    """Σ_x of the Volterra terms u - u* - u* ln(u/u*) for u = S, V, I."""
    S_star, V_star, I_star = endemic[0], endemic[1], endemic[2]
    for name, u in (("S", state.S), ("V", state.V), ("I", state.I)):
        if np.any(u <= 0):
            k = int(np.flatnonzero(u <= 0)[0])
            raise NonpositiveState(f"{name} is non-positive at node {k} (t={state.t:g})")
    return float(np.sum(_volterra(state.S, S_star) + _volterra(state.V, V_star)
                        + _volterra(state.I, I_star)))


def certify_descent(series: Sequence, rel_slack: float = 1e-9) -> Certificate:
    """Check L(t_{k+1}) <= L(t_k) + slack over consecutive defined values.

    ``series`` holds ``(t, value)`` pairs; NaN values mark snapshots where the
    monitor was undefined. They are counted in the certificate and the check
    runs over the remaining values.
    """
    defined = [(t, v) for t, v in series if not math.isnan(v)]
    undefined = len(series) - len(defined)
    if not defined:
        return Certificate(False, None, undefined, None)
    slack = rel_slack * max(1.0, abs(defined[0][1]))
    for (t0, v0), (t1, v1) in zip(defined, defined[1:]):
        if v1 > v0 + slack:
            return Certificate(False, (t1, v1 - v0), undefined, defined[0][0])
    return Certificate(True, None, undefined, defined[0][0])


def monitor_for(params: SvirsParams, kind: str = "auto"):
    """Pick a Lyapunov monitor: ``dfe``, ``endemic``, ``none`` or ``auto``.

    ``auto`` uses the disease-free monitor when R0 < 1 and the endemic one
    when R0 > 1 and η = 0, the two regimes with a descent guarantee.
    """
    if kind == "auto":
        endemic = compute_endemic(params)
        if endemic is None:
            kind = "dfe"
        elif params.eta == 0:
            kind = "endemic"
        else:
            return None, "none"
    if kind == "dfe":
        dfe = compute_dfe(params)
        return (lambda st: lyapunov_dfe(params, dfe, st)), "dfe"
    if kind == "endemic":
        endemic = compute_endemic(params)
        if endemic is None:
            raise ValueError("endemic monitor requested but R0 <= 1")
        return (lambda st: lyapunov_endemic(params, tuple(endemic), st)), "endemic"
    if kind == "none":
        return None, "none"
    raise ValueError(f"unknown monitor {kind!r}")


def _target_array(params, target, n):
    if target == "dfe":
        S0, V0 = compute_dfe(params)
        point = (S0, V0, 0.0, 0.0)
    elif target == "endemic":
        endemic = compute_endemic(params)
        if endemic is None:
            raise ValueError("convergence target 'endemic' but R0 <= 1")
        point = tuple(endemic)
    else:
        return None
    return np.repeat(np.asarray(point, dtype=np.float64)[:, None], n, axis=1)


class _Stepper:
    def __init__(self, rhs: PackedRHS, shape):
        self.rhs = rhs
        self.tmp = np.empty(shape)

    def rk4(self, X, h):
        """One classical RK4 step; returns a new array."""
        f, tmp = self.rhs, self.tmp
        k1 = f(X)
        np.multiply(k1, 0.5 * h, out=tmp)
        tmp += X
        k2 = f(tmp)
        np.multiply(k2, 0.5 * h, out=tmp)
        tmp += X
        k3 = f(tmp)
        np.multiply(k3, h, out=tmp)
        tmp += X
        k4 = f(tmp)
        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        k1 *= h / 6.0
        k1 += X
        return k1


def integrate(params: SvirsParams, L: LaplacianOperator, initial: StateField,
              cfg: IntegratorConfig = IntegratorConfig(),
              lyapunov: Optional[Callable[[StateField], float]] = None,
              capture_times: Sequence[float] = ()) -> Trajectory:
    """Advance the network model from ``initial`` with RK4.

    Snapshots are taken every ``cfg.record_every`` days. If a convergence
    target is set the run stops at the first snapshot whose max-node deviation
    from the target is below ``convergence_tol * N``. ``capture_times`` adds
    states at specific times (rounded to the step grid in fixed-step mode).
    """
    n = L.n
    N = params.N
    if initial.n != n:
        raise ValueError(f"initial state has {initial.n} nodes, graph has {n}")
    if not check_connected(L):
        raise NotConnected("simulation requires a connected graph")
    if not initial.is_admissible(N):
        raise ValueError("initial state must be non-negative with per-node total N")

    X = initial.as_array()
    t0 = initial.t
    rhs = PackedRHS(params, L)
    stepper = _Stepper(rhs, X.shape)
    target = _target_array(params, cfg.convergence_target, n)

    times, snapshots, aggs, lyap = [], [], [], []
    captured = {}
    pending = sorted(float(t) for t in capture_times)
    peaks = PeakStats(node_peak=X[2].copy())
    peaks.node_index = int(np.argmax(X[2]))
    peaks.node_value = float(X[2, peaks.node_index])
    peaks.node_time = t0
    peaks.total_value = float(X[2].sum())
    peaks.total_time = t0
    state_info = {"clamps": 0, "drift": 0.0}
    converged_at = None

    def record(X, t):
        nonlocal converged_at
        times.append(t)
        aggs.append(np.stack([X.sum(axis=1), X.max(axis=1), X.min(axis=1)], axis=1))
        state_info["drift"] = max(state_info["drift"], float(np.max(np.abs(X.sum(axis=0) - N))))
        st = StateField.from_array(X, t)
        if cfg.keep_snapshots or not snapshots:
            snapshots.append(st)
        if lyapunov is not None:
            try:
                lyap.append((t, lyapunov(st)))
            except NonpositiveState:
                lyap.append((t, math.nan))
        if target is not None and converged_at is None:
            if np.max(np.abs(X - target)) < cfg.convergence_tol * N:
                converged_at = t

    def after_step(X, t):
        lo = float(X.min())
        if not math.isfinite(float(X.sum())) or lo < -cfg.negative_tol * N:
            raise UnstableStep(
                f"state left the admissible region at t={t:g} (min entry {lo:g}); "
                f"try a smaller dt than {cfg.dt:g}")
        if lo < 0:
            neg = X < 0
            state_info["clamps"] += int(neg.sum())
            X[neg] = 0.0
        I = X[2]
        k = int(np.argmax(I))
        if I[k] > peaks.node_value:
            peaks.node_value, peaks.node_index, peaks.node_time = float(I[k]), k, t
        total = float(I.sum())
        if total > peaks.total_value:
            peaks.total_value, peaks.total_time = total, t
        np.maximum(peaks.node_peak, I, out=peaks.node_peak)
        while pending and pending[0] <= t + 1e-9 * max(1.0, t):
            captured[pending.pop(0)] = StateField.from_array(X, t)

    while pending and pending[0] <= t0:
        captured[pending.pop(0)] = StateField.from_array(X, t0)
    record(X, t0)
    steps = 0
    if converged_at is None:
        if cfg.method == "rk4_fixed":
            X, steps = _run_fixed(stepper, X, t0, cfg, record, after_step, lambda: converged_at)
        else:
            X, steps = _run_adaptive(stepper, X, t0, cfg, N, record, after_step,
                                     lambda: converged_at)

    if not cfg.keep_snapshots and snapshots[-1].t != times[-1]:
        snapshots.append(StateField.from_array(X, times[-1]))
    traj = Trajectory(
        times=times,
        snapshots=snapshots,
        aggregates=np.array(aggs),
        final=StateField.from_array(X, times[-1]),
        peaks=peaks,
        converged_at=converged_at,
        clamp_count=state_info["clamps"],
        max_total_drift=state_info["drift"],
        captured=captured,
        steps=steps,
    )
    if lyapunov is not None:
        traj.lyapunov_series = lyap
        traj.certificate = certify_descent(lyap)
    return traj


def _run_fixed(stepper, X, t0, cfg, record, after_step, converged):
    dt = cfg.dt
    n_steps = int(math.ceil(cfg.t_end / dt - 1e-9))
    per_record = int(round(cfg.record_every / dt))
    for k in range(1, n_steps + 1):
        t_prev = t0 + (k - 1) * dt
        h = min(dt, t0 + cfg.t_end - t_prev)
        X = stepper.rk4(X, h)
        t = t0 + cfg.t_end if k == n_steps else t0 + k * dt
        after_step(X, t)
        if k % per_record == 0 or k == n_steps:
            record(X, t)
            if converged() is not None:
                return X, k
    return X, n_steps


def _run_adaptive(stepper, X, t0, cfg, N, record, after_step, converged):
    """Step doubling: compare one step of h with two of h/2, keep the latter."""
    t = t0
    h = cfg.dt
    t_stop = t0 + cfg.t_end
    next_record = t0 + cfg.record_every
    steps = 0
    scale = cfg.adaptive_tol * N
    while t < t_stop - 1e-12 * t_stop:
        h = min(h, next_record - t, cfg.record_every)
        full = stepper.rk4(X, h)
        half = stepper.rk4(stepper.rk4(X, 0.5 * h), 0.5 * h)
        err = float(np.max(np.abs(half - full))) / 15.0 / scale
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue
        X = half
        t += h
        steps += 1
        after_step(X, t)
        if abs(t - next_record) <= 1e-9 * max(1.0, t):
            t = next_record
            record(X, t)
            if converged() is not None:
                break
            next_record = min(t + cfg.record_every, t_stop)
        h *= min(4.0, 0.9 * err ** -0.2) if err > 0 else 4.0
    return X, steps
