"""Numerical flows of vector fields and their differentials.

The integrator is an adaptive embedded Runge-Kutta 5(4) pair
(Dormand-Prince) with a PI step controller.  Flow differentials solve the
variational equation dM/dt = Da(x(t)) M, M(0) = I, integrated jointly with
the state so endpoint and differential share the same step sequence.
Trajectories on embedded manifolds can be retracted back to the zero set of
the defining functions after every accepted step; the residual drift is
monitored and reported, never silently corrected beyond tolerance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .expr import ExprDomainError
from .vectorfield import VectorFieldSpec

__all__ = [
    "IntegratorConfig",
    "FlowWord",
    "FlowResult",
    "FlowError",
    "FlowBlowupError",
    "FlowDomainError",
    "RetractionError",
    "flow",
    "composed_flow",
    "retract",
    "write_trajectory_csv",
]


class FlowError(Exception):
    """Base class for flow failures."""


class FlowBlowupError(FlowError):
    """Step size underflow or non-finite state: the trajectory blew up."""


class FlowDomainError(FlowError):
    """The trajectory left the domain of the field's coefficients."""


class RetractionError(FlowError):
    """Gauss-Newton retraction failed to converge."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive step control and retraction settings."""

    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = math.inf
    retract: bool = False
    retract_tol: float = 1e-12
    drift_bound: float = 1e-9

    def __post_init__(self):
        for name in ("rtol", "atol", "max_step", "retract_tol", "drift_bound"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class FlowWord:
    """A composed flow: apply field ``steps[0][0]`` for time ``steps[0][1]``, then the next.

    Field indices are 1-based into the active frame, matching the notation
    X_{1,t_1}, X_{2,t_2}, ... used for composed flows.
    """

    steps: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "steps", tuple((int(i), float(t)) for i, t in self.steps)
        )

    @staticmethod
    def of(*steps: tuple[int, float]) -> "FlowWord":
        return FlowWord(tuple(steps))

    @staticmethod
    def empty() -> "FlowWord":
        return FlowWord(())

    def inverse(self) -> "FlowWord":
        return FlowWord(tuple((i, -t) for i, t in reversed(self.steps)))

    def validate(self, frame_size: int) -> None:
        for i, _ in self.steps:
            if not 1 <= i <= frame_size:
                raise ValueError(f"field index {i} outside frame of size {frame_size}")

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class FlowResult:
    """Endpoint, flow differential and sampled trajectory of one (composed) flow."""

    endpoint: np.ndarray
    differential: np.ndarray
    trajectory: list[tuple[float, np.ndarray]]
    drift: float = 0.0
    drifts: list[float] | None = None
    drift_exceeded: bool = False

    @property
    def condition(self) -> float:
        """Condition number of the differential (invertibility diagnostic)."""
        return float(np.linalg.cond(self.differential))


class _DefinedByEquations(Protocol):
    def rho_values(self, x: Sequence[float]) -> np.ndarray: ...

    def rho_jacobian(self, x: Sequence[float]) -> np.ndarray: ...


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_MAX_STEPS = 500_000
_DOMAIN_EXCS = (ExprDomainError, ZeroDivisionError, OverflowError, ValueError)


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, max_step):
    scale = atol + np.abs(y0) * rtol
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = rhs(t0 + h0 * direction, y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def _integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t_span: tuple[float, float],
    y0: np.ndarray,
    cfg: IntegratorConfig,
    post_step: Callable[[np.ndarray], np.ndarray] | None = None,
    on_sample: Callable[[float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Adaptive RK5(4) from t_span[0] to t_span[1]; returns the final state."""
    t0, t1 = t_span
    if t1 == t0:
        return y0.copy()
    direction = 1.0 if t1 > t0 else -1.0
    t = t0
    y = y0.astype(float).copy()

    def safe_rhs(tt, yy):
        try:
            f = rhs(tt, yy)
        except _DOMAIN_EXCS as exc:
            raise FlowDomainError(f"trajectory left the expression domain: {exc}") from exc
        if not np.all(np.isfinite(f)):
            raise FlowBlowupError("non-finite derivative encountered")
        return f

    f = safe_rhs(t, y)
    h = _initial_step(safe_rhs, t, y, f, direction, cfg.rtol, cfg.atol, cfg.max_step)
    h = min(h, abs(t1 - t0))
    err_prev = 1.0
    k = np.empty((7, y.shape[0]))
    for _ in range(_MAX_STEPS):
        if h < 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise FlowBlowupError(f"step size underflow at t = {t}")
        h = min(h, abs(t1 - t), cfg.max_step)
        dt = direction * h
        k[0] = f
        for i in range(1, 7):
            yi = y + dt * (_A[i] @ k[:i])
            k[i] = safe_rhs(t + _C[i] * dt, yi)
        y_new = y + dt * (_B5 @ k)
        err_vec = dt * (_ERR @ k)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t1 if abs(t1 - (t + dt)) < 1e-15 * max(abs(t1), 1.0) else t + dt
            y = y_new
            if post_step is not None:
                y = post_step(y)
            if on_sample is not None:
                on_sample(t, y)
            if not np.all(np.isfinite(y)):
                raise FlowBlowupError("non-finite state encountered")
            # PI controller (Gustafsson); err_prev only after an accepted step
            factor = 0.9 * err ** (-0.7 / 5) * err_prev ** (0.4 / 5) if err > 0 else 10.0
            err_prev = max(err, 1e-10)
            h *= min(10.0, max(0.2, factor))
            if t == t1 or abs(t1 - t) <= 1e-15 * max(abs(t1), 1.0):
                return y
            f = safe_rhs(t, y)
        else:
            h *= max(0.2, 0.9 * err ** (-0.2))
    raise FlowBlowupError("step budget exhausted")


def retract(
    manifold: _DefinedByEquations,
    x: Sequence[float],
    tol: float = 1e-12,
    max_iter: int = 25,
) -> np.ndarray:
    """Gauss-Newton projection of ``x`` onto the zero set of the defining functions.

    Each update is the minimal-norm Newton step dx = -J^T (J J^T)^{-1} rho(x),
    so the displacement is minimal to first order.  Raises
    :class:`RetractionError` outside the convergence basin.
    """
    y = np.asarray(x, dtype=float).copy()
    for _ in range(max_iter):
        r = manifold.rho_values(y)
        if float(np.max(np.abs(r), initial=0.0)) <= tol:
            return y
        jac = manifold.rho_jacobian(y)
        try:
            lam = np.linalg.solve(jac @ jac.T, r)
        except np.linalg.LinAlgError as exc:
            raise RetractionError(f"singular normal equations at {y}") from exc
        y = y - jac.T @ lam
        if not np.all(np.isfinite(y)):
            raise RetractionError("retraction diverged")
    raise RetractionError(
        f"no convergence to |rho| <= {tol} within {max_iter} iterations"
    )


def _drift_of(manifold: _DefinedByEquations | None, x: np.ndarray) -> float:
    if manifold is None:
        return 0.0
    return float(np.max(np.abs(manifold.rho_values(x)), initial=0.0))


def flow(
    X: VectorFieldSpec,
    x0: Sequence[float],
    t: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    manifold: _DefinedByEquations | None = None,
) -> FlowResult:
    """Flow ``x0`` along ``X`` for time ``t`` with the joint variational system.

    Returns the endpoint, the flow differential dX_t (solution of the
    variational equation), the sampled trajectory and the maximal
    defining-function drift when a manifold is supplied.
    """
    n = X.dim
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"initial point has shape {x0.shape}, expected ({n},)")
    if not math.isfinite(t):
        raise ValueError("flow time must be finite")
    d0 = _drift_of(manifold, x0)
    if t == 0.0:
        return FlowResult(
            endpoint=x0.copy(),
            differential=np.eye(n),
            trajectory=[(0.0, x0.copy())],
            drift=d0,
            drifts=[d0] if manifold is not None else None,
            drift_exceeded=d0 > cfg.drift_bound,
        )

    jet_fn = X._jet_fn

    def rhs(_t, y):
        vals, jac = jet_fn(y[:n])
        m = y[n:].reshape(n, n)
        out = np.empty(n + n * n)
        out[:n] = vals
        out[n:] = (np.array(jac) @ m).ravel()
        return out

    post = None
    if cfg.retract and manifold is not None:
        def post(y):
            y = y.copy()
            y[:n] = retract(manifold, y[:n], cfg.retract_tol)
            return y

    trajectory: list[tuple[float, np.ndarray]] = [(0.0, x0.copy())]
    drifts: list[float] | None = [d0] if manifold is not None else None

    def on_sample(tt, y):
        pt = y[:n].copy()
        trajectory.append((tt, pt))
        if drifts is not None:
            drifts.append(_drift_of(manifold, pt))

    y0 = np.concatenate((x0, np.eye(n).ravel()))
    y_end = _integrate(rhs, (0.0, t), y0, cfg, post_step=post, on_sample=on_sample)
    drift = max(drifts) if drifts else 0.0
    return FlowResult(
        endpoint=y_end[:n],
        differential=y_end[n:].reshape(n, n),
        trajectory=trajectory,
        drift=drift,
        drifts=drifts,
        drift_exceeded=drift > cfg.drift_bound,
    )


def composed_flow(
    frame: Sequence[VectorFieldSpec],
    word: FlowWord,
    x0: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
    manifold: _DefinedByEquations | None = None,
) -> FlowResult:
    """Apply the word's steps in order; differentials compose by the chain rule."""
    word.validate(len(frame))
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    total = FlowResult(
        endpoint=x0.copy(),
        differential=np.eye(n),
        trajectory=[(0.0, x0.copy())],
        drift=_drift_of(manifold, x0),
        drifts=[_drift_of(manifold, x0)] if manifold is not None else None,
    )
    t_offset = 0.0
    for idx, t in word.steps:
        leg = flow(frame[idx - 1], total.endpoint, t, cfg, manifold)
        total.endpoint = leg.endpoint
        total.differential = leg.differential @ total.differential
        total.trajectory.extend(
            (t_offset + abs(tt), pt) for tt, pt in leg.trajectory[1:]
        )
        if total.drifts is not None and leg.drifts is not None:
            total.drifts.extend(leg.drifts[1:])
        total.drift = max(total.drift, leg.drift)
        t_offset += abs(t)
    total.drift_exceeded = total.drift > cfg.drift_bound
    return total


def write_trajectory_csv(
    path: str,
    result: FlowResult,
    names: Sequence[str] | None = None,
) -> None:
    """Write the sampled trajectory as CSV with columns t, x1..xn, drift."""
    dim = result.endpoint.shape[0]
    cols = list(names) if names is not None else [f"x{i + 1}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *cols, "drift"])
        for i, (t, pt) in enumerate(result.trajectory):
            drift = result.drifts[i] if result.drifts is not None else 0.0
            writer.writerow(
                [repr(float(t)), *[repr(float(v)) for v in pt], repr(float(drift))]
            )
