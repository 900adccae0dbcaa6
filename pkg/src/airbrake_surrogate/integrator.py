"""Fixed-step 4th-order Runge-Kutta integration for small ODE systems.

State vectors are 1-D float64 numpy arrays. Everything here is pure and
deterministic: same inputs, bit-identical outputs.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]


class IntegrationDivergedError(RuntimeError):
    """A stage derivative or state went non-finite."""

    def __init__(self, stage: int, t: float):
        self.stage = stage
        self.t = t
        super().__init__(f"non-finite value in RK4 stage k{stage} at t={t}")


class MaxStepsExceededError(RuntimeError):
    """Step budget ran out before the stop predicate held.

    Carries the partial trajectory computed so far.
    """

    def __init__(self, trajectory: List[Tuple[float, np.ndarray]]):
        self.trajectory = trajectory
        super().__init__(
            f"stop predicate not reached within {len(trajectory) - 1} steps"
        )


class IndeterminateOrderError(RuntimeError):
    """Global error is at machine-noise level; order cannot be measured."""


@dataclass(frozen=True)
class OdeSystem:
    dimension: int
    rhs: Rhs

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")


@dataclass(frozen=True)
class Rk4Config:
    h: float
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.h > 0):
            raise ValueError("step size h must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")


def _check_finite(k: np.ndarray, stage: int, t: float) -> None:
    if not np.all(np.isfinite(k)):
        raise IntegrationDivergedError(stage, t)


def rk4_step(sys: OdeSystem, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step: four stage evaluations, weights (1,2,2,1)/6."""
    if not (h > 0):
        raise ValueError("step size h must be > 0")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (sys.dimension,):
        raise ValueError(f"state length {y.shape} != system dimension {sys.dimension}")
    k1 = h * np.asarray(sys.rhs(t, y), dtype=np.float64)
    _check_finite(k1, 1, t)
    k2 = h * np.asarray(sys.rhs(t + h / 2.0, y + k1 / 2.0), dtype=np.float64)
    _check_finite(k2, 2, t)
    k3 = h * np.asarray(sys.rhs(t + h / 2.0, y + k2 / 2.0), dtype=np.float64)
    _check_finite(k3, 3, t)
    k4 = h * np.asarray(sys.rhs(t + h, y + k3), dtype=np.float64)
    _check_finite(k4, 4, t)
    return y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def integrate_until(
    sys: OdeSystem,
    t0: float,
    y0: np.ndarray,
    cfg: Rk4Config,
    stop: Callable[[float, np.ndarray], bool],
) -> List[Tuple[float, np.ndarray]]:
    """Apply rk4_step repeatedly until stop(t, y) first holds.

    Returns the full trajectory [(t0, y0), ...]; the last entry is the first
    state satisfying stop. Raises MaxStepsExceededError (carrying the partial
    trajectory) if the budget runs out first.
    """
    y = np.asarray(y0, dtype=np.float64)
    traj: List[Tuple[float, np.ndarray]] = [(t0, y.copy())]
    if stop(t0, y):
        return traj
    for i in range(1, cfg.max_steps + 1):
        t_prev = t0 + (i - 1) * cfg.h
        y = rk4_step(sys, t_prev, y, cfg.h)
        if not np.all(np.isfinite(y)):
            raise IntegrationDivergedError(4, t_prev)
        t = t0 + i * cfg.h
        traj.append((t, y.copy()))
        if stop(t, y):
            return traj
    raise MaxStepsExceededError(traj)


def empirical_order(
    sys: OdeSystem,
    y0: np.ndarray,
    t_end: float,
    h_coarse: float,
    exact: Callable[[float], np.ndarray],
) -> float:
    """Measured convergence order log2(err(h)/err(h/2)) at t_end.

    `exact` is the analytic reference solution of the test problem. For RK4
    on smooth problems the result is ~4. Raises IndeterminateOrderError when
    either global error sits below the 1e-13 machine-noise floor.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    n = int(round(t_end / h_coarse))
    if n < 1:
        raise ValueError("t_end must cover at least one coarse step")

    def _solve(h: float, steps: int) -> np.ndarray:
        y = y0.copy()
        for i in range(steps):
            y = rk4_step(sys, i * h, y, h)
        return y

    ref = np.asarray(exact(t_end), dtype=np.float64)
    err_coarse = float(np.max(np.abs(_solve(h_coarse, n) - ref)))
    err_fine = float(np.max(np.abs(_solve(h_coarse / 2.0, 2 * n) - ref)))
    if err_coarse < 1e-13 or err_fine < 1e-13:
        raise IndeterminateOrderError(
            f"global errors ({err_coarse:.3e}, {err_fine:.3e}) below noise floor"
        )
    return math.log2(err_coarse / err_fine)
