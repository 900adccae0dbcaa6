"""Coast-phase rocket dynamics, the RK4 apogee-prediction oracle, the
airbrake labeling rule, and closed-loop flight simulation.

1-DOF vertical dynamics with an exponential atmosphere. The rocket state is
y = [altitude, v_vertical]; lateral accelerations are synthetic zero-mean
Gaussian noise so the 5-feature telemetry interface is preserved without a
6-DOF model.
"""

import csv
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from numba import njit

from .integrator import OdeSystem, Rk4Config, integrate_until

Controller = Callable[["FlightState"], bool]


class NotAscendingError(ValueError):
    """Oracle operations require an ascending (v > 0) state."""


@dataclass(frozen=True)
class FlightState:
    t: float
    altitude: float
    v_vertical: float
    accel: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    airbrake_open: bool = False


@dataclass(frozen=True)
class RocketModel:
    """Physical parameters of the coast model plus the control target."""

    dry_mass: float = 20.0
    cd_clean: float = 0.45
    cd_airbrake_delta: float = 1.2
    ref_area: float = 0.0177
    airbrake_area: float = 0.02
    rho0: float = 1.225
    scale_height: float = 8500.0
    g: float = 9.81
    target_apogee: float = 3600.0
    deadband: float = 0.0
    lateral_accel_sigma: float = 0.5

    def __post_init__(self):
        if not (self.dry_mass > 0):
            raise ValueError("dry_mass must be > 0")
        if not (self.ref_area > 0):
            raise ValueError("ref_area must be > 0")
        if not (self.cd_clean > 0):
            raise ValueError("cd_clean must be > 0")
        if self.cd_airbrake_delta < 0:
            raise ValueError("cd_airbrake_delta must be >= 0")
        if not (self.scale_height > 0):
            raise ValueError("scale_height must be > 0")
        if self.deadband < 0:
            raise ValueError("deadband must be >= 0")
        if self.lateral_accel_sigma < 0:
            raise ValueError("lateral_accel_sigma must be >= 0")

    def effective_cda(self, airbrake_open: bool) -> float:
        cda = self.cd_clean * self.ref_area
        if airbrake_open:
            cda += self.cd_airbrake_delta * self.airbrake_area
        return cda


@dataclass(frozen=True)
class Trajectory:
    samples: List[FlightState]
    apogee: float
    apogee_time: float


def vertical_accel(model: RocketModel, altitude: float, v: float, airbrake_open: bool) -> float:
    """Net vertical acceleration; drag always opposes the velocity sign."""
    rho = model.rho0 * math.exp(-altitude / model.scale_height)
    cda = model.effective_cda(airbrake_open)
    return -model.g - rho * cda * v * abs(v) / (2.0 * model.dry_mass)


def coast_dynamics(model: RocketModel, airbrake_open: bool) -> OdeSystem:
    """2-D coast ODE, state y = [altitude, v_vertical]."""

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        alt = float(y[0])
        v = float(y[1])
        return np.array([v, vertical_accel(model, alt, v, airbrake_open)])

    return OdeSystem(dimension=2, rhs=rhs)


@njit(cache=True)
def _apogee_kernel(alt, v, h, g, rho0, scale_height, cda, mass, max_steps):
    """Scalar RK4 coast integration until v <= 0; mirrors the generic path's
    stage arithmetic exactly (k = h*f, combine (1,2,2,1)/6)."""
    peak = alt
    steps = 0
    while v > 0.0 and steps < max_steps:
        k1a = h * v
        k1v = h * (-g - rho0 * math.exp(-alt / scale_height) * cda * v * abs(v) / (2.0 * mass))
        a2 = alt + k1a / 2.0
        v2 = v + k1v / 2.0
        k2a = h * v2
        k2v = h * (-g - rho0 * math.exp(-a2 / scale_height) * cda * v2 * abs(v2) / (2.0 * mass))
        a3 = alt + k2a / 2.0
        v3 = v + k2v / 2.0
        k3a = h * v3
        k3v = h * (-g - rho0 * math.exp(-a3 / scale_height) * cda * v3 * abs(v3) / (2.0 * mass))
        a4 = alt + k3a
        v4 = v + k3v
        k4a = h * v4
        k4v = h * (-g - rho0 * math.exp(-a4 / scale_height) * cda * v4 * abs(v4) / (2.0 * mass))
        alt = alt + (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
        v = v + (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
        steps += 1
        if alt > peak:
            peak = alt
    return peak, steps, v


@njit(cache=True)
def _apogee_kernel_batch(alts, vs, h, g, rho0, scale_height, cda, mass, max_steps):
    out = np.empty(alts.size)
    for i in range(alts.size):
        peak, _, _ = _apogee_kernel(alts[i], vs[i], h, g, rho0, scale_height, cda, mass, max_steps)
        out[i] = peak
    return out


def predict_apogee(
    model: RocketModel,
    state: FlightState,
    h: float,
    assume_open: bool,
    max_steps: int = 1_000_000,
) -> float:
    """Peak altitude reached coasting from `state` with a fixed brake setting."""
    if not (state.v_vertical > 0):
        raise NotAscendingError("predict_apogee requires an ascending state (v > 0)")
    if not (h > 0):
        raise ValueError("step size h must be > 0")
    peak, steps, v_end = _apogee_kernel(
        state.altitude,
        state.v_vertical,
        h,
        model.g,
        model.rho0,
        model.scale_height,
        model.effective_cda(assume_open),
        model.dry_mass,
        max_steps,
    )
    if not (math.isfinite(peak) and math.isfinite(v_end)):
        raise RuntimeError("apogee integration diverged to a non-finite state")
    if v_end > 0.0:
        raise RuntimeError(f"apogee not reached within {max_steps} steps")
    return peak


def predict_apogee_counted(
    model: RocketModel, state: FlightState, h: float, assume_open: bool
) -> Tuple[float, int, int]:
    """predict_apogee via the generic integrator with an instrumented rhs.

    Returns (apogee, rk4_steps, rhs_evaluations); the eval counter advances
    once per stage, so rhs_evaluations == 4 * rk4_steps by construction.
    """
    if not (state.v_vertical > 0):
        raise NotAscendingError("predict_apogee requires an ascending state (v > 0)")
    base = coast_dynamics(model, assume_open)
    n_evals = 0

    def counting_rhs(t, y):
        nonlocal n_evals
        n_evals += 1
        return base.rhs(t, y)

    sys = OdeSystem(dimension=2, rhs=counting_rhs)
    traj = integrate_until(
        sys,
        state.t,
        np.array([state.altitude, state.v_vertical]),
        Rk4Config(h=h),
        stop=lambda t, y: y[1] <= 0.0,
    )
    apogee = max(float(y[0]) for _, y in traj)
    steps = len(traj) - 1
    return apogee, steps, n_evals


def predict_apogee_batch(
    model: RocketModel,
    altitudes: np.ndarray,
    velocities: np.ndarray,
    h: float,
    assume_open: bool,
) -> np.ndarray:
    """Vectorized predict_apogee over many independent ascending states."""
    alts = np.ascontiguousarray(altitudes, dtype=np.float64)
    vs = np.ascontiguousarray(velocities, dtype=np.float64)
    if np.any(vs <= 0):
        raise NotAscendingError("all states must be ascending (v > 0)")
    return _apogee_kernel_batch(
        alts, vs, h, model.g, model.rho0, model.scale_height,
        model.effective_cda(assume_open), model.dry_mass, 1_000_000,
    )


def oracle_label(model: RocketModel, state: FlightState, h: float) -> int:
    """1 (Open) iff the brakes-closed predicted apogee strictly exceeds
    target_apogee + deadband, else 0 (Closed)."""
    predicted = predict_apogee(model, state, h, assume_open=False)
    return int(predicted > model.target_apogee + model.deadband)


def always_closed_controller() -> Controller:
    return lambda state: False


def oracle_controller(model: RocketModel, h_predict: float) -> Controller:
    return lambda state: oracle_label(model, state, h_predict) == 1


def simulate_flight(
    model: RocketModel,
    initial: FlightState,
    h: float,
    controller: Controller,
    seed: Union[int, np.random.Generator] = 0,
) -> Trajectory:
    """Closed-loop coast: at every step the controller sets the brake state,
    then one RK4 step advances the rocket; stops at apogee (v <= 0).

    Brake transitions are instantaneous. ax/ay are drawn from the seeded
    generator; az is the net vertical acceleration under the commanded
    brake setting.
    """
    if not (initial.v_vertical > 0):
        raise NotAscendingError("simulate_flight requires an ascending initial state")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    alt = initial.altitude
    v = initial.v_vertical
    t0 = initial.t
    brake = initial.airbrake_open
    samples: List[FlightState] = []
    i = 0
    while v > 0.0:
        t = t0 + i * h
        ax = rng.normal(0.0, model.lateral_accel_sigma)
        ay = rng.normal(0.0, model.lateral_accel_sigma)
        # controller sees the last-computed (pre-decision) acceleration
        sensed = FlightState(t, alt, v, (ax, ay, vertical_accel(model, alt, v, brake)), brake)
        brake = bool(controller(sensed))
        az = vertical_accel(model, alt, v, brake)
        samples.append(FlightState(t, alt, v, (ax, ay, az), brake))
        y = rk4_step_state(model, alt, v, h, brake)
        alt, v = y
        if not (math.isfinite(alt) and math.isfinite(v)):
            raise RuntimeError(f"flight integration diverged at t={t}")
        i += 1
        if i > 10_000_000:
            raise RuntimeError("flight did not reach apogee within step budget")
    t = t0 + i * h
    ax = rng.normal(0.0, model.lateral_accel_sigma)
    ay = rng.normal(0.0, model.lateral_accel_sigma)
    samples.append(FlightState(t, alt, v, (ax, ay, vertical_accel(model, alt, v, brake)), brake))
    apogee_idx = max(range(len(samples)), key=lambda j: samples[j].altitude)
    return Trajectory(
        samples=samples,
        apogee=samples[apogee_idx].altitude,
        apogee_time=samples[apogee_idx].t,
    )


def rk4_step_state(
    model: RocketModel, alt: float, v: float, h: float, airbrake_open: bool
) -> Tuple[float, float]:
    """One RK4 step of the coast dynamics, scalar fast path (same arithmetic
    as the generic integrator on coast_dynamics)."""
    g = model.g
    rho0 = model.rho0
    sh = model.scale_height
    cda = model.effective_cda(airbrake_open)
    m = model.dry_mass
    k1a = h * v
    k1v = h * (-g - rho0 * math.exp(-alt / sh) * cda * v * abs(v) / (2.0 * m))
    a2 = alt + k1a / 2.0
    v2 = v + k1v / 2.0
    k2a = h * v2
    k2v = h * (-g - rho0 * math.exp(-a2 / sh) * cda * v2 * abs(v2) / (2.0 * m))
    a3 = alt + k2a / 2.0
    v3 = v + k2v / 2.0
    k3a = h * v3
    k3v = h * (-g - rho0 * math.exp(-a3 / sh) * cda * v3 * abs(v3) / (2.0 * m))
    a4 = alt + k3a
    v4 = v + k3v
    k4a = h * v4
    k4v = h * (-g - rho0 * math.exp(-a4 / sh) * cda * v4 * abs(v4) / (2.0 * m))
    return (
        alt + (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0,
        v + (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0,
    )


def generate_flight_batch(
    model: RocketModel,
    n_flights: int,
    alt0_range: Tuple[float, float],
    v0_range: Tuple[float, float],
    h: float,
    seed: int,
    controller_factory: Optional[Callable[[], Controller]] = None,
) -> List[Trajectory]:
    """Independent reproducible coast flights with uniformly drawn initial
    conditions; flight i uses sub-seed seed + i for its noise stream.

    Default controller is always-closed (pure coast); labels are assigned
    downstream by the oracle.
    """
    if n_flights < 1:
        raise ValueError("n_flights must be >= 1")
    for name, (lo, hi) in (("alt0_range", alt0_range), ("v0_range", v0_range)):
        if lo > hi:
            raise ValueError(f"{name} must satisfy lo <= hi")
    if controller_factory is None:
        controller_factory = always_closed_controller
    flights = []
    for i in range(n_flights):
        ic_rng = np.random.default_rng([seed + i, 0])
        alt0 = ic_rng.uniform(alt0_range[0], alt0_range[1])
        v0 = ic_rng.uniform(v0_range[0], v0_range[1])
        initial = FlightState(t=0.0, altitude=alt0, v_vertical=v0)
        flights.append(
            simulate_flight(model, initial, h, controller_factory(), seed=seed + i)
        )
    return flights


TRAJECTORY_CSV_HEADER = [
    "t_s", "altitude_m", "v_vertical_mps",
    "accel_x_mps2", "accel_y_mps2", "accel_z_mps2", "airbrake_open",
]


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """One row per step; floats written at full round-trip precision."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_CSV_HEADER)
        for s in trajectory.samples:
            writer.writerow([
                repr(s.t), repr(s.altitude), repr(s.v_vertical),
                repr(s.accel[0]), repr(s.accel[1]), repr(s.accel[2]),
                int(s.airbrake_open),
            ])
