"""Vehicle state, control inputs, kinematic transition model, and limits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    theta = math.fmod(theta, TWO_PI)
    if theta > math.pi:
        theta -= TWO_PI
    elif theta <= -math.pi:
        theta += TWO_PI
    return theta


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    v: float
    theta: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("velocity must be >= 0")
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class ControlInput:
    accel: float          # m/s^2
    curvature_cmd: float  # 1/m, path curvature tracked this step


@dataclass(frozen=True)
class VehicleParams:
    length: float = 4.5
    width: float = 2.0
    a_long_max: float = 8.0
    a_lat_max: float = 8.0
    v_max: float = 50.0
    kappa_max: float = 0.2

    def __post_init__(self):
        for name in ("length", "width", "a_long_max", "a_lat_max", "v_max", "kappa_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"VehicleParams.{name} must be positive")


def step(state: AgentState, u: ControlInput, dt: float) -> AgentState:
    """Kinematic update: clamp speed at 0, advance along an arc of the
    commanded curvature at the mean of old and new speed."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v_new = max(0.0, state.v + u.accel * dt)
    ds = 0.5 * (state.v + v_new) * dt
    kappa = u.curvature_cmd
    theta = state.theta
    if abs(kappa) < 1e-12 or ds < 1e-15:
        x = state.x + ds * math.cos(theta)
        y = state.y + ds * math.sin(theta)
    else:
        theta_end = theta + kappa * ds
        x = state.x + (math.sin(theta_end) - math.sin(theta)) / kappa
        y = state.y + (math.cos(theta) - math.cos(theta_end)) / kappa
    theta_new = normalize_angle(theta + state.v * kappa * dt)
    return AgentState(x, y, v_new, theta_new)


class Trajectory:
    """States at fixed dt plus the inputs connecting them (one fewer)."""

    def __init__(self, states, inputs, dt: float, validate: bool = False):
        states = list(states)
        inputs = list(inputs)
        if len(states) < 1:
            raise ValueError("Trajectory needs at least one state")
        if len(inputs) != len(states) - 1:
            raise ValueError("need exactly one input per transition")
        if validate:
            for i, (s, u) in enumerate(zip(states[:-1], inputs)):
                nxt = step(s, u, dt)
                err = math.hypot(nxt.x - states[i + 1].x, nxt.y - states[i + 1].y)
                err = max(err, abs(nxt.v - states[i + 1].v))
                if err > 1e-6:
                    raise ValueError(f"state {i + 1} inconsistent with transition model ({err:.2e})")
        self.states = states
        self.inputs = inputs
        self.dt = dt

    def __len__(self) -> int:
        return len(self.states)

    @property
    def duration(self) -> float:
        return (len(self.states) - 1) * self.dt

    @classmethod
    def rollout(cls, initial: AgentState, inputs, dt: float) -> "Trajectory":
        states = [initial]
        inputs = list(inputs)
        for u in inputs:
            states.append(step(states[-1], u, dt))
        return cls(states, inputs, dt)


class Violation(NamedTuple):
    index: int
    bound: str
    value: float


class FeasibilityResult(NamedTuple):
    ok: bool
    violation: Violation | None

    def __bool__(self) -> bool:
        return self.ok


def feasible(traj: Trajectory, params: VehicleParams) -> FeasibilityResult:
    """Check acceleration, lateral acceleration, speed, and curvature limits.

    Reports the first violating step. Limits use the state at the start of
    each step; a small slack absorbs float noise at the exact bound.
    """
    eps = 1e-9
    for i, (s, u) in enumerate(zip(traj.states[:-1], traj.inputs)):
        if abs(u.accel) > params.a_long_max + eps:
            return FeasibilityResult(False, Violation(i, "a_long_max", u.accel))
        if s.v > params.v_max + eps:
            return FeasibilityResult(False, Violation(i, "v_max", s.v))
        if abs(u.curvature_cmd) > params.kappa_max + eps:
            return FeasibilityResult(False, Violation(i, "kappa_max", u.curvature_cmd))
        a_lat = s.v * abs(s.v * u.curvature_cmd)
        if a_lat > params.a_lat_max + eps:
            return FeasibilityResult(False, Violation(i, "a_lat_max", a_lat))
    last = traj.states[-1]
    if last.v > params.v_max + eps:
        return FeasibilityResult(False, Violation(len(traj.states) - 1, "v_max", last.v))
    return FeasibilityResult(True, None)
