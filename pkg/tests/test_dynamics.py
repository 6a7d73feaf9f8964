"""Transition model, trajectories, and feasibility limits."""

import math

import pytest

from drivesim.dynamics import (AgentState, ControlInput, Trajectory,
                               VehicleParams, feasible, normalize_angle, step)

DT = 0.1


def test_normalize_angle():
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(0.3) == pytest.approx(0.3)


def test_straight_step():
    s = step(AgentState(0, 0, 10, 0), ControlInput(2.0, 0.0), DT)
    assert s.v == pytest.approx(10.2)
    assert s.x == pytest.approx(1.01)  # mean-speed advance
    assert s.y == 0.0


def test_speed_clamps_at_zero():
    s = step(AgentState(0, 0, 0.5, 0), ControlInput(-8.0, 0.0), DT)
    assert s.v == 0.0


def test_arc_step_turns():
    s0 = AgentState(0, 0, 10, 0)
    s1 = step(s0, ControlInput(0.0, 0.1), DT)
    assert s1.theta == pytest.approx(0.1)  # v * kappa * dt
    assert s1.y > 0.0


def test_negative_velocity_rejected():
    with pytest.raises(ValueError):
        AgentState(0, 0, -1.0, 0)


def test_rollout_consistency():
    inputs = [ControlInput(1.0, 0.02)] * 20
    traj = Trajectory.rollout(AgentState(0, 0, 5, 0), inputs, DT)
    assert len(traj) == 21
    assert traj.duration == pytest.approx(2.0)
    # validate mode accepts what rollout produced
    Trajectory(traj.states, traj.inputs, DT, validate=True)


def test_validate_rejects_inconsistent_states():
    s0 = AgentState(0, 0, 5, 0)
    bad = AgentState(99.0, 0, 5, 0)
    with pytest.raises(ValueError):
        Trajectory([s0, bad], [ControlInput(0.0, 0.0)], DT, validate=True)


def test_feasible_limits():
    params = VehicleParams()
    ok = Trajectory.rollout(AgentState(0, 0, 10, 0), [ControlInput(2.0, 0.05)] * 5, DT)
    assert feasible(ok, params)

    hard_brake = Trajectory.rollout(AgentState(0, 0, 10, 0),
                                    [ControlInput(-9.0, 0.0)], DT)
    res = feasible(hard_brake, params)
    assert not res
    assert res.violation.bound == "a_long_max"

    tight_turn = Trajectory.rollout(AgentState(0, 0, 10, 0),
                                    [ControlInput(0.0, 0.25)], DT)
    assert feasible(tight_turn, params).violation.bound == "kappa_max"

    fast_turn = Trajectory.rollout(AgentState(0, 0, 30, 0),
                                   [ControlInput(0.0, 0.05)], DT)
    # lateral accel 30^2 * 0.05 = 45 > 8
    assert feasible(fast_turn, params).violation.bound == "a_lat_max"
