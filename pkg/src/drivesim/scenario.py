"""Scenario data model, native JSON file format, and agent substitution."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .dynamics import AgentState, Trajectory, ControlInput, VehicleParams, normalize_angle
from .geometry import CurvilinearFrame, OrientedBox, Point2, Polygon, Polyline, occupancy


class ScenarioError(ValueError):
    """Parse or validation failure; the message names the violated invariant."""


@dataclass(frozen=True)
class Adjacency:
    lanelet_id: str
    same_direction: bool


class Lanelet:
    def __init__(self, lanelet_id, left_bound: Polyline, right_bound: Polyline,
                 successors=(), adjacent_left: Adjacency | None = None,
                 adjacent_right: Adjacency | None = None):
        if len(left_bound.points) != len(right_bound.points):
            raise ScenarioError(
                f"lanelet {lanelet_id}: left and right bounds must have equal point counts"
            )
        self.id = str(lanelet_id)
        self.left_bound = left_bound
        self.right_bound = right_bound
        self.centerline = Polyline(0.5 * (left_bound.points + right_bound.points))
        self.successors = tuple(str(s) for s in successors)
        self.adjacent_left = adjacent_left
        self.adjacent_right = adjacent_right
        ring = np.vstack([left_bound.points, right_bound.points[::-1]])
        self.polygon = Polygon(ring)

    def start_tangent_angle(self) -> float:
        d = self.centerline.points[1] - self.centerline.points[0]
        return math.atan2(d[1], d[0])


class StreetNetwork:
    def __init__(self, lanelets):
        self.lanelets: dict[str, Lanelet] = {l.id: l for l in lanelets}
        if len(self.lanelets) != len(list(lanelets)):
            raise ScenarioError("duplicate lanelet ids")
        for lane in self.lanelets.values():
            for ref in lane.successors:
                if ref not in self.lanelets:
                    raise ScenarioError(
                        f"lanelet {lane.id}: dangling successor id {ref!r}"
                    )
            for adj in (lane.adjacent_left, lane.adjacent_right):
                if adj is not None and adj.lanelet_id not in self.lanelets:
                    raise ScenarioError(
                        f"lanelet {lane.id}: dangling adjacency id {adj.lanelet_id!r}"
                    )
        self._region = [l.polygon for l in self.lanelets.values()]
        self._conflict_cache = None

    @property
    def region(self):
        """Lanelet polygons forming the drivable union."""
        return self._region

    def nearest_lanelet(self, point) -> tuple[str, float]:
        """Lanelet whose centerline is closest to point; returns (id, distance).

        Ties are broken by lanelet id for determinism.
        """
        p = np.asarray(point, dtype=float)
        best_id, best_d = None, math.inf
        for lid in sorted(self.lanelets):
            lane = self.lanelets[lid]
            frame = _centerline_frame(lane)
            s, _, _ = frame.project(p)
            foot = frame.to_cartesian(min(max(s, 0.0), frame.length), 0.0)
            dist = float(np.hypot(*(p - foot)))
            if dist < best_d - 1e-12:
                best_id, best_d = lid, dist
        return best_id, best_d

    def containing_lanelets(self, point) -> list[str]:
        p = np.asarray(point, dtype=float)
        out = []
        for lid in sorted(self.lanelets):
            if bool(self.lanelets[lid].polygon.contains_points(p[None, :])[0]):
                out.append(lid)
        return out

    def conflict_areas(self, grid_resolution: float = 0.25, min_area: float = 0.5):
        """Overlap polygons of non-adjacent lanelet pairs (grid-sampled hull).

        Adjacent same-direction lanelets never form conflict areas; overlaps
        below min_area (shared borders) are discarded.
        """
        if self._conflict_cache is not None:
            return self._conflict_cache
        out = []
        ids = sorted(self.lanelets)
        for i, a_id in enumerate(ids):
            a = self.lanelets[a_id]
            for b_id in ids[i + 1:]:
                b = self.lanelets[b_id]
                if _same_direction_adjacent(a, b):
                    continue
                poly = _grid_overlap(a.polygon, b.polygon, grid_resolution)
                if poly is not None and poly.area >= min_area:
                    out.append(((a_id, b_id), poly))
        self._conflict_cache = out
        return out


def _same_direction_adjacent(a: Lanelet, b: Lanelet) -> bool:
    """True for lanelet pairs along the same corridor: laterally adjacent in
    the same direction, or directly consecutive — neither forms a conflict."""
    for adj in (a.adjacent_left, a.adjacent_right):
        if adj is not None and adj.lanelet_id == b.id and adj.same_direction:
            return True
    for adj in (b.adjacent_left, b.adjacent_right):
        if adj is not None and adj.lanelet_id == a.id and adj.same_direction:
            return True
    if b.id in a.successors or a.id in b.successors:
        return True
    return False


def _grid_overlap(pa: Polygon, pb: Polygon, res: float) -> Polygon | None:
    ax0, ay0, ax1, ay1 = pa.bounds()
    bx0, by0, bx1, by1 = pb.bounds()
    x0, y0 = max(ax0, bx0), max(ay0, by0)
    x1, y1 = min(ax1, bx1), min(ay1, by1)
    if x1 <= x0 or y1 <= y0:
        return None
    xs = np.arange(x0, x1 + res, res)
    ys = np.arange(y0, y1 + res, res)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    # strict interior of both: zero boundary tolerance avoids shared borders
    mask = pa.contains_points(pts, boundary_tol=0.0) & pb.contains_points(pts, boundary_tol=0.0)
    pts = pts[mask]
    if len(pts) < 3:
        return None
    try:
        hull = ConvexHull(pts)
    except Exception:
        return None
    return Polygon(pts[hull.vertices])


_frame_cache: dict[int, CurvilinearFrame] = {}


def _centerline_frame(lane: Lanelet) -> CurvilinearFrame:
    key = id(lane)
    frame = _frame_cache.get(key)
    if frame is None:
        frame = CurvilinearFrame(lane.centerline)
        _frame_cache[key] = frame
    return frame


@dataclass(frozen=True)
class StaticObstacle:
    id: str
    length: float
    width: float
    pose: AgentState  # v is 0 by construction

    def box(self) -> OrientedBox:
        return occupancy(self.pose, self.length, self.width)


class DynamicObstacle:
    def __init__(self, obstacle_id, length, width, recorded_trajectory, params: VehicleParams | None = None):
        if length <= 0 or width <= 0:
            raise ScenarioError(f"obstacle {obstacle_id}: shape must be positive")
        states = list(recorded_trajectory)
        if not states:
            raise ScenarioError(f"obstacle {obstacle_id}: trajectory must be non-empty")
        self.id = str(obstacle_id)
        self.length = float(length)
        self.width = float(width)
        self.recorded_states = states
        self.params = params

    def state_at(self, index: int) -> AgentState:
        """Recorded state, holding the final pose at rest once exhausted."""
        if index < len(self.recorded_states):
            return self.recorded_states[index]
        last = self.recorded_states[-1]
        return AgentState(last.x, last.y, 0.0, last.theta)

    @property
    def duration_steps(self) -> int:
        return len(self.recorded_states) - 1


@dataclass(frozen=True)
class GoalRegion:
    area: Polygon
    t_max: float
    velocity_interval: tuple[float, float] | None = None
    orientation_interval: tuple[float, float] | None = None

    def __post_init__(self):
        if self.t_max <= 0:
            raise ScenarioError("goal t_max must be > 0")
        for iv in (self.velocity_interval, self.orientation_interval):
            if iv is not None and iv[1] < iv[0]:
                raise ScenarioError("goal interval must be non-empty")


class GoalCheck(enum.Enum):
    REACHED_IN_TIME = "reached_in_time"
    REACHED_LATE = "reached_late"
    NOT_REACHED = "not_reached"


def goal_satisfied(goal: GoalRegion, state: AgentState, t: float) -> GoalCheck:
    """Goal test: position in the area and optional intervals, deadline inclusive."""
    inside = bool(goal.area.contains_points(np.array([[state.x, state.y]]))[0])
    if not inside:
        return GoalCheck.NOT_REACHED
    if goal.velocity_interval is not None:
        lo, hi = goal.velocity_interval
        if not (lo <= state.v <= hi):
            return GoalCheck.NOT_REACHED
    if goal.orientation_interval is not None:
        lo, hi = goal.orientation_interval
        th = state.theta
        # compare on the wrapped circle
        if not (lo - 1e-12 <= th <= hi + 1e-12 or lo - 1e-12 <= th + 2 * math.pi <= hi + 1e-12):
            return GoalCheck.NOT_REACHED
    if t <= goal.t_max + 1e-12:
        return GoalCheck.REACHED_IN_TIME
    return GoalCheck.REACHED_LATE


@dataclass(frozen=True)
class PlanningProblem:
    agent_id: str
    initial_state: AgentState
    goal: GoalRegion
    params: VehicleParams = field(default_factory=VehicleParams)


class Scenario:
    def __init__(self, network: StreetNetwork, static_obstacles, dynamic_obstacles,
                 planning_problems, dt: float):
        if dt <= 0:
            raise ScenarioError("dt must be > 0")
        self.network = network
        self.static_obstacles = list(static_obstacles)
        self.dynamic_obstacles = list(dynamic_obstacles)
        self.planning_problems = list(planning_problems)
        self.dt = float(dt)
        ids = ([o.id for o in self.static_obstacles]
               + [o.id for o in self.dynamic_obstacles]
               + [p.agent_id for p in self.planning_problems])
        if len(ids) != len(set(ids)):
            raise ScenarioError("obstacle and agent ids must be unique")

    def dynamic_obstacle(self, obstacle_id: str) -> DynamicObstacle:
        for o in self.dynamic_obstacles:
            if o.id == obstacle_id:
                return o
        raise ScenarioError(f"unknown dynamic obstacle id {obstacle_id!r}")


def substitute_agents(scenario: Scenario, obstacle_ids) -> Scenario:
    """Replace recorded vehicles by planning problems.

    The goal area is the final recorded pose inflated by 2 m longitudinally
    and 0.5 m laterally; the deadline is 1.5x the recorded duration.
    """
    obstacle_ids = set(obstacle_ids)
    keep, problems = [], list(scenario.planning_problems)
    for obs in scenario.dynamic_obstacles:
        if obs.id not in obstacle_ids:
            keep.append(obs)
            continue
        obstacle_ids.discard(obs.id)
        if len(obs.recorded_states) < 2:
            raise ScenarioError(
                f"obstacle {obs.id}: needs >=2 recorded states to derive a goal"
            )
        final = obs.recorded_states[-1]
        goal_box = OrientedBox(
            Point2(final.x, final.y), final.theta,
            obs.length + 2 * 2.0, obs.width + 2 * 0.5,
        )
        duration = obs.duration_steps * scenario.dt
        goal = GoalRegion(area=Polygon(goal_box.corners()), t_max=1.5 * duration)
        params = obs.params or VehicleParams(length=obs.length, width=obs.width)
        problems.append(PlanningProblem(
            agent_id=obs.id,
            initial_state=obs.recorded_states[0],
            goal=goal,
            params=params,
        ))
    if obstacle_ids:
        raise ScenarioError(f"unknown dynamic obstacle ids: {sorted(obstacle_ids)}")
    return Scenario(scenario.network, scenario.static_obstacles, keep, problems, scenario.dt)


# ---------------------------------------------------------------------------
# File format


def _parse_adjacency(entry, where):
    if entry is None:
        return None
    try:
        return Adjacency(str(entry["id"]), bool(entry["same_direction"]))
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"{where}: malformed adjacency block ({exc})") from exc


def _parse_states(rows, where):
    try:
        return [AgentState(float(x), float(y), float(v), float(th)) for x, y, v, th in rows]
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: malformed state row ({exc})") from exc


def _parse_vehicle_params(block):
    if block is None:
        return None
    return VehicleParams(**{k: float(v) for k, v in block.items()})


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        dt = float(doc["dt"])
    except KeyError as exc:
        raise ScenarioError("missing top-level key 'dt'") from exc
    lanelets = []
    for entry in doc.get("lanelets", []):
        lid = str(entry["id"])
        lanelets.append(Lanelet(
            lid,
            Polyline(entry["left_bound"]),
            Polyline(entry["right_bound"]),
            successors=entry.get("successors", []),
            adjacent_left=_parse_adjacency(entry.get("adjacent_left"), f"lanelet {lid}"),
            adjacent_right=_parse_adjacency(entry.get("adjacent_right"), f"lanelet {lid}"),
        ))
    network = StreetNetwork(lanelets)
    statics = []
    for entry in doc.get("static_obstacles", []):
        pose = entry["pose"]
        statics.append(StaticObstacle(
            id=str(entry["id"]),
            length=float(entry["shape"]["length"]),
            width=float(entry["shape"]["width"]),
            pose=AgentState(float(pose["x"]), float(pose["y"]), 0.0, float(pose["theta"])),
        ))
    dynamics = []
    for entry in doc.get("dynamic_obstacles", []):
        oid = str(entry["id"])
        dynamics.append(DynamicObstacle(
            oid,
            float(entry["shape"]["length"]),
            float(entry["shape"]["width"]),
            _parse_states(entry["trajectory"], f"dynamic obstacle {oid}"),
            params=_parse_vehicle_params(entry.get("vehicle_params")),
        ))
    problems = []
    for entry in doc.get("planning_problems", []):
        aid = str(entry["agent_id"])
        x, y, v, th = entry["initial_state"]
        goal_doc = entry["goal"]
        goal = GoalRegion(
            area=Polygon(goal_doc["polygon"]),
            t_max=float(goal_doc["t_max"]),
            velocity_interval=tuple(goal_doc["v_interval"]) if goal_doc.get("v_interval") else None,
            orientation_interval=tuple(goal_doc["theta_interval"]) if goal_doc.get("theta_interval") else None,
        )
        params = _parse_vehicle_params(entry.get("vehicle_params")) or VehicleParams()
        initial = AgentState(float(x), float(y), float(v), float(th))
        problems.append(PlanningProblem(aid, initial, goal, params))
    scenario = Scenario(network, statics, dynamics, problems, dt)
    _validate(scenario)
    return scenario


def _validate(scenario: Scenario):
    region = scenario.network.region
    for prob in scenario.planning_problems:
        p = np.array([[prob.initial_state.x, prob.initial_state.y]])
        if region and not any(poly.contains_points(p)[0] for poly in region):
            raise ScenarioError(
                f"planning problem {prob.agent_id}: initial state outside the street network"
            )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    return scenario_from_dict(doc)


def _vehicle_params_to_dict(params: VehicleParams | None):
    if params is None:
        return None
    return {
        "length": params.length, "width": params.width,
        "a_long_max": params.a_long_max, "a_lat_max": params.a_lat_max,
        "v_max": params.v_max, "kappa_max": params.kappa_max,
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    def adj(a):
        return None if a is None else {"id": a.lanelet_id, "same_direction": a.same_direction}

    doc = {
        "dt": scenario.dt,
        "lanelets": [
            {
                "id": l.id,
                "left_bound": l.left_bound.points.tolist(),
                "right_bound": l.right_bound.points.tolist(),
                "successors": list(l.successors),
                "adjacent_left": adj(l.adjacent_left),
                "adjacent_right": adj(l.adjacent_right),
            }
            for l in (scenario.network.lanelets[i] for i in sorted(scenario.network.lanelets))
        ],
        "static_obstacles": [
            {
                "id": o.id,
                "shape": {"length": o.length, "width": o.width},
                "pose": {"x": o.pose.x, "y": o.pose.y, "theta": o.pose.theta},
            }
            for o in scenario.static_obstacles
        ],
        "dynamic_obstacles": [
            {
                "id": o.id,
                "shape": {"length": o.length, "width": o.width},
                "trajectory": [[s.x, s.y, s.v, s.theta] for s in o.recorded_states],
                "vehicle_params": _vehicle_params_to_dict(o.params),
            }
            for o in scenario.dynamic_obstacles
        ],
        "planning_problems": [
            {
                "agent_id": p.agent_id,
                "initial_state": [p.initial_state.x, p.initial_state.y,
                                  p.initial_state.v, p.initial_state.theta],
                "goal": {
                    "polygon": p.goal.area.vertices.tolist(),
                    "v_interval": list(p.goal.velocity_interval) if p.goal.velocity_interval else None,
                    "theta_interval": list(p.goal.orientation_interval) if p.goal.orientation_interval else None,
                    "t_max": p.goal.t_max,
                },
                "vehicle_params": _vehicle_params_to_dict(p.params),
            }
            for p in scenario.planning_problems
        ],
    }
    return doc


def save_scenario(scenario: Scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=1)
