"""Retrospective criticality metrics over realized trajectories.

All pairwise measures are computed in curvilinear frames spanned by the
agent's reachable lanelet paths; where several frames apply, the one with the
most critical TTC is retained. Oncoming traffic is ignored unless the agent
occupies the oncoming lane or the driving lanes cross. Undefined values are
represented as math.inf, never as sentinel numbers inside arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AgentState, VehicleParams, normalize_angle
from .engine import AgentStatus, SimulationResult
from .geometry import (CurvilinearFrame, Polygon, box_intersects_polygon,
                       boxes_intersect, min_distance, occupancy)
from .prediction import _chain_frame, lane_chain
from .scenario import Scenario

INF = math.inf

CORRIDOR_HALFWIDTH = 2.0   # lateral band counting as "in the agent's path"
PATH_LOOKAHEAD = 120.0     # m of lanelet paths enumerated per frame candidate
MAX_PATHS = 16


@dataclass(frozen=True)
class MetricConfig:
    ttc_threshold: float = 2.0   # s
    gating_distance: float = 50.0  # m, Cartesian proximity gate

    def __post_init__(self):
        if self.ttc_threshold <= 0 or self.gating_distance <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class VehicleLog:
    id: str
    states: list
    length: float
    width: float
    is_agent: bool
    params: VehicleParams | None = None

    def __post_init__(self):
        self.v = np.array([s.v for s in self.states])
        # acceleration by central finite differences of the logged speeds
        if len(self.v) >= 2:
            self.a = np.gradient(self.v)  # scaled by dt by the caller
        else:
            self.a = np.zeros_like(self.v)

    def box(self, step):
        return occupancy(self.states[step], self.length, self.width)


@dataclass
class PairContext:
    agent_id: str
    other_id: str
    relation: str              # lead-follow | crossing | oncoming-relevant | ignored
    frame: CurvilinearFrame | None = None
    s_a: float = INF
    d_a: float = INF
    s_o: float = INF
    d_o: float = INF
    v_a_along: float = 0.0
    v_o_along: float = 0.0
    hw: float = INF
    ttc: float = INF


# ---------------------------------------------------------------------------
# Frame enumeration


def _candidate_chains(network, state: AgentState):
    """All lanelet paths (successor chains) the vehicle can reach from its
    current position, used as candidate reference frames."""
    p = np.array([state.x, state.y])
    starts = []
    for lid in network.containing_lanelets(p):
        lane = network.lanelets[lid]
        if abs(normalize_angle(lane.start_tangent_angle() - state.theta)) <= math.pi / 2:
            starts.append(lid)
    if not starts:
        lid, dist = network.nearest_lanelet(p)
        if lid is None or dist > 5.0:
            return []
        starts = [lid]
    chains = []
    for start in sorted(starts):
        stack = [((start,), network.lanelets[start].centerline.length)]
        while stack and len(chains) < MAX_PATHS:
            chain, length = stack.pop()
            succ = sorted(network.lanelets[chain[-1]].successors)
            succ = [s for s in succ if s not in chain]
            if length >= PATH_LOOKAHEAD or not succ:
                chains.append(chain)
                continue
            for s in succ:
                stack.append((chain + (s,), length + network.lanelets[s].centerline.length))
    return chains


def _own_frame(network, state: AgentState, horizon_length: float):
    lid, dist = network.nearest_lanelet((state.x, state.y))
    if lid is None or dist > 5.0:
        return None
    chain = lane_chain(network, lid, state.theta,
                       network.lanelets[lid].centerline.length + horizon_length)
    return _chain_frame(network, chain)


# ---------------------------------------------------------------------------
# Elementary measures


def ttc_closed_form(hw: float, dv: float, da: float) -> float:
    """Smallest positive root of hw + dv*t + 0.5*da*t^2 = 0, inf if none.

    dv is lead-minus-ego relative velocity, da the relative acceleration.
    """
    if not math.isfinite(hw):
        return INF
    if hw <= 0:
        return 0.0
    roots = []
    if abs(da) < 1e-9:
        if dv < -1e-12:
            roots.append(-hw / dv)
    else:
        disc = dv * dv - 2.0 * da * hw
        if disc >= 0:
            sq = math.sqrt(disc)
            for r in ((-dv - sq) / da, (-dv + sq) / da):
                if r > 0:
                    roots.append(r)
    return min(roots) if roots else INF


def tet(ttc_series, tau: float, dt: float, total_duration: float) -> float:
    """Fraction of the scenario duration with TTC <= tau."""
    if total_duration <= 0:
        return 0.0
    count = sum(1 for v in ttc_series if v <= tau)
    return (dt / total_duration) * count


def tit(ttc_series, tau: float, dt: float, total_duration: float) -> float:
    """Duration-normalized integral of (tau - TTC) where TTC <= tau."""
    if total_duration <= 0:
        return 0.0
    acc = sum(tau - v for v in ttc_series if v <= tau)
    return (dt / total_duration) * acc


def distance_series(log_a: VehicleLog, log_o: VehicleLog) -> np.ndarray:
    n = min(len(log_a.states), len(log_o.states))
    return np.array([min_distance(log_a.box(k), log_o.box(k)) for k in range(n)])


def ttce_dce(dist_series: np.ndarray, step: int, dt: float) -> tuple[float, float]:
    """Time to and distance of the closest future encounter from step onward."""
    future = dist_series[step:]
    if len(future) == 0:
        return INF, INF
    arg = int(np.argmin(future))
    return arg * dt, float(future[arg])


def braking_threat(hw: float, v_ego_along: float, v_lead_along: float,
                   a_long_max: float) -> float:
    """Required stop-before-contact deceleration over available deceleration."""
    if not math.isfinite(hw) or hw <= 0:
        return 0.0
    closing = max(0.0, v_ego_along - v_lead_along)
    return (closing * closing / (2.0 * hw)) / a_long_max


def steering_threat(d_a: float, d_o: float, width_a: float, width_o: float,
                    ttc: float, a_lat_max: float) -> float:
    """Required lateral clearing acceleration over available lateral accel."""
    if not math.isfinite(ttc) or ttc <= 0:
        return 0.0
    d_clear = max(0.0, 0.5 * (width_a + width_o) - abs(d_a - d_o))
    return (2.0 * d_clear / (ttc * ttc)) / a_lat_max


def minimum_stopping_distance(v: float, a_long_max: float) -> float:
    return v * v / (2.0 * a_long_max)


def proportion_stopping_distance(distance_to_area: float, msd: float) -> float:
    if msd <= 0:
        return INF
    return distance_to_area / msd


# ---------------------------------------------------------------------------
# Frame selection


def select_frames(network, log_a: VehicleLog, log_o: VehicleLog, step: int,
                  dt: float, cfg: MetricConfig, conflict_pairs: set,
                  chain_cache: dict) -> PairContext:
    """Classify the pair at one step and pick the most critical frame."""
    sa, so = log_a.states[step], log_o.states[step]
    if math.hypot(sa.x - so.x, sa.y - so.y) > cfg.gating_distance:
        return PairContext(log_a.id, log_o.id, "ignored")

    key = (log_a.id, step)
    chains = chain_cache.get(key)
    if chains is None:
        chains = _candidate_chains(network, sa)
        chain_cache[key] = chains
    if not chains:
        return PairContext(log_a.id, log_o.id, "ignored")

    other_lanelet, other_dist = network.nearest_lanelet((so.x, so.y))

    best: PairContext | None = None
    for chain in chains:
        frame = _chain_frame(network, chain)
        s_a, d_a, in_a = frame.project((sa.x, sa.y))
        s_o, d_o, in_o = frame.project((so.x, so.y))
        if not (in_a and in_o):
            continue
        tang_o = frame.tangent_angle_at(s_o)
        same_dir = abs(normalize_angle(so.theta - tang_o)) <= math.pi / 2
        lanes_cross = (
            other_lanelet is not None and other_dist <= 5.0
            and any(tuple(sorted((lid, other_lanelet))) in conflict_pairs for lid in chain)
        )
        if not same_dir:
            tang_a = frame.tangent_angle_at(s_a)
            on_oncoming_lane = abs(normalize_angle(sa.theta - tang_a)) > math.pi / 2
            # the agent's own chains align with its heading, so check the
            # containing lanelets directly
            on_oncoming_lane = on_oncoming_lane or _occupies_oncoming(network, sa)
            if not (on_oncoming_lane or lanes_cross):
                continue
            relation = "oncoming-relevant"
        elif lanes_cross:
            relation = "crossing"
        else:
            relation = "lead-follow"

        v_a_along = sa.v * math.cos(normalize_angle(sa.theta - frame.tangent_angle_at(s_a)))
        v_o_along = so.v * math.cos(normalize_angle(so.theta - tang_o))
        hw = INF
        if s_o - log_o.length / 2.0 > s_a + log_a.length / 2.0 and abs(d_o) <= CORRIDOR_HALFWIDTH:
            hw = (s_o - log_o.length / 2.0) - (s_a + log_a.length / 2.0)
        a_a = log_a.a[step] / dt
        a_o = log_o.a[step] / dt
        if relation == "crossing" and hw == INF:
            ttc = _crossing_ttc(network, log_a, log_o, step, dt)
        else:
            ttc = ttc_closed_form(hw, v_o_along - v_a_along, a_o - a_a)
        ctx = PairContext(log_a.id, log_o.id, relation, frame,
                          s_a, d_a, s_o, d_o, v_a_along, v_o_along, hw, ttc)
        if best is None or (ctx.ttc, ctx.hw) < (best.ttc, best.hw):
            best = ctx
    if best is None:
        return PairContext(log_a.id, log_o.id, "ignored")
    return best


def _occupies_oncoming(network, state: AgentState) -> bool:
    p = np.array([state.x, state.y])
    for lid in network.containing_lanelets(p):
        lane = network.lanelets[lid]
        if abs(normalize_angle(lane.start_tangent_angle() - state.theta)) > math.pi / 2:
            return True
    return False


def _crossing_ttc(network, log_a: VehicleLog, log_o: VehicleLog, step: int,
                  dt: float, horizon: float = 15.0) -> float:
    """Time until occupancy overlap when both continue along their own paths
    at their logged speeds."""
    sa, so = log_a.states[step], log_o.states[step]
    if boxes_intersect(log_a.box(step), log_o.box(step)):
        return 0.0
    frames = []
    for st, v in ((sa, sa.v), (so, so.v)):
        frames.append(_own_frame(network, st, v * horizon + 20.0))
    positions = []
    for st, frame in zip((sa, so), frames):
        if frame is None:
            positions.append(None)
        else:
            s0, d0, _ = frame.project((st.x, st.y))
            positions.append((frame, s0, d0))
    n = int(round(horizon / dt))
    for k in range(1, n + 1):
        states = []
        for st, info in zip((sa, so), positions):
            if info is None:
                states.append(AgentState(st.x + st.v * k * dt * math.cos(st.theta),
                                         st.y + st.v * k * dt * math.sin(st.theta),
                                         st.v, st.theta))
                continue
            frame, s0, d0 = info
            s = min(s0 + st.v * k * dt, frame.length)
            try:
                p = frame.to_cartesian(s, d0)
            except Exception:
                return INF
            states.append(AgentState(float(p[0]), float(p[1]), st.v,
                                     frame.tangent_angle_at(s)))
        box_a = occupancy(states[0], log_a.length, log_a.width)
        box_o = occupancy(states[1], log_o.length, log_o.width)
        if boxes_intersect(box_a, box_o):
            return k * dt
    return INF


# ---------------------------------------------------------------------------
# Conflict-area events


def encroachment_times(area: Polygon, log_a: VehicleLog, log_o: VehicleLog,
                       dt: float) -> tuple[float, float, float, float]:
    """(entry, exit, ET, PET) of log_a traversing the area, with PET measured
    until log_o enters afterwards. Entry/exit resolved at dt resolution."""
    def occupancy_flags(log):
        return [box_intersects_polygon(log.box(k), area) for k in range(len(log.states))]

    flags_a = occupancy_flags(log_a)
    if not any(flags_a):
        return INF, INF, INF, INF
    entry = flags_a.index(True)
    exit_ = entry
    while exit_ < len(flags_a) and flags_a[exit_]:
        exit_ += 1
    et = (exit_ - entry) * dt
    flags_o = occupancy_flags(log_o)
    pet = INF
    for k in range(exit_, len(flags_o)):
        if flags_o[k]:
            pet = (k - exit_) * dt
            break
    return entry * dt, exit_ * dt, et, pet


# ---------------------------------------------------------------------------
# Report


@dataclass
class MetricReport:
    dt: float
    pair_series: dict = field(default_factory=dict)    # (a, o) -> {name: list}
    agent_series: dict = field(default_factory=dict)   # a -> {name: list}
    conflict_events: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)     # a -> {name: value}

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            if isinstance(v, (np.floating, np.integer)):
                return clean(float(v))
            if isinstance(v, dict):
                return {str(k): clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple, np.ndarray)):
                return [clean(x) for x in v]
            return v

        return {
            "dt": self.dt,
            "pair_series": {f"{a}|{o}": clean(series)
                            for (a, o), series in sorted(self.pair_series.items())},
            "agent_series": clean(self.agent_series),
            "conflict_events": clean(self.conflict_events),
            "aggregates": clean(self.aggregates),
        }


def _finite_min(values) -> float:
    finite = [v for v in values if math.isfinite(v)]
    return min(finite) if finite else INF


def evaluate(result: SimulationResult, scenario: Scenario,
             cfg: MetricConfig | None = None) -> MetricReport:
    """Full deterministic criticality report over a finished simulation."""
    cfg = cfg or MetricConfig()
    dt = result.dt
    n_steps = len(result.step_logs)
    network = scenario.network

    logs: dict[str, VehicleLog] = {}
    problems = {p.agent_id: p for p in scenario.planning_problems}
    for aid, traj in result.trajectories.items():
        params = problems[aid].params if aid in problems else VehicleParams()
        logs[aid] = VehicleLog(aid, list(traj.states), params.length, params.width,
                               True, params)
    for obs in scenario.dynamic_obstacles:
        states = [obs.state_at(k) for k in range(n_steps + 1)]
        logs[obs.id] = VehicleLog(obs.id, states, obs.length, obs.width, False)
    for obs in scenario.static_obstacles:
        states = [obs.pose] * (n_steps + 1)
        logs[obs.id] = VehicleLog(obs.id, states, obs.length, obs.width, False)

    conflict_areas = network.conflict_areas()
    conflict_pairs = {tuple(sorted(pair)) for pair, _ in conflict_areas}
    chain_cache: dict = {}

    report = MetricReport(dt=dt)
    agent_ids = sorted(aid for aid, log in logs.items() if log.is_agent)

    for aid in agent_ids:
        log_a = logs[aid]
        params = log_a.params or VehicleParams()
        per_pair_ttc = []
        for oid in sorted(logs):
            if oid == aid:
                continue
            log_o = logs[oid]
            n = min(len(log_a.states), len(log_o.states))
            dists = distance_series(log_a, log_o)
            series = {k: [] for k in ("hw", "thw", "ttc", "ttce", "dce",
                                      "btn", "stn", "relation")}
            any_reported = False
            for t in range(n):
                ctx = select_frames(network, log_a, log_o, t, dt, cfg,
                                    conflict_pairs, chain_cache)
                series["relation"].append(ctx.relation)
                if ctx.relation == "ignored":
                    series["hw"].append(INF)
                    series["thw"].append(INF)
                    series["ttc"].append(INF)
                    series["btn"].append(0.0)
                    series["stn"].append(0.0)
                else:
                    any_reported = True
                    series["hw"].append(ctx.hw)
                    v = log_a.states[t].v
                    series["thw"].append(ctx.hw / v if (math.isfinite(ctx.hw) and v > 0) else INF)
                    series["ttc"].append(ctx.ttc)
                    series["btn"].append(braking_threat(ctx.hw, ctx.v_a_along,
                                                        ctx.v_o_along, params.a_long_max))
                    series["stn"].append(steering_threat(ctx.d_a, ctx.d_o,
                                                         log_a.width, log_o.width,
                                                         ctx.ttc, params.a_lat_max))
                ttce_v, dce_v = ttce_dce(dists, t, dt)
                series["ttce"].append(ttce_v)
                series["dce"].append(dce_v)
            if any_reported or np.any(dists < cfg.gating_distance):
                report.pair_series[(aid, oid)] = series
                per_pair_ttc.append(series["ttc"])

        # conflict-area events
        for idx, (pair, area) in enumerate(conflict_areas):
            for oid in sorted(logs):
                if oid == aid:
                    continue
                entry, exit_, et, pet = encroachment_times(area, log_a, logs[oid], dt)
                if math.isfinite(et):
                    report.conflict_events.append({
                        "agent": aid, "other": oid, "area_index": idx,
                        "lanelets": list(pair), "entry": entry, "exit": exit_,
                        "et": et, "pet": pet,
                    })
                    break  # ET identical per area; PET uses the first other
            else:
                continue

        # per-agent series: most critical TTC across pairs, MSD, PSD
        ttc_min = []
        for t in range(len(log_a.states)):
            vals = [s[t] for s in per_pair_ttc if t < len(s)]
            ttc_min.append(min(vals) if vals else INF)
        msd_series, psd_series = [], []
        for t, st in enumerate(log_a.states):
            msd = minimum_stopping_distance(st.v, params.a_long_max)
            msd_series.append(msd)
            dist_area = _distance_to_next_conflict_area(
                network, st, log_a, conflict_areas, chain_cache, t)
            psd_series.append(proportion_stopping_distance(dist_area, msd)
                              if math.isfinite(dist_area) else INF)
        report.agent_series[aid] = {"ttc": ttc_min, "msd": msd_series, "psd": psd_series}

        duration = (len(log_a.states) - 1) * dt
        pair_mins = {
            "min_ttc": _finite_min(ttc_min),
            "min_dce": _finite_min(
                v for (a, o), s in report.pair_series.items() if a == aid for v in s["dce"]),
            "max_btn": max((v for (a, o), s in report.pair_series.items()
                            if a == aid for v in s["btn"]), default=0.0),
            "max_stn": max((v for (a, o), s in report.pair_series.items()
                            if a == aid for v in s["stn"]), default=0.0),
        }
        ets = [e["et"] for e in report.conflict_events if e["agent"] == aid]
        pets = [e["pet"] for e in report.conflict_events if e["agent"] == aid]
        report.aggregates[aid] = {
            **pair_mins,
            "tet": tet(ttc_min, cfg.ttc_threshold, dt, duration),
            "tit": tit(ttc_min, cfg.ttc_threshold, dt, duration),
            "et": _finite_min(ets) if ets else INF,
            "pet": _finite_min(pets) if pets else INF,
            "status": result.statuses[aid].value,
            "collided": result.statuses[aid] is AgentStatus.COLLIDED,
        }
    return report


def _distance_to_next_conflict_area(network, state: AgentState, log: VehicleLog,
                                    conflict_areas, chain_cache, step) -> float:
    key = (log.id, step)
    chains = chain_cache.get(key)
    if chains is None:
        chains = _candidate_chains(network, state)
        chain_cache[key] = chains
    best = INF
    for chain in chains:
        frame = _chain_frame(network, chain)
        s_a, _, in_a = frame.project((state.x, state.y))
        if not in_a:
            continue
        chain_set = set(chain)
        for pair, area in conflict_areas:
            if not chain_set.intersection(pair):
                continue
            s_entries = []
            for v in area.vertices:
                s_v, d_v, in_v = frame.project(v)
                if in_v and abs(d_v) <= CORRIDOR_HALFWIDTH + 2.0:
                    s_entries.append(s_v)
            if not s_entries:
                continue
            dist = min(s_entries) - (s_a + log.length / 2.0)
            if 0.0 < dist < best:
                best = dist
    return best
