"""Goal-conditioned routing environment over the traffic graph.

Episodes move a vessel cell-to-cell under a maneuver/speed action pair,
with per-step shaped rewards (progress, route frequency, wind, fuel, time,
step cost), distance-based reward scaling across tasks, binary maneuver
masking, and a hop-budget horizon of five times the start-goal distance.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .geo import KNOTS_TO_KMH, GeoCoord, initial_bearing_math
from .hexworld import AXIAL_DIRECTIONS, CellId, WorldGrid
from .traffic import TrafficGraph, bfs_distances, lattice_distances
from .wind import WindField, WindSample

N_DIRECTIONS = 6

# Observation layout: four dynamic features followed by the four-feature
# static goal descriptor.
OBS_LAT, OBS_LON, OBS_SPEED, OBS_WIND_DIR = 0, 1, 2, 3
OBS_START_LAT, OBS_START_LON, OBS_GOAL_LAT, OBS_GOAL_LON = 4, 5, 6, 7
N_DYNAMIC, N_GOAL = 4, 4


class Task(NamedTuple):
    start: CellId
    goal: CellId


class Action(NamedTuple):
    maneuver: int  # direction slot 0-5
    speed: int  # index into speed_levels


@dataclass
class EnvConfig:
    history_len: int = 8
    horizon_factor: int = 5
    speed_levels: tuple[float, ...] = (8.0, 11.0, 14.0, 18.0, 22.0)
    wind_threshold: float = 10.0  # m/s
    fuel_coeffs: tuple[float, float] = (0.05, 0.02)
    penalty_scale: float = 0.001
    base_penalty: float = -1.0
    invalid_penalty: float = -1900.0
    ref_task: Task | None = None
    masking_enabled: bool = True
    freq_source: str = "count"  # count | prob
    distance_topology: str = "graph"  # graph | lattice
    penalty_only: bool = False

    def __post_init__(self):
        if self.freq_source not in ("count", "prob"):
            raise ValueError("freq_source must be 'count' or 'prob'")
        if self.distance_topology not in ("graph", "lattice"):
            raise ValueError("distance_topology must be 'graph' or 'lattice'")


@dataclass
class RewardBreakdown:
    r_prog: float
    r_freq: float
    r_wind: float
    r_fuel: float
    r_eta: float
    r_base: float
    r_raw: float
    r_scaled: float
    fuel_use: float
    travel_time: float  # minutes


@dataclass
class StepOutcome:
    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


def normalize_position(x: float, x_min: float, x_max: float) -> float:
    """Min-max scaling to [0, 1], clamped."""
    if not x_max > x_min:
        raise ValueError("degenerate range: x_max must exceed x_min")
    return min(1.0, max(0.0, (x - x_min) / (x_max - x_min)))


def normalize_log(y: float, y_min: float, y_max: float, eps: float = 1e-5) -> float:
    """Log10 scaling to [0, 1] for non-negative skewed variables, clamped."""
    if y < 0 or y_min < 0 or not y_max > y_min:
        raise ValueError("need y >= 0 and y_max > y_min >= 0")
    lo = math.log10(y_min + eps)
    hi = math.log10(y_max + eps)
    return min(1.0, max(0.0, (math.log10(y + eps) - lo) / (hi - lo)))


def normalize_wind_dir(theta: float) -> float:
    """Map a direction in [-pi, pi] onto [0, 1]."""
    return (theta + math.pi) / (2.0 * math.pi)


def masked_distribution(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax restricted to valid entries; invalid entries get probability 0."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("no valid actions to distribute probability over")
    z = np.asarray(logits, dtype=float).copy()
    z[~mask] = -np.inf
    z -= z[mask].max()
    e = np.exp(z)
    return e / e.sum()


def drag_factor(angle_diff: float) -> float:
    """Headwind drag multiplier: 1 when running with the wind, 2 dead against."""
    return 1.0 + 0.5 * (1.0 - math.cos(angle_diff))


def fuel_use(speed: float, heading: float, wind: WindSample,
             coeffs: tuple[float, float] = (0.05, 0.02)) -> float:
    """Cubic-law fuel burn with a wind-alignment drag term."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    return coeffs[0] * speed ** 3 * drag_factor(heading - wind.direction) + coeffs[1] * wind.speed


def scale_reward(r_raw: float, task_distance: int, ref_distance: int) -> float:
    """Rescale a raw reward by task length relative to the fixed reference."""
    if task_distance <= 0 or ref_distance <= 0:
        raise ValueError("task and reference distances must be positive")
    return r_raw / task_distance * ref_distance


class RouteEnv:
    """Single-agent episodic environment; owns mutable per-episode state.

    The grid argument is only required for the 'lattice' distance topology,
    where goal distances run over full water adjacency rather than the
    traffic graph's edge set.
    """

    def __init__(self, graph: TrafficGraph, wind: WindField, config: EnvConfig | None = None,
                 grid: WorldGrid | None = None):
        self.graph = graph
        self.wind = wind
        self.config = config or EnvConfig()
        self.grid = grid
        if self.config.distance_topology == "lattice" and grid is None:
            raise ValueError("lattice distance topology requires the world grid")
        self._edge_km: dict[tuple[CellId, CellId], float] = {}
        self._ref_task = self.config.ref_task
        self._ref_distance: int | None = None
        self._goal_dist_cache: dict[CellId, dict[CellId, int]] = {}
        self._done = True
        self.obs_dim = N_DYNAMIC + N_GOAL

    # -- episode lifecycle -------------------------------------------------

    def reset(self, task: Task, seed: int | None = None) -> tuple[np.ndarray, dict]:
        for cell in task:
            if cell not in self.graph.nodes:
                raise ValueError(f"task cell {cell} is not a graph node")
        if task.start == task.goal:
            raise ValueError("task start and goal must differ")
        dist = self._distances_to(task.goal)
        if task.start not in dist:
            raise ValueError(f"unreachable goal: no path {task.start} -> {task.goal}")
        if self._ref_task is None:
            self._ref_task = task  # first task seen becomes the fixed reference
        if self._ref_distance is None or self._ref_task != getattr(self, "_ref_cached_for", None):
            ref_dist = self._distances_to(self._ref_task.goal)
            if self._ref_task.start not in ref_dist:
                raise ValueError("reference task is unreachable")
            self._ref_distance = ref_dist[self._ref_task.start]
            self._ref_cached_for = self._ref_task

        self.task = task
        self._dist_goal = dist
        self.task_distance = dist[task.start]
        self.horizon = self.config.horizon_factor * self.task_distance
        rng = np.random.default_rng(seed)
        days = self.wind.days()
        day = days[int(rng.integers(len(days)))]
        self._clock = float(self.wind.first_time_on_day(day))

        lats = [c.lat for c in self.graph.centers.values()]
        lons = [c.lon for c in self.graph.centers.values()]
        self._lat_rng = (min(lats), max(lats))
        self._lon_rng = (min(lons), max(lons))

        self.current = task.start
        self.prev: CellId | None = None
        self.step_count = 0
        self.last_speed = self.config.speed_levels[0]
        self._last_wind = self._sample_wind(self.current)
        self._done = False
        self.route = [self.current]
        self.trace: list[dict] = []

        mask = self.compute_mask()
        info = {"cell": self.current, "mask": mask,
                "distance_to_goal": self.task_distance}
        if not mask.any():
            self._done = True
            info["dead_end"] = True
        return self._observation(), info

    def step(self, action) -> StepOutcome:
        if self._done:
            raise RuntimeError("step() called after the episode ended")
        maneuver, speed_idx = int(action[0]), int(action[1])
        if not 0 <= maneuver < N_DIRECTIONS:
            raise ValueError(f"maneuver index {maneuver} out of range")
        if not 0 <= speed_idx < len(self.config.speed_levels):
            raise ValueError(f"speed index {speed_idx} out of range")

        dq, dr = AXIAL_DIRECTIONS[maneuver]
        target = CellId(self.current.q + dq, self.current.r + dr)
        speed = self.config.speed_levels[speed_idx]

        if self.config.masking_enabled:
            if not self.compute_mask()[maneuver]:
                raise ValueError(f"maneuver {maneuver} is masked; caller must respect the mask")
        elif not self._move_is_valid(target):
            return self._invalid_terminal(speed)

        return self._advance(target, speed)

    # -- masking -----------------------------------------------------------

    def compute_mask(self) -> np.ndarray:
        """Validity of the six maneuver directions at the current state.

        A direction is valid when the traffic graph has an edge to that
        neighbor and the neighbor is not the immediately previous cell. On
        the very first step of an episode, if all six directions carry graph
        edges, the one with the lowest prob_weight is additionally masked
        (ties to the lowest direction index).
        """
        mask = np.zeros(N_DIRECTIONS, dtype=bool)
        edges = self.graph.adjacency.get(self.current, {})
        targets = []
        for d, (dq, dr) in enumerate(AXIAL_DIRECTIONS):
            n = CellId(self.current.q + dq, self.current.r + dr)
            targets.append(n)
            mask[d] = n in edges and n != self.prev
        if self.step_count == 0 and all(t in edges for t in targets):
            weakest = min(range(N_DIRECTIONS), key=lambda d: (edges[targets[d]].prob_weight, d))
            mask[weakest] = False
        return mask

    # -- internals ----------------------------------------------------------

    def _move_is_valid(self, target: CellId) -> bool:
        return self.graph.has_edge(self.current, target) and target != self.prev

    def _invalid_terminal(self, speed: float) -> StepOutcome:
        penalty = self.config.invalid_penalty
        breakdown = RewardBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                                    r_raw=0.0, r_scaled=penalty,
                                    fuel_use=0.0, travel_time=0.0)
        self.step_count += 1
        self._done = True
        self._append_trace(speed, breakdown)
        info = {"cell": self.current, "invalid_action": True,
                "breakdown": breakdown,
                "r_scaled_full": penalty, "r_scaled_penalty_only": penalty,
                "distance_to_goal": self._dist_goal[self.current]}
        return StepOutcome(self._observation(), penalty, True, False, info)

    def _advance(self, target: CellId, speed: float) -> StepOutcome:
        cfg = self.config
        dist_before = self._dist_goal[self.current]
        edge = self.graph.edge(self.current, target)
        km = self._edge_distance(self.current, target)
        travel_min = km / (speed * KNOTS_TO_KMH) * 60.0
        heading = initial_bearing_math(self.graph.centers[self.current],
                                       self.graph.centers[target])
        self.prev = self.current
        self.current = target
        self.step_count += 1
        self.last_speed = speed
        self._clock += travel_min * 60.0
        self._last_wind = self._sample_wind(target)
        self.route.append(target)

        dist_after = self._dist_goal[target]
        r_prog = 2.0 * (dist_before - dist_after)
        weight = edge.count if cfg.freq_source == "count" else edge.prob_weight
        r_freq = min(0.5, max(0.0, math.log1p(weight) / 5.0))
        r_wind = -1.0 if self._last_wind.speed > cfg.wind_threshold else 0.0
        fuel = fuel_use(speed, heading, self._last_wind, cfg.fuel_coeffs)
        r_fuel = -cfg.penalty_scale * fuel
        r_eta = -cfg.penalty_scale * travel_min
        r_base = cfg.base_penalty
        r_raw = r_prog + r_freq + r_wind + r_fuel + r_eta + r_base
        scaled = scale_reward(r_raw, self.task_distance, self._ref_distance)
        scaled_penalty_only = scale_reward(r_raw - r_prog - r_freq,
                                           self.task_distance, self._ref_distance)
        breakdown = RewardBreakdown(r_prog, r_freq, r_wind, r_fuel, r_eta, r_base,
                                    r_raw=r_raw, r_scaled=scaled,
                                    fuel_use=fuel, travel_time=travel_min)

        terminated = target == self.task.goal
        truncated = not terminated and self.step_count >= self.horizon
        info = {"cell": target, "breakdown": breakdown,
                "r_scaled_full": scaled, "r_scaled_penalty_only": scaled_penalty_only,
                "distance_to_goal": dist_after}
        if not (terminated or truncated):
            mask = self.compute_mask()
            info["mask"] = mask
            if not mask.any():
                truncated = True
                info["dead_end"] = True
        self._done = terminated or truncated
        self._append_trace(speed, breakdown)
        reward = scaled_penalty_only if cfg.penalty_only else scaled
        return StepOutcome(self._observation(), reward, terminated, truncated, info)

    def _edge_distance(self, a: CellId, b: CellId) -> float:
        key = (a, b) if a <= b else (b, a)
        if key not in self._edge_km:
            self._edge_km[key] = self.graph.edge_distance_km(a, b)
        return self._edge_km[key]

    def _distances_to(self, goal: CellId) -> dict[CellId, int]:
        if goal not in self._goal_dist_cache:
            if self.config.distance_topology == "graph":
                self._goal_dist_cache[goal] = bfs_distances(self.graph, goal)
            else:
                self._goal_dist_cache[goal] = lattice_distances(self.grid, goal)
        return self._goal_dist_cache[goal]

    def _sample_wind(self, cell: CellId) -> WindSample:
        t = min(max(self._clock, self.wind.times[0]), self.wind.times[-1])
        return self.wind.sample(cell, t)

    def _observation(self) -> np.ndarray:
        cfg = self.config
        centers = self.graph.centers
        lat_lo, lat_hi = self._lat_rng
        lon_lo, lon_hi = self._lon_rng
        cur = centers[self.current]
        start = centers[self.task.start]
        goal = centers[self.task.goal]
        return np.array([
            normalize_position(cur.lat, lat_lo, lat_hi),
            normalize_position(cur.lon, lon_lo, lon_hi),
            normalize_log(self.last_speed, min(cfg.speed_levels), max(cfg.speed_levels)),
            normalize_wind_dir(self._last_wind.direction),
            normalize_position(start.lat, lat_lo, lat_hi),
            normalize_position(start.lon, lon_lo, lon_hi),
            normalize_position(goal.lat, lat_lo, lat_hi),
            normalize_position(goal.lon, lon_lo, lon_hi),
        ])

    def _append_trace(self, speed: float, b: RewardBreakdown) -> None:
        self.trace.append({
            "step": self.step_count, "cell_q": self.current.q, "cell_r": self.current.r,
            "speed_knots": speed, "r_prog": b.r_prog, "r_freq": b.r_freq,
            "r_wind": b.r_wind, "r_fuel": b.r_fuel, "r_eta": b.r_eta,
            "r_base": b.r_base, "r_scaled": b.r_scaled,
        })


class HistoryEnv:
    """Stacks the H most recent dynamic feature blocks ahead of the goal
    block; pre-episode slots replicate the initial dynamic vector."""

    def __init__(self, env: RouteEnv, history_len: int | None = None):
        self.env = env
        self.history_len = history_len or env.config.history_len
        self.obs_dim = self.history_len * N_DYNAMIC + N_GOAL
        self._buf: list[np.ndarray] = []

    def reset(self, task: Task, seed: int | None = None) -> tuple[np.ndarray, dict]:
        obs, info = self.env.reset(task, seed=seed)
        self._buf = [obs[:N_DYNAMIC]] * self.history_len
        return self._stack(obs), info

    def step(self, action) -> StepOutcome:
        out = self.env.step(action)
        self._buf.append(out.obs[:N_DYNAMIC])
        self._buf = self._buf[-self.history_len:]
        return replace(out, obs=self._stack(out.obs))

    def _stack(self, obs: np.ndarray) -> np.ndarray:
        return np.concatenate(self._buf + [obs[N_DYNAMIC:]])

    def __getattr__(self, name):
        return getattr(self.env, name)


TRACE_COLUMNS = ["step", "cell_q", "cell_r", "speed_knots", "r_prog", "r_freq",
                 "r_wind", "r_fuel", "r_eta", "r_base", "r_scaled"]


def export_trace_csv(path, trace: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        writer.writerows(trace)


def export_route_geojson(path, centers: dict[CellId, GeoCoord], route: list[CellId],
                         properties: dict | None = None) -> None:
    """Write the visited cell centers as a GeoJSON LineString feature."""
    coords = [[centers[c].lon, centers[c].lat] for c in route]
    doc = {
        "type": "FeatureCollection",
        "features": [{
            "type": "Feature",
            "properties": properties or {},
            "geometry": {"type": "LineString", "coordinates": coords},
        }],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
