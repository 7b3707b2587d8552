"""Vessel-trajectory preprocessing and the traffic graph built from it.

Trajectories are resampled to a uniform interval, snapped to water cells,
and compressed into cell runs. Consecutive runs over adjacent cells become
transition counts; the resulting undirected graph carries per-edge visit
statistics, mean crossing speed, and a traversal cost in hours.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, NamedTuple

from .geo import KNOTS_TO_KMH, GeoCoord, haversine_km
from .hexworld import AXIAL_DIRECTIONS, CellId, WorldGrid, axial_distance

MIN_EDGE_SPEED_KNOTS = 0.5  # keeps traversal cost finite for idling vessels


class TrajectoryPoint(NamedTuple):
    t: float  # UTC epoch seconds
    pos: GeoCoord
    sog: float  # knots
    cog: float  # degrees in [0, 360)


@dataclass
class Trajectory:
    vessel_id: str
    points: list[TrajectoryPoint]

    def __post_init__(self):
        for a, b in zip(self.points, self.points[1:]):
            if not b.t > a.t:
                raise ValueError(f"trajectory {self.vessel_id}: timestamps must strictly increase")
        for p in self.points:
            if not (math.isfinite(p.sog) and p.sog >= 0):
                raise ValueError(f"trajectory {self.vessel_id}: sog must be finite and >= 0")


def resample(traj: Trajectory, interval: float = 60.0) -> Trajectory:
    """Resample a trajectory to uniform time steps by linear interpolation.

    Output timestamps are t0, t0+interval, ... up to the last input time.
    Positions and sog interpolate linearly; cog interpolates along the
    shortest angular arc.
    """
    if len(traj.points) < 2:
        raise ValueError("degenerate trajectory: need at least 2 points")
    pts = traj.points
    times = [p.t for p in pts]
    out: list[TrajectoryPoint] = []
    i = 0
    for k in range(int((times[-1] - times[0]) / interval) + 1):
        t = times[0] + k * interval  # no accumulation drift
        if t > times[-1]:
            break
        while times[i + 1] < t:
            i += 1
        a, b = pts[i], pts[i + 1]
        f = (t - a.t) / (b.t - a.t)
        lat = a.pos.lat + f * (b.pos.lat - a.pos.lat)
        lon = a.pos.lon + f * (b.pos.lon - a.pos.lon)
        sog = a.sog + f * (b.sog - a.sog)
        arc = ((b.cog - a.cog + 180.0) % 360.0) - 180.0
        cog = (a.cog + f * arc) % 360.0
        out.append(TrajectoryPoint(t, GeoCoord(lat, lon), sog, cog))
        t += interval
    return Trajectory(traj.vessel_id, out)


def discretize(grid: WorldGrid, traj: Trajectory) -> list[tuple[CellId, float]]:
    """Map points to water cells and merge consecutive duplicates into runs.

    Each run carries the arithmetic mean sog of its member points. Points
    that fall off-grid (outside the bbox or on clipped land) are dropped.
    """
    runs: list[tuple[CellId, float]] = []
    cur: CellId | None = None
    sog_sum = 0.0
    n = 0
    for p in traj.points:
        try:
            cell = grid.locate(p.pos)
        except ValueError:
            continue
        if cell != cur:
            if cur is not None:
                runs.append((cur, sog_sum / n))
            cur, sog_sum, n = cell, 0.0, 0
        sog_sum += p.sog
        n += 1
    if cur is not None:
        runs.append((cur, sog_sum / n))
    return runs


@dataclass
class EdgeStats:
    """Symmetric attributes of one undirected traffic edge."""

    count: int  # total crossings, both directions
    prob_weight: float  # mean of the two endpoint-normalized frequencies
    mean_speed: float  # knots, floored at MIN_EDGE_SPEED_KNOTS
    cost: float  # hours: center distance / speed + lambda * (1 - prob_weight)


@dataclass
class TrafficGraph:
    """Undirected weighted graph over water cells observed in traffic."""

    nodes: frozenset[CellId]
    centers: dict[CellId, GeoCoord]
    adjacency: dict[CellId, dict[CellId, EdgeStats]]
    reliability_lambda: float = 1.0
    directed_counts: dict[tuple[CellId, CellId], int] = field(default_factory=dict)
    gap_count: int = 0

    def has_edge(self, a: CellId, b: CellId) -> bool:
        return a in self.adjacency and b in self.adjacency[a]

    def edge(self, a: CellId, b: CellId) -> EdgeStats:
        try:
            return self.adjacency[a][b]
        except KeyError:
            raise KeyError(f"no traffic edge between {a} and {b}") from None

    def neighbors(self, c: CellId) -> list[CellId]:
        return list(self.adjacency.get(c, ()))

    def directional_probability(self, a: CellId, b: CellId) -> float:
        """Normalized frequency of edge {a, b} from a's side: the share of
        a's total incident crossings that used this edge."""
        total = sum(e.count for e in self.adjacency[a].values())
        return self.adjacency[a][b].count / total if total else 0.0

    def edge_distance_km(self, a: CellId, b: CellId) -> float:
        return haversine_km(self.centers[a], self.centers[b])

    def save(self, path) -> None:
        doc = {
            "reliability_lambda": self.reliability_lambda,
            "nodes": [[c.q, c.r, self.centers[c].lat, self.centers[c].lon]
                      for c in sorted(self.nodes)],
            "edges": [[a.q, a.r, b.q, b.r, e.count, e.prob_weight, e.mean_speed, e.cost]
                      for (a, b), e in sorted(self._undirected_edges().items())],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "TrafficGraph":
        with open(path) as fh:
            doc = json.load(fh)
        centers = {CellId(int(q), int(r)): GeoCoord(lat, lon)
                   for q, r, lat, lon in doc["nodes"]}
        adjacency: dict[CellId, dict[CellId, EdgeStats]] = {c: {} for c in centers}
        for q1, r1, q2, r2, count, pw, speed, cost in doc["edges"]:
            a, b = CellId(int(q1), int(r1)), CellId(int(q2), int(r2))
            stats = EdgeStats(int(count), pw, speed, cost)
            adjacency[a][b] = stats
            adjacency[b][a] = stats
        return cls(nodes=frozenset(centers), centers=centers, adjacency=adjacency,
                   reliability_lambda=float(doc.get("reliability_lambda", 1.0)))

    def _undirected_edges(self) -> dict[tuple[CellId, CellId], EdgeStats]:
        out = {}
        for a, nbrs in self.adjacency.items():
            for b, e in nbrs.items():
                key = (a, b) if a <= b else (b, a)
                out[key] = e
        return out


def build_graph(grid: WorldGrid, trajectories: Iterable[Trajectory],
                reliability_lambda: float = 1.0,
                resample_interval: float = 60.0) -> TrafficGraph:
    """Accumulate cell-to-cell transitions from trajectories into a graph.

    Directed counts are kept internally; the public edge is undirected with
    count N_ab + N_ba. The per-endpoint transition frequency of edge {a, b}
    is its undirected count normalized by all of that endpoint's incident
    counts, and prob_weight averages the two endpoint frequencies.
    Consecutive runs in non-adjacent cells (data gaps) contribute nothing
    and are tallied in gap_count.
    """
    if reliability_lambda < 0:
        raise ValueError("reliability_lambda must be >= 0")
    directed: dict[tuple[CellId, CellId], int] = defaultdict(int)
    speed_sum: dict[tuple[CellId, CellId], float] = defaultdict(float)
    gaps = 0
    for traj in trajectories:
        if len(traj.points) < 2:
            continue
        runs = discretize(grid, resample(traj, resample_interval))
        for (a, sa), (b, sb) in zip(runs, runs[1:]):
            if axial_distance(a, b) != 1:
                gaps += 1
                continue
            directed[(a, b)] += 1
            key = (a, b) if a <= b else (b, a)
            speed_sum[key] += 0.5 * (sa + sb)

    und_count: dict[tuple[CellId, CellId], int] = defaultdict(int)
    for (a, b), n in directed.items():
        key = (a, b) if a <= b else (b, a)
        und_count[key] += n
    node_total: dict[CellId, int] = defaultdict(int)
    for (a, b), n in und_count.items():
        node_total[a] += n
        node_total[b] += n

    adjacency: dict[CellId, dict[CellId, EdgeStats]] = defaultdict(dict)
    for (a, b), n in und_count.items():
        p_ab = n / node_total[a]
        p_ba = n / node_total[b]
        prob_weight = 0.5 * (p_ab + p_ba)
        mean_speed = max(speed_sum[(a, b)] / n, MIN_EDGE_SPEED_KNOTS)
        dist_km = haversine_km(grid.centers[a], grid.centers[b])
        cost = dist_km / (mean_speed * KNOTS_TO_KMH) + reliability_lambda * (1.0 - prob_weight)
        stats = EdgeStats(count=n, prob_weight=prob_weight, mean_speed=mean_speed, cost=cost)
        adjacency[a][b] = stats
        adjacency[b][a] = stats

    nodes = frozenset(adjacency)
    centers = {c: grid.centers[c] for c in nodes}
    return TrafficGraph(nodes=nodes, centers=centers, adjacency=dict(adjacency),
                        reliability_lambda=reliability_lambda,
                        directed_counts=dict(directed), gap_count=gaps)


def bfs_distances(g: TrafficGraph, source: CellId) -> dict[CellId, int]:
    """Hop distance from source to every reachable graph node."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        c = queue.popleft()
        for n in g.adjacency.get(c, ()):
            if n not in dist:
                dist[n] = dist[c] + 1
                queue.append(n)
    return dist


def lattice_distances(grid: WorldGrid, source: CellId) -> dict[CellId, int]:
    """Hop distance over the full water-cell adjacency of the grid."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        c = queue.popleft()
        for dq, dr in AXIAL_DIRECTIONS:
            n = CellId(c.q + dq, c.r + dr)
            if n in grid.cells and n not in dist:
                dist[n] = dist[c] + 1
                queue.append(n)
    return dist


def hop_distance(g: TrafficGraph, s: CellId, goal: CellId) -> int:
    """Minimum number of graph edges between s and goal."""
    if s not in g.nodes or goal not in g.nodes:
        raise KeyError("both endpoints must be graph nodes")
    dist = bfs_distances(g, s)
    if goal not in dist:
        raise ValueError(f"unreachable goal: no path {s} -> {goal}")
    return dist[goal]


def weighted_shortest_path(
    g: TrafficGraph, s: CellId, goal: CellId,
    cost_fn: Callable[[EdgeStats], float] | None = None,
) -> tuple[list[CellId], float]:
    """Cost-minimal path under EdgeStats.cost (or a caller-supplied cost).

    Ties resolve deterministically: the frontier pops lexicographically
    smaller cells first and neighbors relax in sorted order.
    """
    if s not in g.nodes or goal not in g.nodes:
        raise KeyError("both endpoints must be graph nodes")
    fn = cost_fn or (lambda e: e.cost)
    best = {s: 0.0}
    parent: dict[CellId, CellId] = {}
    heap: list[tuple[float, CellId]] = [(0.0, s)]
    settled: set[CellId] = set()
    while heap:
        d, c = heapq.heappop(heap)
        if c in settled:
            continue
        settled.add(c)
        if c == goal:
            break
        for n in sorted(g.adjacency[c]):
            nd = d + fn(g.adjacency[c][n])
            if n not in best or nd < best[n]:
                best[n] = nd
                parent[n] = c
                heapq.heappush(heap, (nd, n))
    if goal not in settled:
        raise ValueError(f"unreachable goal: no path {s} -> {goal}")
    path = [goal]
    while path[-1] != s:
        path.append(parent[path[-1]])
    path.reverse()
    return path, best[goal]


def load_trajectories(path) -> list[Trajectory]:
    """Read trajectories from CSV ``vessel_id,timestamp,lat,lon,sog,cog``.

    Timestamps may be epoch seconds or ISO-8601 (a trailing Z is accepted).
    """
    grouped: dict[str, list[TrajectoryPoint]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            t = _parse_time(row["timestamp"])
            grouped[row["vessel_id"]].append(TrajectoryPoint(
                t, GeoCoord(float(row["lat"]), float(row["lon"])),
                float(row["sog"]), float(row["cog"]) % 360.0))
    return [Trajectory(vid, pts) for vid, pts in grouped.items()]


def save_trajectories(path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vessel_id", "timestamp", "lat", "lon", "sog", "cog"])
        for traj in trajectories:
            for p in traj.points:
                writer.writerow([traj.vessel_id, f"{p.t:.0f}", f"{p.pos.lat:.6f}",
                                 f"{p.pos.lon:.6f}", f"{p.sog:.3f}", f"{p.cog:.2f}"])


def _parse_time(raw: str) -> float:
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        pass
    dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()
