"""Classical route baselines over the traffic graph, plus a replay scorer
that runs any edge-connected route through the environment's reward."""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass
from typing import Callable, Sequence

from .geo import KNOTS_TO_KMH, haversine_km
from .hexworld import CellId, direction_index
from .traffic import EdgeStats, TrafficGraph, bfs_distances
from .env import Action, RewardBreakdown, RouteEnv, Task


@dataclass
class RouteResult:
    path: list[CellId]
    cost: float  # sum of EdgeStats.cost along path, hours
    complete: bool
    expanded: int = 0  # search nodes settled (0 for greedy)


def path_cost(graph: TrafficGraph, path: Sequence[CellId]) -> float:
    return sum(graph.edge(a, b).cost for a, b in zip(path, path[1:]))


def greedy_route(graph: TrafficGraph, task: Task, max_steps: int | None = None,
                 distance_fn: Callable[[CellId], float] | None = None) -> RouteResult:
    """Myopic descent: hop to the non-backtracking neighbor with the least
    distance-to-goal, breaking ties by direction index.

    distance_fn defaults to hop distance over the traffic graph; a lattice
    metric can be supplied to study myopic behavior around obstacles. Dead
    ends and exhausted step budgets yield a partial path flagged incomplete.
    """
    if max_steps is None:
        max_steps = 4 * len(graph.nodes)
    if distance_fn is None:
        dist = bfs_distances(graph, task.goal)
        if task.start not in dist:
            raise ValueError(f"unreachable goal: no path {task.start} -> {task.goal}")
        distance_fn = lambda c: dist.get(c, float("inf"))

    path = [task.start]
    prev: CellId | None = None
    current = task.start
    for _ in range(max_steps):
        if current == task.goal:
            return RouteResult(path, path_cost(graph, path), True)
        options = [n for n in graph.neighbors(current)
                   if n != prev and distance_fn(n) < float("inf")]
        if not options:
            return RouteResult(path, path_cost(graph, path), False)
        nxt = min(options, key=lambda n: (distance_fn(n), direction_index(current, n)))
        prev, current = current, nxt
        path.append(current)
    complete = current == task.goal
    return RouteResult(path, path_cost(graph, path), complete)


def _astar(graph: TrafficGraph, task: Task,
           heuristic: Callable[[CellId], float]) -> RouteResult:
    """Best-first search minimizing EdgeStats.cost + admissible heuristic."""
    if task.start not in graph.nodes or task.goal not in graph.nodes:
        raise KeyError("both task endpoints must be graph nodes")
    best = {task.start: 0.0}
    parent: dict[CellId, CellId] = {}
    heap: list[tuple[float, CellId]] = [(heuristic(task.start), task.start)]
    settled: set[CellId] = set()
    expanded = 0
    while heap:
        _, c = heapq.heappop(heap)
        if c in settled:
            continue
        settled.add(c)
        expanded += 1
        if c == task.goal:
            path = [c]
            while path[-1] != task.start:
                path.append(parent[path[-1]])
            path.reverse()
            return RouteResult(path, best[c], True, expanded)
        for n in sorted(graph.adjacency[c]):
            nd = best[c] + graph.adjacency[c][n].cost
            if n not in best or nd < best[n]:
                best[n] = nd
                parent[n] = c
                heapq.heappush(heap, (nd + heuristic(n), n))
    raise ValueError(f"unreachable goal: no path {task.start} -> {task.goal}")


def dijkstra_route(graph: TrafficGraph, task: Task) -> RouteResult:
    """Cost-minimal route (uniform-cost search)."""
    return _astar(graph, task, lambda c: 0.0)


def astar_route(graph: TrafficGraph, task: Task) -> RouteResult:
    """Cost-minimal route guided by great-circle time at the graph's top
    mean edge speed; the heuristic is admissible, so costs match Dijkstra."""
    v_max = max((e.mean_speed for nbrs in graph.adjacency.values() for e in nbrs.values()),
                default=None)
    if v_max is None:
        raise ValueError("graph has no edges")
    goal_center = graph.centers[task.goal]
    h = lambda c: haversine_km(graph.centers[c], goal_center) / (v_max * KNOTS_TO_KMH)
    return _astar(graph, task, h)


def snap_speed(levels: Sequence[float], speed: float) -> int:
    """Index of the discrete level nearest to speed (ties to the lower level)."""
    return min(range(len(levels)), key=lambda i: (abs(levels[i] - speed), levels[i]))


def replay_score(env: RouteEnv, route: Sequence[CellId],
                 speed_policy: Callable[[EdgeStats], float] | Sequence[float] | None = None,
                 seed: int = 0, snap_speeds: bool = True,
                 ) -> tuple[float, list[RewardBreakdown], bool]:
    """Drive the environment along a fixed route and return the episodic
    return it would emit, the per-step reward breakdowns, and whether the
    full route was traversed.

    Speeds come from speed_policy (a per-edge callable or one value per hop);
    by default each edge's mean speed is used. With snap_speeds the speed is
    snapped to the nearest discrete level so baseline and agent returns share
    one action model.
    """
    route = [CellId(*c) for c in route]
    if len(route) < 2:
        return 0.0, [], True
    graph = env.graph
    for a, b in zip(route, route[1:]):
        if not graph.has_edge(a, b):
            raise ValueError(f"route breaks adjacency between {a} and {b}")

    saved_masking = env.config.masking_enabled
    env.config.masking_enabled = False  # replay follows the route verbatim
    try:
        _, _ = env.reset(Task(route[0], route[-1]), seed=seed)
        total = 0.0
        breakdowns: list[RewardBreakdown] = []
        for hop, (a, b) in enumerate(zip(route, route[1:])):
            edge = graph.edge(a, b)
            if speed_policy is None:
                speed = edge.mean_speed
            elif callable(speed_policy):
                speed = speed_policy(edge)
            else:
                speed = speed_policy[hop]
            if snap_speeds:
                idx = snap_speed(env.config.speed_levels, speed)
                out = env.step(Action(direction_index(a, b), idx))
            else:
                out = env._advance(b, speed)
            total += out.reward
            breakdowns.append(out.info["breakdown"])
            if out.terminated or out.truncated:
                return total, breakdowns, b == route[-1] and out.terminated
        return total, breakdowns, True
    finally:
        env.config.masking_enabled = saved_masking


REPORT_COLUMNS = ["task_id", "method", "return", "steps", "complete"]


def write_report_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
