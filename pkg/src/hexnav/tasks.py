"""Training task set and periodic weighted start-goal sampling.

Sampling is uniform by default; every time the per-environment step counter
crosses a multiple of the threshold, a prioritized window opens in which
less-completed tasks are drawn with higher probability. Windows triggered
mid-window queue up and run back to back.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .env import Task
from .hexworld import CellId

DEFAULT_THRESHOLD_STEPS = 62_500
DEFAULT_WINDOW_STEPS = 6_250


@dataclass
class TaskSet:
    tasks: list[Task]
    counters: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.tasks:
            raise ValueError("task set must contain at least one task")
        if not self.counters:
            self.counters = [0] * len(self.tasks)
        if len(self.counters) != len(self.tasks):
            raise ValueError("one completion counter per task required")

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["start_q", "start_r", "goal_q", "goal_r"])
            for t in self.tasks:
                writer.writerow([t.start.q, t.start.r, t.goal.q, t.goal.r])

    @classmethod
    def load(cls, path) -> "TaskSet":
        tasks = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                tasks.append(Task(CellId(int(row["start_q"]), int(row["start_r"])),
                                  CellId(int(row["goal_q"]), int(row["goal_r"]))))
        return cls(tasks)


@dataclass
class SamplerState:
    threshold: int = DEFAULT_THRESHOLD_STEPS
    window_len: int = DEFAULT_WINDOW_STEPS
    steps_seen: int = 0
    window_end: int = 0
    pending_windows: int = 0

    @property
    def in_window(self) -> bool:
        return self.steps_seen < self.window_end


def record_step(state: SamplerState) -> None:
    """Advance the step counter, opening or queueing prioritized windows."""
    state.steps_seen += 1
    if state.steps_seen % state.threshold == 0:
        if state.in_window:
            state.pending_windows += 1
        else:
            state.window_end = state.steps_seen + state.window_len
    elif not state.in_window and state.pending_windows > 0:
        state.pending_windows -= 1
        state.window_end = state.steps_seen + state.window_len


def record_completion(tasks: TaskSet, task_index: int) -> None:
    tasks.counters[task_index] += 1


def task_probabilities(tasks: TaskSet) -> np.ndarray:
    """In-window sampling distribution: weight each task by how far its
    completion count trails the current maximum, plus one."""
    c = np.asarray(tasks.counters, dtype=float)
    w = c.max() - c + 1.0
    return w / w.sum()


def sample_task(state: SamplerState, tasks: TaskSet, rng: np.random.Generator) -> int:
    """Draw a task index: uniform outside windows, weighted inside."""
    n = len(tasks.tasks)
    if state.in_window:
        return int(rng.choice(n, p=task_probabilities(tasks)))
    return int(rng.integers(n))
