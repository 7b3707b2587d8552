"""Time-varying wind vectors per water cell, from files or a synthesizer."""

from __future__ import annotations

import csv
import math
from bisect import bisect_left
from datetime import datetime, timezone
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .hexworld import CellId, WorldGrid
from .traffic import _parse_time

HOUR = 3600


class WindSample(NamedTuple):
    u: float  # m/s eastward
    v: float  # m/s northward
    speed: float  # m/s
    direction: float  # radians in [-pi, pi], atan2(v, u)

    @classmethod
    def from_uv(cls, u: float, v: float) -> "WindSample":
        return cls(u, v, math.hypot(u, v), math.atan2(v, u))


class WindField:
    """Hourly wind vectors for every water cell of a grid."""

    def __init__(self, times: Sequence[int], data: dict[CellId, np.ndarray]):
        self.times = [int(t) for t in times]
        if self.times != sorted(self.times):
            raise ValueError("wind times must be sorted")
        self._data = data
        for cell, arr in data.items():
            if arr.shape != (len(self.times), 2):
                raise ValueError(f"wind data for {cell} has wrong shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite wind components at {cell}")

    @property
    def cells(self) -> set[CellId]:
        return set(self._data)

    def days(self) -> list[int]:
        """Epoch seconds of the distinct UTC days covered, sorted."""
        seen = sorted({t - t % (24 * HOUR) for t in self.times})
        return seen

    def first_time_on_day(self, day: int) -> int:
        for t in self.times:
            if t - t % (24 * HOUR) == day:
                return t
        raise ValueError(f"no wind hours on day {day}")

    def sample(self, cell: CellId, t: float) -> WindSample:
        """Nearest-hour wind at a covered cell; no temporal interpolation."""
        if cell not in self._data:
            raise KeyError(f"cell {cell} not covered by wind field")
        if not self.times[0] <= t <= self.times[-1]:
            raise ValueError(f"time {t} outside wind coverage "
                             f"[{self.times[0]}, {self.times[-1]}]")
        i = bisect_left(self.times, t)
        if i > 0 and (i == len(self.times) or t - self.times[i - 1] < self.times[i] - t):
            i -= 1
        u, v = self._data[cell][i]
        return WindSample.from_uv(float(u), float(v))

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hour_iso8601", "q", "r", "u", "v"])
            for i, t in enumerate(self.times):
                stamp = datetime.fromtimestamp(t, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
                for cell in sorted(self._data):
                    u, v = self._data[cell][i]
                    writer.writerow([stamp, cell.q, cell.r, repr(float(u)), repr(float(v))])


def load_wind(grid: WorldGrid, path) -> WindField:
    """Load a wind CSV; every water cell must be covered at every hour."""
    raw: dict[tuple[CellId, int], tuple[float, float]] = {}
    hours: set[int] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            t = int(_parse_time(row["hour_iso8601"]))
            cell = CellId(int(row["q"]), int(row["r"]))
            hours.add(t)
            raw[(cell, t)] = (float(row["u"]), float(row["v"]))
    times = sorted(hours)
    if not times:
        raise ValueError(f"wind file {path} contains no samples")
    data: dict[CellId, np.ndarray] = {}
    for cell in sorted(grid.cells):
        arr = np.empty((len(times), 2))
        for i, t in enumerate(times):
            if (cell, t) not in raw:
                raise ValueError(f"wind file missing sample for cell {cell} at hour {t}")
            arr[i] = raw[(cell, t)]
        data[cell] = arr
    return WindField(times, data)


def synth_wind(grid: WorldGrid, times: Iterable[int], seed: int = 0,
               base_speed: float = 6.0, gust_amplitude: float = 4.0) -> WindField:
    """Deterministic synthetic wind: a uniform base flow plus a smooth,
    low-frequency gust term bounded by gust_amplitude.

    Sampled speeds never exceed base_speed + gust_amplitude; with zero gust
    amplitude the field is uniform with magnitude base_speed.
    """
    times = [int(t) for t in times]
    if not times:
        raise ValueError("need at least one wind time")
    rng = np.random.default_rng(seed)
    theta0 = rng.uniform(0.0, 2.0 * math.pi)
    base_u = base_speed * math.cos(theta0)
    base_v = base_speed * math.sin(theta0)
    lon_min, lat_min, lon_max, lat_max = grid.bbox
    k = rng.integers(1, 4, size=6)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=2)

    data: dict[CellId, np.ndarray] = {}
    for cell in sorted(grid.cells):
        center = grid.centers[cell]
        px = 2.0 * math.pi * (center.lon - lon_min) / (lon_max - lon_min)
        py = 2.0 * math.pi * (center.lat - lat_min) / (lat_max - lat_min)
        arr = np.empty((len(times), 2))
        for i, t in enumerate(times):
            h = (t - times[0]) / HOUR
            mag = gust_amplitude * 0.5 * (1.0 + math.sin(k[0] * px + k[1] * py
                                                         + 0.25 * k[2] * h + phase[0]))
            ang = 2.0 * math.pi * math.sin(k[3] * px + k[4] * py
                                           + 0.25 * k[5] * h + phase[1])
            arr[i, 0] = base_u + mag * math.cos(ang)
            arr[i, 1] = base_v + mag * math.sin(ang)
        data[cell] = arr
    return WindField(times, data)


def hour_range(start: str | int, hours: int) -> list[int]:
    """Epoch seconds for `hours` consecutive UTC hours from a start instant."""
    t0 = int(_parse_time(str(start)))
    return [t0 + i * HOUR for i in range(hours)]
