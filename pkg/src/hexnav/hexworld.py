"""Hexagonal water grid over a geographic bounding box.

Cells live on a planar axial lattice (pointy-top, uniform center spacing)
that is pinned to the sphere through an equirectangular projection anchored
at the bbox center. This keeps the six-neighbor topology and near-uniform
step distance of a geodesic hex index without a geospatial dependency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .geo import EARTH_RADIUS_KM, GeoCoord, haversine_km


class CellId(NamedTuple):
    """Axial hex coordinates; (q, r) uniquely identifies a lattice cell."""

    q: int
    r: int


# The six axial directions, in fixed action order:
# 0=E, 1=NE, 2=NW, 3=W, 4=SW, 5=SE (r increases northward).
AXIAL_DIRECTIONS = (
    (1, 0),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (0, -1),
    (1, -1),
)


def axial_distance(a: CellId, b: CellId) -> int:
    """Hex lattice distance between two cells, ignoring any water mask."""
    dq = a.q - b.q
    dr = a.r - b.r
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def direction_index(a: CellId, b: CellId) -> int:
    """Direction slot 0-5 of the adjacent cell b as seen from a."""
    delta = (b.q - a.q, b.r - a.r)
    try:
        return AXIAL_DIRECTIONS.index(delta)
    except ValueError:
        raise ValueError(f"cells {a} and {b} are not hex-adjacent") from None


LandMask = Callable[[float, float], bool]
"""Predicate (lat, lon) -> True when the location is water."""


class RasterLandMask:
    """Water mask backed by a regular lat/lon grid of boolean samples.

    A query returns the value of the nearest grid point, so the raster must
    cover the bbox it is used with.
    """

    def __init__(self, lats: Sequence[float], lons: Sequence[float], water: np.ndarray):
        self.lats = np.asarray(lats, dtype=float)
        self.lons = np.asarray(lons, dtype=float)
        water = np.asarray(water, dtype=bool)
        if water.shape != (len(self.lats), len(self.lons)):
            raise ValueError("raster shape does not match axis lengths")
        self.water = water

    @classmethod
    def from_csv(cls, path) -> "RasterLandMask":
        """Load from CSV rows ``lat,lon,is_water`` describing a complete grid."""
        points: dict[tuple[float, float], bool] = {}
        with open(path, newline="") as fh:
            for line_no, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if line_no == 0 and not _is_number(parts[0]):
                    continue  # header
                lat, lon, flag = float(parts[0]), float(parts[1]), parts[2].strip()
                points[(lat, lon)] = flag in ("1", "true", "True")
        lats = sorted({k[0] for k in points})
        lons = sorted({k[1] for k in points})
        water = np.zeros((len(lats), len(lons)), dtype=bool)
        for i, la in enumerate(lats):
            for j, lo in enumerate(lons):
                if (la, lo) not in points:
                    raise ValueError(f"raster mask missing grid point ({la}, {lo})")
                water[i, j] = points[(la, lo)]
        return cls(lats, lons, water)

    def __call__(self, lat: float, lon: float) -> bool:
        i = int(np.argmin(np.abs(self.lats - lat)))
        j = int(np.argmin(np.abs(self.lons - lon)))
        return bool(self.water[i, j])


class PolygonLandMask:
    """Water mask defined by land polygons; a point is water when it falls
    outside every polygon (even-odd rule, holes included)."""

    def __init__(self, rings: list[list[tuple[float, float]]]):
        # rings: closed or open sequences of (lon, lat) vertices
        self.rings = [list(r) for r in rings]

    @classmethod
    def from_geojson(cls, path) -> "PolygonLandMask":
        with open(path) as fh:
            doc = json.load(fh)
        rings: list[list[tuple[float, float]]] = []
        for geom in _iter_geometries(doc):
            if geom["type"] == "Polygon":
                rings.extend([[(x, y) for x, y in ring] for ring in geom["coordinates"]])
            elif geom["type"] == "MultiPolygon":
                for poly in geom["coordinates"]:
                    rings.extend([[(x, y) for x, y in ring] for ring in poly])
            else:
                raise ValueError(f"unsupported land-mask geometry: {geom['type']}")
        return cls(rings)

    def __call__(self, lat: float, lon: float) -> bool:
        crossings = 0
        for ring in self.rings:
            crossings += _ray_crossings(lon, lat, ring)
        return crossings % 2 == 0


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _iter_geometries(doc: dict) -> Iterable[dict]:
    if doc.get("type") == "FeatureCollection":
        for feat in doc["features"]:
            yield feat["geometry"]
    elif doc.get("type") == "Feature":
        yield doc["geometry"]
    else:
        yield doc


def _ray_crossings(x: float, y: float, ring: Sequence[tuple[float, float]]) -> int:
    """Count crossings of a +x ray from (x, y) with a polygon ring."""
    n = len(ring)
    crossings = 0
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_hit = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if x_hit > x:
                crossings += 1
    return crossings


@dataclass
class WorldGrid:
    """Immutable water lattice: bbox, spacing, water cells, and cell centers."""

    bbox: tuple[float, float, float, float]  # lon_min, lat_min, lon_max, lat_max
    cell_size_km: float
    cells: frozenset[CellId]
    centers: dict[CellId, GeoCoord]
    # Full in-bbox lattice (water and land), kept for point location.
    _lattice_ids: list[CellId] = field(repr=False, default_factory=list)
    _lattice_lat: np.ndarray = field(repr=False, default=None)
    _lattice_lon: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not self._lattice_ids:
            ids, lat, lon = _enumerate_lattice(self.bbox, self.cell_size_km)
            self._lattice_ids = ids
            self._lattice_lat = lat
            self._lattice_lon = lon

    def contains_point(self, p: GeoCoord) -> bool:
        lon_min, lat_min, lon_max, lat_max = self.bbox
        return lat_min <= p.lat <= lat_max and lon_min <= p.lon <= lon_max

    def neighbor_slots(self, c: CellId) -> tuple[CellId | None, ...]:
        """Water neighbor (or None) for each of the six direction slots of c."""
        out = []
        for dq, dr in AXIAL_DIRECTIONS:
            n = CellId(c.q + dq, c.r + dr)
            out.append(n if n in self.cells else None)
        return tuple(out)

    def neighbors(self, c: CellId) -> list[CellId]:
        """Water neighbors of c in direction order (missing slots omitted)."""
        if c not in self.cells:
            raise KeyError(f"cell {c} is not a water cell of this grid")
        return [n for n in self.neighbor_slots(c) if n is not None]

    def locate(self, p: GeoCoord) -> CellId:
        """Cell whose center is nearest to p; lexicographic (q, r) tie-break.

        Raises ValueError for points outside the bbox or whose nearest
        lattice cell was clipped as land ("off-grid position").
        """
        if not self.contains_point(p):
            raise ValueError(f"off-grid position: {p} outside bbox")
        d = _haversine_vec(p.lat, p.lon, self._lattice_lat, self._lattice_lon)
        cell = self._lattice_ids[int(np.argmin(d))]
        if cell not in self.cells:
            raise ValueError(f"off-grid position: nearest cell {cell} is land")
        return cell

    def save(self, path) -> None:
        doc = {
            "bbox": list(self.bbox),
            "cell_size_km": self.cell_size_km,
            "cells": [[c.q, c.r, self.centers[c].lat, self.centers[c].lon]
                      for c in sorted(self.cells)],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "WorldGrid":
        with open(path) as fh:
            doc = json.load(fh)
        bbox = tuple(doc["bbox"])
        cells = frozenset(CellId(int(q), int(r)) for q, r, _, _ in doc["cells"])
        centers = {CellId(int(q), int(r)): GeoCoord(lat, lon)
                   for q, r, lat, lon in doc["cells"]}
        grid = cls(bbox=bbox, cell_size_km=float(doc["cell_size_km"]),
                   cells=cells, centers=centers)
        lattice = set(grid._lattice_ids)
        stray = cells - lattice
        if stray:
            raise ValueError(f"cell {sorted(stray)[0]} is not on the lattice for this bbox")
        return grid


def _project(bbox, lat: float, lon: float) -> tuple[float, float]:
    """Equirectangular km coordinates anchored at the bbox center."""
    lon_min, lat_min, lon_max, lat_max = bbox
    lat0 = 0.5 * (lat_min + lat_max)
    lon0 = 0.5 * (lon_min + lon_max)
    x = EARTH_RADIUS_KM * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_KM * math.radians(lat - lat0)
    return x, y


def _unproject(bbox, x: float, y: float) -> GeoCoord:
    lon_min, lat_min, lon_max, lat_max = bbox
    lat0 = 0.5 * (lat_min + lat_max)
    lon0 = 0.5 * (lon_min + lon_max)
    lat = lat0 + math.degrees(y / EARTH_RADIUS_KM)
    lon = lon0 + math.degrees(x / (EARTH_RADIUS_KM * math.cos(math.radians(lat0))))
    return GeoCoord(lat, lon)


def _cell_center(bbox, cell_size_km: float, c: CellId) -> GeoCoord:
    s = cell_size_km
    x = s * (c.q + 0.5 * c.r)
    y = s * (math.sqrt(3.0) / 2.0) * c.r
    return _unproject(bbox, x, y)


def _enumerate_lattice(bbox, cell_size_km: float):
    """All lattice cells whose centers fall inside the bbox, lexicographically
    ordered by (q, r) so that argmin ties resolve deterministically."""
    lon_min, lat_min, lon_max, lat_max = bbox
    s = cell_size_km
    x_min, y_min = _project(bbox, lat_min, lon_min)
    x_max, y_max = _project(bbox, lat_max, lon_max)
    row_h = s * math.sqrt(3.0) / 2.0
    ids: list[CellId] = []
    for r in range(math.ceil(y_min / row_h), math.floor(y_max / row_h) + 1):
        lo = math.ceil(x_min / s - 0.5 * r)
        hi = math.floor(x_max / s - 0.5 * r)
        for q in range(lo, hi + 1):
            ids.append(CellId(q, r))
    ids.sort()
    lat = np.empty(len(ids))
    lon = np.empty(len(ids))
    for i, c in enumerate(ids):
        center = _cell_center(bbox, s, c)
        lat[i] = center.lat
        lon[i] = center.lon
    return ids, lat, lon


def _haversine_vec(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    phi1 = math.radians(lat)
    phi2 = np.radians(lats)
    dphi = phi2 - phi1
    dlam = np.radians(lons - lon)
    h = np.sin(dphi / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def build_world(bbox, cell_size_km: float, land_mask: LandMask | None = None) -> WorldGrid:
    """Build the water grid for a bbox, clipping cells whose centers are land.

    ``land_mask`` is any (lat, lon) -> is_water predicate (see RasterLandMask
    and PolygonLandMask); None keeps every cell.
    """
    lon_min, lat_min, lon_max, lat_max = bbox
    if not (lon_min < lon_max and lat_min < lat_max):
        raise ValueError("bbox must be (lon_min, lat_min, lon_max, lat_max), well-ordered")
    if cell_size_km <= 0:
        raise ValueError("cell_size_km must be positive")
    ids, lat, lon = _enumerate_lattice(bbox, cell_size_km)
    cells = set()
    centers: dict[CellId, GeoCoord] = {}
    for i, c in enumerate(ids):
        center = GeoCoord(float(lat[i]), float(lon[i]))
        if land_mask is None or land_mask(center.lat, center.lon):
            cells.add(c)
            centers[c] = center
    if not cells:
        raise ValueError("no navigable cells: land mask covers the entire bbox")
    return WorldGrid(bbox=tuple(bbox), cell_size_km=float(cell_size_km),
                     cells=frozenset(cells), centers=centers,
                     _lattice_ids=ids, _lattice_lat=lat, _lattice_lon=lon)
