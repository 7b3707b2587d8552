"""Spherical geometry primitives shared by the grid, graph, and environment."""

from __future__ import annotations

import math
from typing import NamedTuple

EARTH_RADIUS_KM = 6371.0
KNOTS_TO_KMH = 1.852


class GeoCoord(NamedTuple):
    """A WGS-agnostic point on the sphere, degrees. lat in [-90, 90], lon in [-180, 180)."""

    lat: float
    lon: float


def haversine_km(a: GeoCoord, b: GeoCoord) -> float:
    """Great-circle distance between two points, in km (sphere radius 6371 km)."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    # Clamp guards rounding noise for antipodal-ish inputs.
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing_math(a: GeoCoord, b: GeoCoord) -> float:
    """Initial great-circle heading from a to b as a math-convention angle.

    Returned in radians in [-pi, pi], measured counterclockwise from east, so it
    lives in the same angular frame as a wind vector's atan2(v, u) direction.
    """
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    east = math.sin(dlam) * math.cos(phi2)
    north = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return math.atan2(north, east)
