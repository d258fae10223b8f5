"""GeoJSON geometry for cells and partitions.

Cell boundaries are built in face (u, v) coordinates, where cell edges
are straight lines, then projected to latitude and longitude.  Coarse
cells get extra points along each edge so the curvature of the
projected edge survives; deep cells are close enough to planar that
corners suffice.

Longitude wrap is handled by unwinding: successive boundary longitudes
are unwrapped into a continuous planar ring, which is then cut into
[-180, 180] strips.  A ring whose longitudes wind by a full 360 degrees
encloses a pole, and gets a synthetic cap run along the +/-90 latitude
line before cutting.  Cells that cross the antimeridian therefore come
back as a MultiPolygon with one part on each side, and everything emits
exterior rings in counterclockwise order with [lon, lat] positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import labelcodec
from .cellgeo import (
    CellId,
    UnitVec,
    cell_area_km2,
    cell_uv_bounds,
    face_uv_to_xyz,
)
from .partition import AdaptivePartition

# Extra boundary points per edge for cells this coarse or coarser.
COARSE_LEVEL = 3
COARSE_SAMPLES_PER_EDGE = 8

_ROUND = 7
_MIN_RING_AREA = 1e-12


class GeoJsonError(ValueError):
    """Invalid bbox string or malformed geometry request."""


@dataclass(frozen=True)
class CellBounds:
    """Latitude/longitude bounding box of a cell.

    Longitude cover is a union of one or two [west, east] intervals in
    [-180, 180]; two intervals means the cell crosses the antimeridian.
    A pole cell covers all longitudes.
    """

    lat_min: float
    lat_max: float
    lon_intervals: tuple[tuple[float, float], ...]


def _auto_samples(level: int) -> int:
    return COARSE_SAMPLES_PER_EDGE if level <= COARSE_LEVEL else 1


def cell_boundary_xyz(cell: CellId, samples_per_edge: int | None = None) -> list[UnitVec]:
    """Boundary points in counterclockwise order, corners included."""
    if samples_per_edge is None:
        samples_per_edge = _auto_samples(cell.level)
    if not (isinstance(samples_per_edge, int) and samples_per_edge >= 1):
        raise GeoJsonError(
            f"samples_per_edge must be a positive integer, got {samples_per_edge!r}"
        )
    (u_lo, u_hi), (v_lo, v_hi) = cell_uv_bounds(cell)
    corners = [(u_lo, v_lo), (u_hi, v_lo), (u_hi, v_hi), (u_lo, v_hi)]
    points = []
    for (ua, va), (ub, vb) in zip(corners, corners[1:] + corners[:1]):
        for k in range(samples_per_edge):
            t = k / samples_per_edge
            points.append(face_uv_to_xyz(cell.face, ua + t * (ub - ua), va + t * (vb - va)))
    return points


def _unwrap(points: Sequence[UnitVec]) -> tuple[list[tuple[float, float]], float]:
    """(lon, lat) ring with continuous longitudes, plus the total winding.

    Points at a pole have no longitude of their own and reuse the
    running value.  Winding is the longitude change around the closed
    ring: 0 for ordinary cells, +/-360 when a pole is enclosed.
    """
    ring: list[tuple[float, float]] = []
    lon_prev = None
    for vec in points:
        ll = vec.to_latlon()
        at_pole = abs(ll.lat) >= 90.0 - 1e-12
        if lon_prev is None:
            lon = 0.0 if at_pole else ll.lon
        elif at_pole:
            lon = lon_prev
        else:
            delta = math.remainder(ll.lon - lon_prev, 360.0)
            lon = lon_prev + delta
        ring.append((lon, ll.lat))
        lon_prev = lon
    closing = math.remainder(ring[0][0] - lon_prev, 360.0)
    winding = (lon_prev + closing) - ring[0][0]
    return ring, winding


def _clip_lon(ring: Sequence[tuple[float, float]], bound: float, keep_left: bool):
    """Sutherland-Hodgman clip of a closed ring against a vertical line."""
    def inside(p):
        return p[0] <= bound if keep_left else p[0] >= bound

    def crossing(p, q):
        t = (bound - p[0]) / (q[0] - p[0])
        return (bound, p[1] + t * (q[1] - p[1]))

    out: list[tuple[float, float]] = []
    for p, q in zip(ring, ring[1:] + ring[:1]):
        if inside(p):
            out.append(p)
            if not inside(q):
                out.append(crossing(p, q))
        elif inside(q):
            out.append(crossing(p, q))
    return out


def _ring_area(ring: Sequence[tuple[float, float]]) -> float:
    """Shoelace signed area; positive means counterclockwise."""
    total = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:] + ring[:1]):
        total += x1 * y2 - x2 * y1
    return 0.5 * total


def _finish_ring(ring: list[tuple[float, float]], shift: float) -> list[list[float]] | None:
    area = _ring_area(ring)
    if abs(area) < _MIN_RING_AREA:
        return None
    if area < 0:
        ring = ring[::-1]
    out = [[round(lon - shift, _ROUND) + 0.0, round(lat, _ROUND) + 0.0] for lon, lat in ring]
    deduped = [out[0]]
    for pos in out[1:]:
        if pos != deduped[-1]:
            deduped.append(pos)
    if len(deduped) < 3:
        return None
    deduped.append(deduped[0])
    return deduped


def _cell_rings(cell: CellId, samples_per_edge: int | None) -> list[list[list[float]]]:
    ring, winding = _unwrap(cell_boundary_xyz(cell, samples_per_edge))
    if abs(winding) > 180.0:
        # Pole inside: close the ring along the pole latitude so the cut
        # below produces an ordinary band polygon.
        cap_lat = 90.0 if winding > 0 else -90.0
        lon_start = ring[0][0]
        ring = ring + [(lon_start + winding, cap_lat), (lon_start, cap_lat)]
    lons = [lon for lon, _ in ring]
    lo, hi = min(lons), max(lons)
    rings = []
    k_min = math.floor((lo + 180.0) / 360.0)
    k_max = math.ceil((hi - 180.0) / 360.0)
    for k in range(k_min, k_max + 1):
        west, east = -180.0 + 360.0 * k, 180.0 + 360.0 * k
        piece = _clip_lon(ring, west, keep_left=False)
        if len(piece) >= 3:
            piece = _clip_lon(piece, east, keep_left=True)
        if len(piece) >= 3:
            finished = _finish_ring(piece, shift=360.0 * k)
            if finished is not None:
                rings.append(finished)
    if not rings:
        raise GeoJsonError(f"cell {labelcodec.encode(cell)} produced no geometry")
    return rings


def cell_geometry(cell: CellId, samples_per_edge: int | None = None) -> dict:
    """GeoJSON Polygon or MultiPolygon for one cell."""
    rings = _cell_rings(cell, samples_per_edge)
    if len(rings) == 1:
        return {"type": "Polygon", "coordinates": [rings[0]]}
    return {"type": "MultiPolygon", "coordinates": [[ring] for ring in rings]}


def cell_feature(
    cell: CellId,
    properties: dict | None = None,
    samples_per_edge: int | None = None,
) -> dict:
    """GeoJSON Feature with label, level, and area properties."""
    props = {
        "label": labelcodec.encode(cell),
        "level": cell.level,
        "area_km2": round(cell_area_km2(cell), 3),
    }
    if properties:
        props.update(properties)
    return {
        "type": "Feature",
        "geometry": cell_geometry(cell, samples_per_edge),
        "properties": props,
    }


def cell_latlon_bounds(cell: CellId) -> CellBounds:
    """Exact latitude/longitude bounds of a cell.

    Cell edges are great-circle arcs, so latitude and longitude
    extremes along an edge occur either at its endpoints or at the
    point where the edge's great circle reaches its highest or lowest
    latitude.  Those candidate points are exact, which keeps the bounds
    tight at every level.
    """
    (u_lo, u_hi), (v_lo, v_hi) = cell_uv_bounds(cell)
    corners = [
        face_uv_to_xyz(cell.face, u, v)
        for u, v in ((u_lo, v_lo), (u_hi, v_lo), (u_hi, v_hi), (u_lo, v_hi))
    ]
    walk: list[UnitVec] = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        walk.append(a)
        walk.extend(_arc_turning_points(a, b))

    ring, winding = _unwrap(walk)
    lat_min = min(lat for _, lat in ring)
    lat_max = max(lat for _, lat in ring)
    if abs(winding) > 180.0:
        if winding > 0:
            lat_max = 90.0
        else:
            lat_min = -90.0
        return CellBounds(lat_min, lat_max, ((-180.0, 180.0),))

    lons = [lon for lon, _ in ring]
    lo, hi = min(lons), max(lons)
    if hi - lo >= 360.0:
        return CellBounds(lat_min, lat_max, ((-180.0, 180.0),))
    shift = 360.0 * math.floor((lo + 180.0) / 360.0)
    lo -= shift
    hi -= shift
    if hi <= 180.0:
        intervals = ((lo, hi),)
    else:
        intervals = ((lo, 180.0), (-180.0, hi - 360.0))
    return CellBounds(lat_min, lat_max, intervals)


def _arc_turning_points(a: UnitVec, b: UnitVec) -> list[UnitVec]:
    """Latitude extremes of the great circle through a and b, if they
    fall strictly inside the short arc from a to b."""
    normal = a.cross(b)
    norm = math.sqrt(normal.x**2 + normal.y**2 + normal.z**2)
    if norm < 1e-15:
        return []
    nx, ny, nz = normal.x / norm, normal.y / norm, normal.z / norm
    # Project the z axis onto the circle's plane: the result points at
    # the circle's highest-latitude point.
    tx, ty, tz = -nz * nx, -nz * ny, 1.0 - nz * nz
    tnorm = math.sqrt(tx * tx + ty * ty + tz * tz)
    if tnorm < 1e-15:
        return []
    candidates = []
    for sign in (1.0, -1.0):
        p = UnitVec(sign * tx / tnorm, sign * ty / tnorm, sign * tz / tnorm)
        if _on_short_arc(a, b, p, UnitVec(nx, ny, nz)):
            candidates.append(p)
    # Keep arc order so longitude unwrapping stays monotone.
    if len(candidates) == 2 and _arc_angle(a, candidates[1]) < _arc_angle(a, candidates[0]):
        candidates.reverse()
    return candidates


def _on_short_arc(a: UnitVec, b: UnitVec, p: UnitVec, normal: UnitVec) -> bool:
    eps = 1e-12
    return a.cross(p).dot(normal) > eps and p.cross(b).dot(normal) > eps


def _arc_angle(a: UnitVec, p: UnitVec) -> float:
    return math.acos(max(-1.0, min(1.0, a.dot(p))))


def parse_bbox(text: str) -> tuple[float, float, float, float]:
    """Parse "west,south,east,north".  West > east wraps the antimeridian."""
    parts = text.split(",")
    if len(parts) != 4:
        raise GeoJsonError("bbox must be west,south,east,north")
    try:
        west, south, east, north = (float(p) for p in parts)
    except ValueError as exc:
        raise GeoJsonError(f"bbox has a non-numeric part: {text!r}") from exc
    if not all(map(math.isfinite, (west, south, east, north))):
        raise GeoJsonError("bbox values must be finite")
    if not (-90.0 <= south <= north <= 90.0):
        raise GeoJsonError("bbox needs -90 <= south <= north <= 90")
    if not (-180.0 <= west <= 180.0 and -180.0 <= east <= 180.0):
        raise GeoJsonError("bbox longitudes must be in [-180, 180]")
    return west, south, east, north


def bounds_intersect_bbox(bounds: CellBounds, bbox: tuple[float, float, float, float]) -> bool:
    west, south, east, north = bbox
    if bounds.lat_max < south or bounds.lat_min > north:
        return False
    if west <= east:
        query = ((west, east),)
    else:
        query = ((west, 180.0), (-180.0, east))
    for lo, hi in bounds.lon_intervals:
        for q_lo, q_hi in query:
            if lo <= q_hi and q_lo <= hi:
                return True
    return False


def leaves_geojson(
    partition: AdaptivePartition,
    bbox: tuple[float, float, float, float] | None = None,
    samples_per_edge: int | None = None,
) -> dict:
    """FeatureCollection of partition leaves, optionally bbox-filtered.

    A leaf is included when its lat/lon bounds intersect the bbox, so
    the filter may keep a cell whose curved edge only nearly enters the
    box, but never drops one that truly intersects it.
    """
    features = []
    for cell, count in partition.leaves():
        if bbox is not None and not bounds_intersect_bbox(cell_latlon_bounds(cell), bbox):
            continue
        features.append(cell_feature(cell, {"count": count}, samples_per_edge))
    return {"type": "FeatureCollection", "features": features}
