"""Hierarchical cube-sphere cell geometry.

The sphere is wrapped by a cube whose six faces are each subdivided by a
quad-tree.  A cell is addressed by its face (0-5) plus a path of child
digits (0-3), one digit per level.

Conventions (fixed; cells are NOT bit-compatible with Google S2 ids):

* Faces 0..5 sit on the +x, +y, +z, -x, -y, -z axes.  A point belongs to
  the face of its largest-magnitude coordinate; exact ties go to the
  lowest face index.
* Each face has a right-handed local frame (u, v) with u_axis x v_axis
  equal to the outward face normal, so cell vertices wind CCW seen from
  outside the sphere.
* Face coordinates use the area-equalizing quadratic transform between
  cube coordinate u in [-1, 1] and tree coordinate s in [0, 1]:
  u = (4s^2 - 1)/3 for s >= 1/2, mirrored below.  This keeps the
  max/min cell area ratio near 2.08; a plain gnomonic mapping would
  give about 5.2.
* Child digit = 2*(v half) + (u half); digit 0 is the low-u/low-v
  quadrant.
* Cells are half-open in (s, t): [lo, hi) with the top/right edge of
  each face closed, so every point lands in exactly one cell per level.

The Earth is modeled as a sphere of radius 6371.0 km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0
EARTH_AREA_KM2 = 4.0 * math.pi * EARTH_RADIUS_KM**2

#: Hard depth cap (one child digit per level).
MAX_LEVEL = 30
#: Depth used by default throughout the toolkit (labels of up to 10 digits).
DEFAULT_MAX_LEVEL = 9

_FACE_COUNT = 6


class CellError(ValueError):
    """Invalid cell, level, or coordinate argument."""


@dataclass(frozen=True)
class LatLon:
    """Geographic coordinates in degrees; lat in [-90, 90], lon in [-180, 180]."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (isinstance(self.lat, (int, float)) and isinstance(self.lon, (int, float))):
            raise CellError("lat/lon must be numbers")
        if math.isnan(self.lat) or math.isnan(self.lon):
            raise CellError("lat/lon may not be NaN")
        if not -90.0 <= self.lat <= 90.0:
            raise CellError(f"latitude {self.lat} out of range [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise CellError(f"longitude {self.lon} out of range [-180, 180]")


@dataclass(frozen=True)
class UnitVec:
    """Point on the unit sphere."""

    x: float
    y: float
    z: float

    @classmethod
    def from_xyz(cls, x: float, y: float, z: float) -> "UnitVec":
        n = math.sqrt(x * x + y * y + z * z)
        if n == 0.0 or math.isnan(n) or math.isinf(n):
            raise CellError("cannot normalize zero or non-finite vector")
        return cls(x / n, y / n, z / n)

    @classmethod
    def from_latlon(cls, p: LatLon) -> "UnitVec":
        lat = math.radians(p.lat)
        lon = math.radians(p.lon)
        cos_lat = math.cos(lat)
        return cls(cos_lat * math.cos(lon), cos_lat * math.sin(lon), math.sin(lat))

    def to_latlon(self) -> LatLon:
        lat = math.degrees(math.atan2(self.z, math.hypot(self.x, self.y)))
        lon = math.degrees(math.atan2(self.y, self.x))
        # atan2 never exceeds the ranges, but clamp float spill from degrees().
        return LatLon(min(90.0, max(-90.0, lat)), min(180.0, max(-180.0, lon)))

    def dot(self, other: "UnitVec") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "UnitVec") -> "UnitVec":
        return UnitVec(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )


@dataclass(frozen=True, order=True)
class CellId:
    """A quad-tree node: face 0-5 plus child digits 0-3, one per level.

    Tuple ordering of (face, path) coincides with lexicographic order of
    the encoded digit strings.
    """

    face: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not isinstance(self.face, int) or not 0 <= self.face < _FACE_COUNT:
            raise CellError(f"face {self.face!r} out of range [0, 5]")
        if not isinstance(self.path, tuple):
            object.__setattr__(self, "path", tuple(self.path))
        if len(self.path) > MAX_LEVEL:
            raise CellError(f"path length {len(self.path)} exceeds MAX_LEVEL={MAX_LEVEL}")
        for d in self.path:
            if not isinstance(d, int) or not 0 <= d <= 3:
                raise CellError(f"child digit {d!r} out of range [0, 3]")

    @property
    def level(self) -> int:
        return len(self.path)

    def is_face(self) -> bool:
        return not self.path

    def is_ancestor_of(self, other: "CellId") -> bool:
        """True for ancestor-or-self."""
        return (
            self.face == other.face
            and len(self.path) <= len(other.path)
            and other.path[: len(self.path)] == self.path
        )


@dataclass(frozen=True)
class LevelStats:
    level: int
    avg_area_km2: float
    cell_count: int


# Local frames: (normal, u_axis, v_axis) as unit vectors, chosen so that
# u_axis x v_axis = normal on every face.
_AXES = {0: (1.0, 0.0, 0.0), 1: (0.0, 1.0, 0.0), 2: (0.0, 0.0, 1.0)}
_FACE_FRAMES: list[tuple[tuple[float, float, float], ...]] = []
for _i in range(3):
    _n = _AXES[_i]
    _FACE_FRAMES.append((_n, _AXES[(_i + 1) % 3], _AXES[(_i + 2) % 3]))
for _i in range(3):
    _n = tuple(-c for c in _AXES[_i])
    _FACE_FRAMES.append((_n, _AXES[(_i + 2) % 3], _AXES[(_i + 1) % 3]))


def st_to_uv(s: float) -> float:
    """Tree coordinate in [0, 1] -> cube coordinate in [-1, 1] (quadratic)."""
    if s >= 0.5:
        return (1.0 / 3.0) * (4.0 * s * s - 1.0)
    return (1.0 / 3.0) * (1.0 - 4.0 * (1.0 - s) * (1.0 - s))


def uv_to_st(u: float) -> float:
    """Cube coordinate in [-1, 1] -> tree coordinate in [0, 1] (quadratic)."""
    if u >= 0.0:
        return 0.5 * math.sqrt(1.0 + 3.0 * u)
    return 1.0 - 0.5 * math.sqrt(1.0 - 3.0 * u)


def face_of(p: UnitVec) -> int:
    """Face of the largest-magnitude coordinate; ties -> lowest face index."""
    coords = (p.x, p.y, p.z)
    largest = max(abs(c) for c in coords)
    if largest == 0.0:
        raise CellError("zero vector has no face")
    for face in range(_FACE_COUNT):
        axis = face % 3
        want_positive = face < 3
        c = coords[axis]
        if abs(c) == largest and (c > 0.0) == want_positive and c != 0.0:
            return face
    raise AssertionError("unreachable")


def face_uv(p: UnitVec, face: int) -> tuple[float, float]:
    """Project a sphere point onto the given face's [-1, 1]^2 square."""
    n, ua, va = _FACE_FRAMES[face]
    depth = p.x * n[0] + p.y * n[1] + p.z * n[2]
    if depth <= 0.0:
        raise CellError(f"point is on the far side of face {face}")
    u = (p.x * ua[0] + p.y * ua[1] + p.z * ua[2]) / depth
    v = (p.x * va[0] + p.y * va[1] + p.z * va[2]) / depth
    return u, v


def face_uv_to_xyz(face: int, u: float, v: float) -> UnitVec:
    """Inverse projection: face square point -> unit sphere point."""
    n, ua, va = _FACE_FRAMES[face]
    return UnitVec.from_xyz(
        n[0] + u * ua[0] + v * va[0],
        n[1] + u * ua[1] + v * va[1],
        n[2] + u * ua[2] + v * va[2],
    )


def latlon_to_cell(p: LatLon, level: int) -> CellId:
    """The unique level-`level` cell containing `p`."""
    if not isinstance(level, int) or not 0 <= level <= MAX_LEVEL:
        raise CellError(f"level {level!r} out of range [0, {MAX_LEVEL}]")
    vec = UnitVec.from_latlon(p)
    face = face_of(vec)
    u, v = face_uv(vec, face)
    # Clamp float spill outside [0, 1]; the top/right face edge is closed.
    s = min(1.0, max(0.0, uv_to_st(u)))
    t = min(1.0, max(0.0, uv_to_st(v)))
    size = 1 << level
    i = min(int(s * size), size - 1)
    j = min(int(t * size), size - 1)
    digits = []
    for shift in range(level - 1, -1, -1):
        digits.append(2 * ((j >> shift) & 1) + ((i >> shift) & 1))
    return CellId(face, tuple(digits))


def cell_parent(c: CellId) -> CellId:
    if c.level == 0:
        raise CellError("face cell has no parent")
    return CellId(c.face, c.path[:-1])


def cell_children(c: CellId) -> list[CellId]:
    if c.level >= MAX_LEVEL:
        raise CellError(f"cell at MAX_LEVEL={MAX_LEVEL} cannot be subdivided")
    return [CellId(c.face, c.path + (d,)) for d in range(4)]


def cell_st_bounds(c: CellId) -> tuple[tuple[float, float], tuple[float, float]]:
    """((s_lo, s_hi), (t_lo, t_hi)) of the cell's half-open rectangle."""
    i = 0
    j = 0
    for d in c.path:
        i = (i << 1) | (d & 1)
        j = (j << 1) | ((d >> 1) & 1)
    size = 1 << c.level
    return (i / size, (i + 1) / size), (j / size, (j + 1) / size)


def cell_uv_bounds(c: CellId) -> tuple[tuple[float, float], tuple[float, float]]:
    (s_lo, s_hi), (t_lo, t_hi) = cell_st_bounds(c)
    return (st_to_uv(s_lo), st_to_uv(s_hi)), (st_to_uv(t_lo), st_to_uv(t_hi))


def cell_center(c: CellId) -> LatLon:
    """Inverse projection of the midpoint of the cell's (u, v) rectangle."""
    (u_lo, u_hi), (v_lo, v_hi) = cell_uv_bounds(c)
    return face_uv_to_xyz(c.face, 0.5 * (u_lo + u_hi), 0.5 * (v_lo + v_hi)).to_latlon()


def cell_vertices(c: CellId) -> list[LatLon]:
    """The 4 corners, CCW as seen from outside the sphere."""
    (u_lo, u_hi), (v_lo, v_hi) = cell_uv_bounds(c)
    corners = ((u_lo, v_lo), (u_hi, v_lo), (u_hi, v_hi), (u_lo, v_hi))
    return [face_uv_to_xyz(c.face, u, v).to_latlon() for u, v in corners]


def _corner_solid_angle(u: float, v: float) -> float:
    # Solid angle of the rectangle [0,u] x [0,v] viewed from the sphere
    # center across the face plane at distance 1 (signed, odd in u and v).
    return math.atan2(u * v, math.sqrt(1.0 + u * u + v * v))


def cell_area_km2(c: CellId) -> float:
    """Exact spherical area of the cell in km^2."""
    (u_lo, u_hi), (v_lo, v_hi) = cell_uv_bounds(c)
    solid = (
        _corner_solid_angle(u_hi, v_hi)
        - _corner_solid_angle(u_lo, v_hi)
        - _corner_solid_angle(u_hi, v_lo)
        + _corner_solid_angle(u_lo, v_lo)
    )
    return solid * EARTH_RADIUS_KM**2


def cell_contains(c: CellId, p: LatLon) -> bool:
    """Containment under the half-open boundary convention."""
    return latlon_to_cell(p, c.level) == c


def level_stats(level: int) -> LevelStats:
    if not isinstance(level, int) or not 0 <= level <= MAX_LEVEL:
        raise CellError(f"level {level!r} out of range [0, {MAX_LEVEL}]")
    count = 6 * 4**level
    return LevelStats(level=level, avg_area_km2=EARTH_AREA_KM2 / count, cell_count=count)
