"""Location hiding over a hexagonal grid.

Coordinates are projected onto a local tangent plane around a configured
region centroid, then snapped to a flat hexagonal lattice. Two devices
standing near each other land in the same cell and therefore publish the
same opaque digest; the digest reveals nothing about the cell without a
brute-force sweep of the region.

Resolutions 0..15 shrink the cell edge by sqrt(7) per step. Consecutive
lattices are aperture-7 aligned (every coarse center is also a fine
center, with the child grid rotated by atan(sqrt(3)/5) ~ 19.1066 deg),
which maximises parent/child containment; true hexagon lookups still
disagree with the parent cell for a small fraction of points near cell
walls, so no nesting guarantee is exposed.
"""

from __future__ import annotations

import cmath
import hashlib
import math
from dataclasses import dataclass

from .errors import InvalidCoordinate, ResolutionOutOfRange

EARTH_RADIUS_M = 6371000.0
EDGE0_M = 1107712.591          # cell edge at resolution 0, metres
MIN_RESOLUTION = 0
MAX_RESOLUTION = 15
DEFAULT_RESOLUTION = 9         # edge ~ 174.4 m
VERSION_BYTE = b"\x01"

_SQRT3 = math.sqrt(3.0)
_OMEGA = complex(0.5, _SQRT3 / 2.0)   # sixth root of unity
_DELTA = 2.0 + _OMEGA                 # |delta| = sqrt(7)

EDGE_LADDER_M = tuple(EDGE0_M / (7.0 ** (r / 2.0)) for r in range(MAX_RESOLUTION + 1))


def edge_m(resolution: int) -> float:
    """Cell edge length (= circumradius) in metres."""
    _check_resolution(resolution)
    return EDGE_LADDER_M[resolution]


def circumradius_m(resolution: int) -> float:
    return edge_m(resolution)


def _check_resolution(resolution: int) -> None:
    if not MIN_RESOLUTION <= resolution <= MAX_RESOLUTION:
        raise ResolutionOutOfRange(f"resolution {resolution} outside "
                                   f"{MIN_RESOLUTION}..{MAX_RESOLUTION}")


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidCoordinate("non-finite coordinate")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidCoordinate(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidCoordinate(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class CellIndex:
    resolution: int
    cell_id: int


@dataclass(frozen=True)
class CellDigest:
    digest: bytes

    @property
    def hex(self) -> str:
        return self.digest.hex()


def _pack_axial(q: int, r: int) -> int:
    # two signed 32-bit lanes in one unsigned 64-bit id
    if not (-(2 ** 31) <= q < 2 ** 31 and -(2 ** 31) <= r < 2 ** 31):
        raise InvalidCoordinate("axial coordinate outside 32-bit range")
    return ((q & 0xFFFFFFFF) << 32) | (r & 0xFFFFFFFF)


def _unpack_axial(cell_id: int) -> tuple[int, int]:
    q = (cell_id >> 32) & 0xFFFFFFFF
    r = cell_id & 0xFFFFFFFF
    if q >= 2 ** 31:
        q -= 2 ** 32
    if r >= 2 ** 31:
        r -= 2 ** 32
    return q, r


def _axial_round(qf: float, rf: float) -> tuple[int, int]:
    x, z = qf, rf
    y = -x - z
    rx, ry, rz = round(x), round(y), round(z)
    dx, dy, dz = abs(rx - x), abs(ry - y), abs(rz - z)
    if dx > dy and dx > dz:
        rx = -ry - rz
    elif dy > dz:
        ry = -rx - rz
    else:
        rz = -rx - ry
    return int(rx), int(rz)


_NEIGHBOR_OFFSETS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


class HexGrid:
    """Hex lattice family over a local planar projection of one region."""

    def __init__(self, centroid: GeoPoint | None = None,
                 region_extent_deg: float = 1.0) -> None:
        self.centroid = centroid if centroid is not None else GeoPoint(34.26, 108.94)
        self.region_extent_deg = float(region_extent_deg)
        self._lat0 = math.radians(self.centroid.lat)
        self._lon0 = math.radians(self.centroid.lon)
        self._coslat = math.cos(self._lat0)
        half = math.radians(self.region_extent_deg / 2.0) * EARTH_RADIUS_M
        self._half_y = half
        self._half_x = half * self._coslat
        # lattice basis per resolution: spacing sqrt(3)*edge, rotated by the
        # aperture-7 angle each step so lattices nest center-on-center
        self._basis = [(_SQRT3 * EDGE0_M) / (_DELTA ** r)
                       for r in range(MAX_RESOLUTION + 1)]

    # -- planar projection -------------------------------------------------

    def to_planar(self, point: GeoPoint) -> tuple[float, float]:
        x = EARTH_RADIUS_M * self._coslat * (math.radians(point.lon) - self._lon0)
        y = EARTH_RADIUS_M * (math.radians(point.lat) - self._lat0)
        return x, y

    def from_planar(self, x: float, y: float) -> GeoPoint:
        lat = math.degrees(self._lat0 + y / EARTH_RADIUS_M)
        lon = math.degrees(self._lon0 + x / (EARTH_RADIUS_M * self._coslat))
        return GeoPoint(lat, lon)

    def in_region_planar(self, x: float, y: float) -> bool:
        return abs(x) <= self._half_x and abs(y) <= self._half_y

    def _require_in_region(self, point: GeoPoint) -> tuple[float, float]:
        x, y = self.to_planar(point)
        if not self.in_region_planar(x, y):
            raise InvalidCoordinate("point outside the configured grid region")
        return x, y

    # -- cell lookup -------------------------------------------------------

    def cell_index_planar(self, x: float, y: float, resolution: int) -> CellIndex:
        _check_resolution(resolution)
        u = self._basis[resolution]
        w = complex(x, y) / u
        rf = w.imag / (_SQRT3 / 2.0)
        qf = w.real - rf / 2.0
        q, r = _axial_round(qf, rf)
        return CellIndex(resolution=resolution, cell_id=_pack_axial(q, r))

    def cell_index(self, point: GeoPoint, resolution: int) -> CellIndex:
        x, y = self._require_in_region(point)
        return self.cell_index_planar(x, y, resolution)

    def cell_center_planar(self, cell: CellIndex) -> tuple[float, float]:
        _check_resolution(cell.resolution)
        q, r = _unpack_axial(cell.cell_id)
        z = self._basis[cell.resolution] * (q + r * _OMEGA)
        return z.real, z.imag

    def neighbors(self, cell: CellIndex) -> list[CellIndex]:
        """Adjacent cells whose centers fall inside the region box."""
        _check_resolution(cell.resolution)
        q, r = _unpack_axial(cell.cell_id)
        out = []
        for dq, dr in _NEIGHBOR_OFFSETS:
            cand = CellIndex(cell.resolution, _pack_axial(q + dq, r + dr))
            cx, cy = self.cell_center_planar(cand)
            if self.in_region_planar(cx, cy):
                out.append(cand)
        return out

    def boundary_distance_planar(self, x: float, y: float, resolution: int) -> float:
        """Distance from a point to the wall of its containing cell."""
        cell = self.cell_index_planar(x, y, resolution)
        cx, cy = self.cell_center_planar(cell)
        z = complex(x - cx, y - cy)
        u = self._basis[resolution]
        best = math.inf
        for dq, dr in _NEIGHBOR_OFFSETS:
            d = u * (dq + dr * _OMEGA)
            half = abs(d) / 2.0
            proj = (z.real * d.real + z.imag * d.imag) / abs(d)
            best = min(best, half - proj)
        return best


def hide_location(cell: CellIndex) -> CellDigest:
    """Opaque commitment to a cell: SHA-256 over the canonical 10-byte form
    (1 byte resolution, 8 bytes big-endian cell id, 1 version byte)."""
    _check_resolution(cell.resolution)
    blob = bytes([cell.resolution]) + cell.cell_id.to_bytes(8, "big") + VERSION_BYTE
    return CellDigest(digest=hashlib.sha256(blob).digest())


DEFAULT_GRID = HexGrid()


def cell_index(point: GeoPoint, resolution: int = DEFAULT_RESOLUTION) -> CellIndex:
    return DEFAULT_GRID.cell_index(point, resolution)


def neighbors(cell: CellIndex) -> list[CellIndex]:
    return DEFAULT_GRID.neighbors(cell)
