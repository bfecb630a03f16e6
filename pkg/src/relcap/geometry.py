"""Exact planar region model and grid discretizations.

A :class:`Region` is a union of geometric primitives (disks, simple
polygons, segments, and the exterior-of-the-unit-disk set ``Sigma``).
Regions are immutable; all queries are pure functions and safe for
concurrent use.  Vectorized variants (``contains_many`` and friends)
accept numpy arrays of points encoded as complex numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Domain",
    "Disk",
    "Polygon",
    "Segment",
    "Sigma",
    "Primitive",
    "Region",
    "BoundaryPoint",
    "PolarRaster",
    "CartesianMask",
    "RegionError",
    "RegionSyntaxError",
    "RegionValidationError",
    "GridError",
    "EmptyRegionError",
    "parse_region",
    "serialize_region",
    "contains",
    "contains_many",
    "distance_to_region",
    "distance_many",
    "nearest_boundary_point",
    "nearest_many",
    "region_bounding_radius",
    "region_sup_imag",
    "inner_distance_positive",
    "rasterize_polar",
    "rasterize_cartesian",
    "mask_to_region",
    "polar_raster_to_region",
    "DEFAULT_SEGMENT_HALFWIDTH_FACTOR",
]

# Segments are zero measure; rasterization thickens them by this factor
# times the grid extent so slit obstacles survive the midpoint rule.
DEFAULT_SEGMENT_HALFWIDTH_FACTOR = 1e-3


class Domain(str, Enum):
    """Base domain tag: open unit disk or open upper half-plane."""

    UNIT_DISK = "U"
    HALF_PLANE = "H"


class RegionError(ValueError):
    """Base class for region construction/parsing problems."""


class RegionSyntaxError(RegionError):
    """Malformed region file text."""


class RegionValidationError(RegionError):
    """Structurally valid text describing an invalid primitive."""


class GridError(ValueError):
    """Invalid rasterization grid parameters."""


class EmptyRegionError(ValueError):
    """Distance/projection query against an empty region."""


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise RegionValidationError(f"disk radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class Polygon:
    """Closed, simple polygon given by its vertex loop (filled)."""

    vertices: tuple

    def __post_init__(self) -> None:
        verts = tuple(complex(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise RegionValidationError("polygon needs at least 3 vertices")
        if _polygon_self_intersects(verts):
            raise RegionValidationError("polygon edges self-intersect")


@dataclass(frozen=True)
class Segment:
    a: complex
    b: complex

    def __post_init__(self) -> None:
        if complex(self.a) == complex(self.b):
            raise RegionValidationError("segment endpoints must be distinct")


@dataclass(frozen=True)
class Sigma:
    """The closed exterior of the unit disk, ``{z : |z| >= 1}``."""


Primitive = Union[Disk, Polygon, Segment, Sigma]


@dataclass(frozen=True)
class Region:
    """Union of primitives.  Membership is union semantics."""

    primitives: tuple

    def __post_init__(self) -> None:
        prims = tuple(self.primitives)
        for p in prims:
            if not isinstance(p, (Disk, Polygon, Segment, Sigma)):
                raise RegionValidationError(f"unknown primitive {type(p).__name__}")
        object.__setattr__(self, "primitives", prims)

    @property
    def is_empty(self) -> bool:
        return len(self.primitives) == 0

    def union(self, other: "Region") -> "Region":
        return Region(self.primitives + other.primitives)


@dataclass(frozen=True)
class BoundaryPoint:
    """Accessible boundary point of the base domain.

    ``location`` is a finite point or ``None`` for the point at infinity.
    ``tangent_direction`` is the unit tangent of the boundary arc there
    (undefined, hence ``None``, at infinity).
    """

    location: complex | None
    tangent_direction: complex | None = None

    @property
    def is_infinity(self) -> bool:
        return self.location is None


DISK_APEX = BoundaryPoint(location=1.0 + 0.0j, tangent_direction=1j)
HALF_PLANE_INFINITY = BoundaryPoint(location=None)


def _polygon_self_intersects(verts: Sequence[complex]) -> bool:
    """Brute-force proper/improper crossing test between non-adjacent edges."""
    n = len(verts)
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint: adjacency, not a crossing
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


def _orient(a: complex, b: complex, c: complex) -> float:
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


def _segments_cross(p1: complex, p2: complex, q1: complex, q2: complex) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0:
        return True
    # collinear overlap counts as self-intersection
    for d, a, b, c in ((d1, q1, q2, p1), (d2, q1, q2, p2), (d3, p1, p2, q1), (d4, p1, p2, q2)):
        if d == 0 and _on_segment(a, b, c):
            return True
    return False


def _on_segment(a: complex, b: complex, c: complex) -> bool:
    return (
        min(a.real, b.real) <= c.real <= max(a.real, b.real)
        and min(a.imag, b.imag) <= c.imag <= max(a.imag, b.imag)
    )


# ----------------------------------------------------------------------
# region file format
# ----------------------------------------------------------------------

def _point_from_json(obj) -> complex:
    if (
        not isinstance(obj, (list, tuple))
        or len(obj) != 2
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in obj)
    ):
        raise RegionSyntaxError(f"expected point [x, y], got {obj!r}")
    return complex(float(obj[0]), float(obj[1]))


def parse_region(text: str) -> Region:
    """Parse UTF-8 JSON region text into a :class:`Region`.

    The grammar is ``{"primitives": [...]}`` where each element is one of
    ``{"disk": {"center": [x,y], "radius": r}}``,
    ``{"polygon": {"vertices": [[x,y], ...]}}``,
    ``{"segment": {"a": [x,y], "b": [x,y]}}`` or ``{"sigma": {}}``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RegionSyntaxError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "primitives" not in doc:
        raise RegionSyntaxError('top level must be an object with a "primitives" key')
    items = doc["primitives"]
    if not isinstance(items, list):
        raise RegionSyntaxError('"primitives" must be a list')
    prims: list[Primitive] = []
    for item in items:
        if not isinstance(item, dict) or len(item) != 1:
            raise RegionSyntaxError(f"each primitive must be a single-key object, got {item!r}")
        (kind, body), = item.items()
        if not isinstance(body, dict):
            raise RegionSyntaxError(f"primitive body must be an object, got {body!r}")
        if kind == "disk":
            _require_keys(body, {"center", "radius"})
            radius = body["radius"]
            if not isinstance(radius, (int, float)) or isinstance(radius, bool):
                raise RegionSyntaxError(f"disk radius must be a number, got {radius!r}")
            prims.append(Disk(_point_from_json(body["center"]), float(radius)))
        elif kind == "polygon":
            _require_keys(body, {"vertices"})
            verts = body["vertices"]
            if not isinstance(verts, list):
                raise RegionSyntaxError("polygon vertices must be a list")
            prims.append(Polygon(tuple(_point_from_json(v) for v in verts)))
        elif kind == "segment":
            _require_keys(body, {"a", "b"})
            prims.append(Segment(_point_from_json(body["a"]), _point_from_json(body["b"])))
        elif kind == "sigma":
            _require_keys(body, set())
            prims.append(Sigma())
        else:
            raise RegionSyntaxError(f"unknown primitive kind {kind!r}")
    return Region(tuple(prims))


def _require_keys(body: dict, keys: set) -> None:
    if set(body.keys()) != keys:
        raise RegionSyntaxError(f"expected keys {sorted(keys)}, got {sorted(body.keys())}")


def serialize_region(region: Region) -> str:
    """Serialize to the region file grammar; round-trips through parse."""
    items = []
    for p in region.primitives:
        if isinstance(p, Disk):
            items.append({"disk": {"center": [p.center.real, p.center.imag], "radius": p.radius}})
        elif isinstance(p, Polygon):
            items.append({"polygon": {"vertices": [[v.real, v.imag] for v in p.vertices]}})
        elif isinstance(p, Segment):
            a, b = complex(p.a), complex(p.b)
            items.append({"segment": {"a": [a.real, a.imag], "b": [b.real, b.imag]}})
        elif isinstance(p, Sigma):
            items.append({"sigma": {}})
    return json.dumps({"primitives": items})


# ----------------------------------------------------------------------
# point and distance queries (vectorized kernels)
# ----------------------------------------------------------------------

def _as_points(pts) -> np.ndarray:
    return np.asarray(pts, dtype=np.complex128)


def _edge_arrays(verts: Sequence[complex]) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(verts, dtype=np.complex128)
    return v, np.roll(v, -1) - v


def _dist_to_edges(pts: np.ndarray, starts: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Min distance from each point to a family of segments (broadcast)."""
    p = pts[:, None]
    s = starts[None, :]
    v = vecs[None, :]
    vv = (v.real * v.real + v.imag * v.imag)
    t = ((p - s).real * v.real + (p - s).imag * v.imag) / vv
    t = np.clip(t, 0.0, 1.0)
    foot = s + t * v
    return np.abs(p - foot).min(axis=1)


def _nearest_on_edges(pts: np.ndarray, starts: np.ndarray, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = pts[:, None]
    s = starts[None, :]
    v = vecs[None, :]
    vv = (v.real * v.real + v.imag * v.imag)
    t = ((p - s).real * v.real + (p - s).imag * v.imag) / vv
    t = np.clip(t, 0.0, 1.0)
    foot = s + t * v
    d = np.abs(p - foot)
    idx = d.argmin(axis=1)
    rows = np.arange(len(pts))
    return d[rows, idx], foot[rows, idx]


def _polygon_parity(pts: np.ndarray, verts: Sequence[complex]) -> np.ndarray:
    """Even-odd ray crossing test; boundary points get refined by the caller."""
    x, y = pts.real, pts.imag
    inside = np.zeros(pts.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        cond = (a.imag > y) != (b.imag > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
        hit = cond & (x < xs)
        inside ^= hit
    return inside


class _CompiledRegion:
    """Region flattened into numpy arrays for fast batched queries.

    Axis-aligned rectangular polygons get a dedicated clamp kernel since
    grid-derived regions consist almost entirely of them.
    """

    def __init__(self, region: Region):
        self.region = region
        disks = [p for p in region.primitives if isinstance(p, Disk)]
        self.disk_c = np.asarray([d.center for d in disks], dtype=np.complex128)
        self.disk_r = np.asarray([d.radius for d in disks], dtype=np.float64)
        self.has_sigma = any(isinstance(p, Sigma) for p in region.primitives)

        self.rects: list[tuple[float, float, float, float]] = []
        self.polys: list[tuple] = []
        edge_starts: list[complex] = []
        edge_vecs: list[complex] = []
        for p in region.primitives:
            if isinstance(p, Polygon):
                rect = _axis_aligned_rect(p.vertices)
                if rect is not None:
                    self.rects.append(rect)
                else:
                    v, e = _edge_arrays(p.vertices)
                    self.polys.append((p.vertices, v, e))
            elif isinstance(p, Segment):
                edge_starts.append(complex(p.a))
                edge_vecs.append(complex(p.b) - complex(p.a))
        self.seg_starts = np.asarray(edge_starts, dtype=np.complex128)
        self.seg_vecs = np.asarray(edge_vecs, dtype=np.complex128)
        if self.rects:
            r = np.asarray(self.rects, dtype=np.float64)
            self.rect_x0, self.rect_x1 = r[:, 0], r[:, 1]
            self.rect_y0, self.rect_y1 = r[:, 2], r[:, 3]
        self.is_empty = region.is_empty

    # -- distance ------------------------------------------------------
    def distance(self, pts: np.ndarray) -> np.ndarray:
        if self.is_empty:
            raise EmptyRegionError("distance query against an empty region")
        d = np.full(pts.shape, np.inf)
        if len(self.disk_c):
            dd = np.abs(pts[:, None] - self.disk_c[None, :]) - self.disk_r[None, :]
            np.minimum(d, np.maximum(dd, 0.0).min(axis=1), out=d)
        if self.has_sigma:
            np.minimum(d, np.maximum(1.0 - np.abs(pts), 0.0), out=d)
        if self.rects:
            dx = np.maximum(self.rect_x0[None, :] - pts.real[:, None], 0.0)
            dx = np.maximum(dx, pts.real[:, None] - self.rect_x1[None, :])
            dy = np.maximum(self.rect_y0[None, :] - pts.imag[:, None], 0.0)
            dy = np.maximum(dy, pts.imag[:, None] - self.rect_y1[None, :])
            np.minimum(d, np.hypot(dx, dy).min(axis=1), out=d)
        if len(self.seg_starts):
            np.minimum(d, _dist_to_edges(pts, self.seg_starts, self.seg_vecs), out=d)
        for verts, v, e in self.polys:
            dp = _dist_to_edges(pts, v, e)
            dp[_polygon_parity(pts, verts)] = 0.0
            np.minimum(d, dp, out=d)
        return d

    # -- membership ----------------------------------------------------
    def contains(self, pts: np.ndarray, seg_halfwidth: float = 0.0) -> np.ndarray:
        out = np.zeros(pts.shape, dtype=bool)
        if len(self.disk_c):
            out |= (np.abs(pts[:, None] - self.disk_c[None, :]) <= self.disk_r[None, :]).any(axis=1)
        if self.has_sigma:
            out |= np.abs(pts) >= 1.0
        if self.rects:
            inx = (pts.real[:, None] >= self.rect_x0[None, :]) & (pts.real[:, None] <= self.rect_x1[None, :])
            iny = (pts.imag[:, None] >= self.rect_y0[None, :]) & (pts.imag[:, None] <= self.rect_y1[None, :])
            out |= (inx & iny).any(axis=1)
        if len(self.seg_starts):
            out |= _dist_to_edges(pts, self.seg_starts, self.seg_vecs) <= seg_halfwidth
        for verts, v, e in self.polys:
            inside = _polygon_parity(pts, verts)
            need = ~inside
            if need.any():
                # boundary counts as inside; thickening applies to segments only
                inside[need] = _dist_to_edges(pts[need], v, e) == 0.0
            out |= inside
        return out

    # -- nearest boundary point ----------------------------------------
    def nearest(self, pts: np.ndarray) -> np.ndarray:
        """Nearest point of the region from outside it (per-point argmin)."""
        if self.is_empty:
            raise EmptyRegionError("projection query against an empty region")
        best_d = np.full(pts.shape, np.inf)
        best_p = np.array(pts, dtype=np.complex128)
        if len(self.disk_c):
            vec = pts[:, None] - self.disk_c[None, :]
            dist = np.abs(vec)
            safe = np.where(dist == 0.0, 1.0, dist)
            proj = self.disk_c[None, :] + self.disk_r[None, :] * vec / safe
            proj = np.where(dist == 0.0, self.disk_c[None, :] + self.disk_r[None, :], proj)
            dd = np.abs(dist - self.disk_r[None, :])
            j = dd.argmin(axis=1)
            rows = np.arange(len(pts))
            _update_nearest(best_d, best_p, dd[rows, j], proj[rows, j])
        if self.has_sigma:
            mod = np.abs(pts)
            safe = np.where(mod == 0.0, 1.0, mod)
            proj = np.where(mod == 0.0, 1.0 + 0.0j, pts / safe)
            _update_nearest(best_d, best_p, np.abs(1.0 - mod), proj)
        if self.rects:
            cx = np.clip(pts.real[:, None], self.rect_x0[None, :], self.rect_x1[None, :])
            cy = np.clip(pts.imag[:, None], self.rect_y0[None, :], self.rect_y1[None, :])
            proj = cx + 1j * cy
            dd = np.abs(pts[:, None] - proj)
            j = dd.argmin(axis=1)
            rows = np.arange(len(pts))
            _update_nearest(best_d, best_p, dd[rows, j], proj[rows, j])
        if len(self.seg_starts):
            dd, proj = _nearest_on_edges(pts, self.seg_starts, self.seg_vecs)
            _update_nearest(best_d, best_p, dd, proj)
        for verts, v, e in self.polys:
            dd, proj = _nearest_on_edges(pts, v, e)
            _update_nearest(best_d, best_p, dd, proj)
        return best_p


def _update_nearest(best_d, best_p, d, p) -> None:
    better = d < best_d
    best_d[better] = d[better]
    best_p[better] = p[better]


def _axis_aligned_rect(verts: Sequence[complex]):
    """Return (x0, x1, y0, y1) when the polygon is an axis-aligned rectangle."""
    if len(verts) != 4:
        return None
    xs = sorted({round(v.real, 15) for v in verts})
    ys = sorted({round(v.imag, 15) for v in verts})
    if len(xs) != 2 or len(ys) != 2:
        return None
    corners = {(x, y) for x in xs for y in ys}
    got = {(round(v.real, 15), round(v.imag, 15)) for v in verts}
    if got != corners:
        return None
    return (xs[0], xs[1], ys[0], ys[1])


_COMPILE_CACHE: dict[int, _CompiledRegion] = {}


def compile_region(region: Region) -> _CompiledRegion:
    key = id(region)
    hit = _COMPILE_CACHE.get(key)
    if hit is not None and hit.region is region:
        return hit
    compiled = _CompiledRegion(region)
    if len(_COMPILE_CACHE) > 256:
        _COMPILE_CACHE.clear()
    _COMPILE_CACHE[key] = compiled
    return compiled


def contains_many(region: Region, pts, seg_halfwidth: float = 0.0) -> np.ndarray:
    return compile_region(region).contains(_as_points(pts), seg_halfwidth)


def contains(region: Region, p: complex) -> bool:
    """True iff ``p`` lies in the union (boundaries count as inside)."""
    return bool(contains_many(region, np.array([p]))[0])


def distance_many(region: Region, pts) -> np.ndarray:
    return compile_region(region).distance(_as_points(pts))


def distance_to_region(region: Region, p: complex) -> float:
    """Euclidean distance from ``p`` to the union; 0 on or inside it."""
    return float(distance_many(region, np.array([p]))[0])


def nearest_many(region: Region, pts) -> np.ndarray:
    return compile_region(region).nearest(_as_points(pts))


def nearest_boundary_point(region: Region, p: complex) -> complex:
    return complex(nearest_many(region, np.array([p]))[0])


def region_bounding_radius(region: Region) -> float:
    """sup |z| over the region; inf for Sigma, 0 for the empty region."""
    r = 0.0
    for p in region.primitives:
        if isinstance(p, Disk):
            r = max(r, abs(p.center) + p.radius)
        elif isinstance(p, Polygon):
            r = max(r, max(abs(v) for v in p.vertices))
        elif isinstance(p, Segment):
            r = max(r, abs(complex(p.a)), abs(complex(p.b)))
        elif isinstance(p, Sigma):
            return math.inf
    return r


def region_sup_imag(region: Region) -> float:
    """sup Im z over the region; -inf for the empty region."""
    top = -math.inf
    for p in region.primitives:
        if isinstance(p, Disk):
            top = max(top, p.center.imag + p.radius)
        elif isinstance(p, Polygon):
            top = max(top, max(v.imag for v in p.vertices))
        elif isinstance(p, Segment):
            top = max(top, complex(p.a).imag, complex(p.b).imag)
        elif isinstance(p, Sigma):
            return math.inf
    return top


def inner_distance_positive(
    obstacle: Region,
    domain: Domain,
    z0: BoundaryPoint,
    probe_radius: float,
) -> bool:
    """Sufficient check that the obstacle stays out of a boundary neighborhood.

    For a finite ``z0``: true iff the obstacle misses
    ``{|z - z0| < probe_radius}``.  For ``z0`` at infinity: true iff the
    obstacle stays inside ``{|z| <= 1/probe_radius}``.  This certifies a
    positive inner distance; it does not compute the inner metric.
    """
    if obstacle.is_empty:
        return True
    if z0.is_infinity:
        return region_bounding_radius(obstacle) <= 1.0 / probe_radius
    return distance_to_region(obstacle, complex(z0.location)) >= probe_radius


# ----------------------------------------------------------------------
# rasters
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolarRaster:
    """Boolean occupancy on a polar grid about ``center``.

    ``cells[i, j]`` covers radii ``[r_edges[i], r_edges[i+1])`` and the
    j-th of ``theta_count`` uniform angular sectors of ``[0, 2*pi)``.
    """

    center: complex
    r_edges: np.ndarray
    theta_count: int
    cells: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.r_edges, dtype=np.float64)
        object.__setattr__(self, "r_edges", edges)
        cells = np.asarray(self.cells, dtype=bool)
        object.__setattr__(self, "cells", cells)
        if edges.ndim != 1 or len(edges) < 2 or not (np.diff(edges) > 0).all():
            raise GridError("r_edges must be strictly increasing")
        if edges[0] < 0:
            raise GridError("r_edges must start at a nonnegative radius")
        if cells.shape != (len(edges) - 1, self.theta_count):
            raise GridError("cell array shape must be (rings, theta_count)")

    @property
    def rings(self) -> int:
        return len(self.r_edges) - 1

    def r_mid(self) -> np.ndarray:
        return 0.5 * (self.r_edges[:-1] + self.r_edges[1:])

    def theta_mid(self) -> np.ndarray:
        step = 2.0 * math.pi / self.theta_count
        return (np.arange(self.theta_count) + 0.5) * step

    def with_cells(self, cells: np.ndarray) -> "PolarRaster":
        return PolarRaster(self.center, self.r_edges, self.theta_count, cells)


@dataclass(frozen=True, eq=False)
class CartesianMask:
    """Boolean occupancy on a Cartesian grid over ``bbox``.

    ``bbox`` is ``(xmin, xmax, ymin, ymax)``; ``cells[ix, iy]`` covers the
    cell with midpoint ``(xmin + (ix+0.5)*dx, ymin + (iy+0.5)*dy)``.
    """

    bbox: tuple
    nx: int
    ny: int
    cells: np.ndarray

    def __post_init__(self) -> None:
        xmin, xmax, ymin, ymax = (float(c) for c in self.bbox)
        object.__setattr__(self, "bbox", (xmin, xmax, ymin, ymax))
        if self.nx < 2 or self.ny < 2:
            raise GridError("nx and ny must be at least 2")
        if not (xmax > xmin and ymax > ymin):
            raise GridError("bbox must have positive area")
        cells = np.asarray(self.cells, dtype=bool)
        object.__setattr__(self, "cells", cells)
        if cells.shape != (self.nx, self.ny):
            raise GridError("cell array shape must be (nx, ny)")

    @property
    def dx(self) -> float:
        return (self.bbox[1] - self.bbox[0]) / self.nx

    @property
    def dy(self) -> float:
        return (self.bbox[3] - self.bbox[2]) / self.ny

    def x_mid(self) -> np.ndarray:
        return self.bbox[0] + (np.arange(self.nx) + 0.5) * self.dx

    def y_mid(self) -> np.ndarray:
        return self.bbox[2] + (np.arange(self.ny) + 0.5) * self.dy

    def midpoints(self) -> np.ndarray:
        return self.x_mid()[:, None] + 1j * self.y_mid()[None, :]

    def with_cells(self, cells: np.ndarray) -> "CartesianMask":
        return CartesianMask(self.bbox, self.nx, self.ny, cells)


def rasterize_polar(
    region: Region,
    center: complex,
    r_max: float,
    rings: int,
    sectors: int,
    *,
    geometric: bool = False,
    r_min: float | None = None,
    segment_halfwidth: float | None = None,
) -> PolarRaster:
    """Midpoint-rule occupancy of ``region`` on a polar grid about ``center``."""
    if rings < 8 or sectors < 8:
        raise GridError("rings and sectors must both be at least 8")
    if not r_max > 0:
        raise GridError("r_max must be positive")
    if geometric:
        inner = r_max * 1e-3 if r_min is None else float(r_min)
        if not 0 < inner < r_max:
            raise GridError("geometric grids need 0 < r_min < r_max")
        edges = inner * (r_max / inner) ** (np.arange(rings + 1) / rings)
    else:
        edges = np.linspace(0.0, r_max, rings + 1)
    raster = PolarRaster(center, edges, sectors, np.zeros((rings, sectors), dtype=bool))
    if region.is_empty:
        return raster
    hw = DEFAULT_SEGMENT_HALFWIDTH_FACTOR * r_max if segment_halfwidth is None else segment_halfwidth
    pts = (complex(center) + raster.r_mid()[:, None] * np.exp(1j * raster.theta_mid())[None, :]).ravel()
    occupied = contains_many(region, pts, seg_halfwidth=hw).reshape(rings, sectors)
    return raster.with_cells(occupied)


def rasterize_cartesian(
    region: Region,
    bbox: tuple,
    nx: int,
    ny: int,
    *,
    segment_halfwidth: float | None = None,
) -> CartesianMask:
    """Midpoint-rule occupancy of ``region`` on a Cartesian grid."""
    mask = CartesianMask(tuple(bbox), nx, ny, np.zeros((nx, ny), dtype=bool))
    if region.is_empty:
        return mask
    if segment_halfwidth is None:
        scale = max(mask.bbox[1] - mask.bbox[0], mask.bbox[3] - mask.bbox[2])
        hw = DEFAULT_SEGMENT_HALFWIDTH_FACTOR * scale
    else:
        hw = segment_halfwidth
    pts = mask.midpoints().ravel()
    occupied = contains_many(region, pts, seg_halfwidth=hw).reshape(nx, ny)
    return mask.with_cells(occupied)


# ----------------------------------------------------------------------
# raster -> region conversion (for capacity tests on transformed sets)
# ----------------------------------------------------------------------

def mask_to_region(mask: CartesianMask) -> Region:
    """Union of occupied cells as axis-aligned rectangles.

    Vertical runs are merged per column, then equal adjacent runs are
    merged across columns, keeping the primitive count small.
    """
    xmin, _, ymin, _ = mask.bbox
    dx, dy = mask.dx, mask.dy
    runs: dict[tuple[int, int], tuple[int, int]] = {}  # (iy0, iy1) -> (ix_start, ix_end)
    rects: list[Polygon] = []
    open_runs: dict[tuple[int, int], int] = {}
    for ix in range(mask.nx):
        col = mask.cells[ix]
        col_runs = _bool_runs(col)
        new_open: dict[tuple[int, int], int] = {}
        for run in col_runs:
            if run in open_runs:
                new_open[run] = open_runs.pop(run)
            else:
                new_open[run] = ix
        for run, ix0 in open_runs.items():
            rects.append(_cell_rect(xmin, ymin, dx, dy, ix0, ix, run))
        open_runs = new_open
    for run, ix0 in open_runs.items():
        rects.append(_cell_rect(xmin, ymin, dx, dy, ix0, mask.nx, run))
    return Region(tuple(rects))


def _bool_runs(col: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as half-open index pairs."""
    padded = np.concatenate(([False], col, [False]))
    flips = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(flips[i]), int(flips[i + 1])) for i in range(0, len(flips), 2)]


def _cell_rect(xmin, ymin, dx, dy, ix0, ix1, run) -> Polygon:
    x0, x1 = xmin + ix0 * dx, xmin + ix1 * dx
    y0, y1 = ymin + run[0] * dy, ymin + run[1] * dy
    return Polygon((complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)))


def polar_raster_to_region(raster: PolarRaster, *, max_span_cells: int = 16) -> Region:
    """Occupied polar cells as a union of quadrilaterals.

    Angular runs are subdivided so that the chord sagitta stays below
    0.4 radial cells per ring (and never exceed ``max_span_cells``),
    keeping cell-midpoint membership of the polygons identical to the
    raster occupancy.
    """
    center = complex(raster.center)
    step = 2.0 * math.pi / raster.theta_count
    quads: list[Polygon] = []
    for i in range(raster.rings):
        r0, r1 = raster.r_edges[i], raster.r_edges[i + 1]
        dr = r1 - r0
        frac = 0.4 * dr / r1
        if frac < 1.0:
            phi_max = 2.0 * math.acos(1.0 - frac)
            span = max(1, int(phi_max / step))
        else:
            span = raster.theta_count
        span = min(span, max_span_cells)
        for j0, j1 in _circular_runs(raster.cells[i]):
            for a in range(j0, j1, span):
                b = min(a + span, j1)
                t0, t1 = a * step, b * step
                quads.append(_polar_quad(center, r0, r1, t0, t1))
    return Region(tuple(quads))


def _circular_runs(ring: np.ndarray) -> list[tuple[int, int]]:
    """Maximal cyclic runs of True as (start, end) with end possibly > n."""
    n = len(ring)
    if ring.all():
        return [(0, n)]
    if not ring.any():
        return []
    runs = _bool_runs(ring)
    # merge a run ending at n with one starting at 0 (cyclic wrap)
    if len(runs) >= 2 and runs[0][0] == 0 and runs[-1][1] == n:
        first, last = runs[0], runs[-1]
        runs = runs[1:-1] + [(last[0], n + first[1])]
    return runs


def _polar_quad(center: complex, r0: float, r1: float, t0: float, t1: float) -> Polygon:
    e0, e1 = complex(math.cos(t0), math.sin(t0)), complex(math.cos(t1), math.sin(t1))
    if r0 <= 0:
        # innermost ring: triangle with apex at the center
        return Polygon((center, center + r1 * e0, center + r1 * e1))
    return Polygon((center + r0 * e0, center + r1 * e0, center + r1 * e1, center + r0 * e1))
