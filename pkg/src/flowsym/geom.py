"""Planar primitives: isometries, polygons, signed distance and raster metrics.

Points are plain ``numpy`` arrays of shape ``(2,)`` or ``(N, 2)``; every
operation broadcasts over a leading batch axis. Signed distances follow the
convention *positive inside, negative outside*, which is the opposite of many
graphics libraries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasis, InvalidPolygon

__all__ = [
    "AffineMap",
    "Grid",
    "Line",
    "Polygon",
    "lattice_translate",
    "point_in_polygon",
    "polygon_area",
    "polygon_sdf",
    "rasterize_metrics",
    "rasterize_polygon",
    "reflect_line",
    "reflection_matrix",
    "rotate_about",
    "rotation_matrix",
    "transflect",
]


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def reflection_matrix(direction) -> np.ndarray:
    """Linear reflection about the line through the origin along ``direction``."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return 2.0 * np.outer(d, d) - np.eye(2)


@dataclass(frozen=True)
class Line:
    """The line ``anchor + lambda * direction``; direction is normalized on construction."""

    anchor: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=float).reshape(2)
        d = np.asarray(self.direction, dtype=float).reshape(2)
        n = np.linalg.norm(d)
        if not np.isfinite(n) or n < 1e-15:
            raise ValueError("line direction must be a non-zero finite vector")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "direction", d / n)


@dataclass(frozen=True)
class AffineMap:
    """Similarity ``p -> scale * R(angle) p + translation``."""

    angle: float = 0.0
    scale: float = 1.0
    translation: np.ndarray = None

    def __post_init__(self):
        t = np.zeros(2) if self.translation is None else np.asarray(self.translation, dtype=float).reshape(2)
        if not self.scale > 0:
            raise ValueError(f"affine scale must be positive, got {self.scale}")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "angle", float(self.angle))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls()

    @property
    def linear(self) -> np.ndarray:
        return self.scale * rotation_matrix(self.angle)

    @property
    def inverse_linear(self) -> np.ndarray:
        return rotation_matrix(-self.angle) / self.scale

    def apply(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return p @ self.linear.T + self.translation

    def apply_inverse(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return (p - self.translation) @ self.inverse_linear.T

    def compose(self, other: "AffineMap") -> "AffineMap":
        """Return ``self o other``."""
        t = self.apply(other.translation)
        return AffineMap(self.angle + other.angle, self.scale * other.scale, t)

    def inverse(self) -> "AffineMap":
        return AffineMap(-self.angle, 1.0 / self.scale, self.apply_inverse(np.zeros(2)))

    def as_vector(self) -> np.ndarray:
        return np.array([self.angle, self.scale, *self.translation])

    @classmethod
    def from_vector(cls, v) -> "AffineMap":
        v = np.asarray(v, dtype=float)
        return cls(v[0], v[1], v[2:4])

    def derivatives(self):
        """Derivatives of (linear, inverse_linear, translation) w.r.t. (angle, scale, tx, ty)."""
        R = rotation_matrix(self.angle)
        Ri = rotation_matrix(-self.angle)
        Jrot = np.array([[0.0, -1.0], [1.0, 0.0]])
        s = self.scale
        z = np.zeros((2, 2))
        d_lin = [s * R @ Jrot, R, z, z]
        d_inv = [-(Ri @ Jrot) / s, -Ri / s**2, z, z]
        d_t = [np.zeros(2), np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        return d_lin, d_inv, d_t


def rotate_about(p, c, angle: float) -> np.ndarray:
    """Counter-clockwise rotation of ``p`` by ``angle`` about ``c``."""
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    return (p - c) @ rotation_matrix(angle).T + c


def reflect_line(p, line: Line) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    c, d = line.anchor, line.direction
    proj = (p - c) @ d
    return 2.0 * c - p + 2.0 * proj[..., None] * d


def transflect(p, line: Line, glide: float) -> np.ndarray:
    """Reflect about ``line`` then translate by ``glide`` along its direction."""
    return reflect_line(p, line) + glide * line.direction


def lattice_translate(p, basis, m: int, n: int) -> np.ndarray:
    B = np.asarray(basis, dtype=float)
    if abs(np.linalg.det(B)) <= 1e-12:
        raise DegenerateBasis(f"basis determinant {np.linalg.det(B):.3e} is not invertible")
    return np.asarray(p, dtype=float) + m * B[:, 0] + n * B[:, 1]


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(v: np.ndarray) -> bool:
    """True when any two non-adjacent edges of the closed polyline intersect."""
    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    if len(i) == 0:
        return False

    def orient(p, q, r):
        return (q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0])

    p1, p2, q1, q2 = a[i], b[i], a[j], b[j]
    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    scale = np.max(np.abs(v)) ** 2 + 1.0
    tol = 1e-14 * scale
    proper = (d1 * d2 < -tol * tol) & (d3 * d4 < -tol * tol)
    return bool(np.any(proper))


class Polygon:
    """Simple polygon with vertices stored counter-clockwise.

    Construction rejects fewer than three vertices, zero area and crossing
    edges. ``check=False`` skips the O(n^2) crossing test for dense
    polylines produced internally.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices, check: bool = True):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidPolygon("polygon needs at least three 2-D vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidPolygon("polygon vertices must be finite")
        area = _signed_area(v)
        ext = np.ptp(v, axis=0).max()
        if abs(area) <= 1e-12 * max(ext, 1e-300) ** 2:
            raise InvalidPolygon("polygon is degenerate (zero area)")
        if area < 0:
            v = v[::-1].copy()
        if check and _segments_cross(v):
            raise InvalidPolygon("polygon is not simple")
        v.setflags(write=False)
        self.vertices = v

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"Polygon({len(self.vertices)} vertices, area={self.area:.6g})"

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        return np.sum((v + w) * cross[:, None], axis=0) / (6.0 * self.area)

    @property
    def diameter(self) -> float:
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def transformed(self, linear, translation=(0.0, 0.0), check: bool = False) -> "Polygon":
        v = self.vertices @ np.asarray(linear, dtype=float).T + np.asarray(translation, dtype=float)
        return Polygon(v, check=check)


def polygon_area(poly: Polygon) -> float:
    return poly.area


def _winding(a: np.ndarray, x: np.ndarray, max_pairs: int = 4_000_000) -> np.ndarray:
    """Winding numbers of points ``x`` w.r.t. the closed polyline ``a``.

    Each edge is only tested against the points inside its y-band (points
    are sorted by y), so dense polylines cost roughly O(N + V log N).
    """
    b = np.roll(a, -1, axis=0)
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    order = np.argsort(x[:, 1], kind="stable")
    ys = x[order, 1]
    lo = np.searchsorted(ys, np.minimum(ay, by), side="left")
    hi = np.searchsorted(ys, np.maximum(ay, by), side="left")
    counts = hi - lo
    wind = np.zeros(len(x), dtype=np.int64)
    csum = np.cumsum(counts)
    e0 = 0
    n_edges = len(a)
    while e0 < n_edges:
        base = csum[e0 - 1] if e0 > 0 else 0
        e1 = int(np.searchsorted(csum, base + max_pairs, side="right"))
        e1 = min(max(e1, e0 + 1), n_edges)
        c = counts[e0:e1]
        tot = int(c.sum())
        if tot:
            eid = np.repeat(np.arange(e0, e1), c)
            offs = np.arange(tot) - np.repeat(np.cumsum(c) - c, c)
            pid = order[np.repeat(lo[e0:e1], c) + offs]
            px, py = x[pid, 0], x[pid, 1]
            cross = (bx[eid] - ax[eid]) * (py - ay[eid]) - (px - ax[eid]) * (by[eid] - ay[eid])
            up = (ay[eid] <= py) & (by[eid] > py) & (cross > 0)
            down = (ay[eid] > py) & (by[eid] <= py) & (cross < 0)
            np.add.at(wind, pid, up.astype(np.int64) - down.astype(np.int64))
        e0 = e1
    return wind


def point_in_polygon(poly: Polygon, x) -> np.ndarray:
    """Nonzero-winding inside test; points exactly on an edge may go either way."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if len(x) == 0:
        return np.zeros(0, dtype=bool)
    return _winding(poly.vertices, x) != 0


def _nearest_on_edges(poly: Polygon, x: np.ndarray):
    a = poly.vertices
    e = poly.edges
    ee = np.sum(e * e, axis=1)
    ee = np.where(ee > 0, ee, 1.0)
    d = x[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(d * e[None], axis=-1) / ee[None], 0.0, 1.0)
    diff = d - t[..., None] * e[None]
    dist2 = np.sum(diff * diff, axis=-1)
    k = np.argmin(dist2, axis=1)
    rows = np.arange(len(x))
    return np.sqrt(dist2[rows, k]), diff[rows, k], k


def polygon_sdf(poly: Polygon, x, return_grad: bool = False, chunk: int | None = None):
    """Signed distance to the polygon boundary, positive inside.

    With ``return_grad`` the spatial gradient is returned as well. At points
    equidistant from several edges the gradient of the lowest-index nearest
    edge is used.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    dist = np.empty(len(xs))
    grad = np.empty((len(xs), 2)) if return_grad else None
    if chunk is None:
        chunk = max(16, 2_000_000 // len(poly.vertices))
    for s in range(0, len(xs), chunk):
        blk = xs[s:s + chunk]
        d, diff, _ = _nearest_on_edges(poly, blk)
        sign = np.where(point_in_polygon(poly, blk), 1.0, -1.0)
        dist[s:s + chunk] = sign * d
        if return_grad:
            with np.errstate(invalid="ignore", divide="ignore"):
                g = diff / d[:, None]
            g[~np.isfinite(g)] = 0.0
            grad[s:s + chunk] = sign[:, None] * g
    if single:
        return (dist[0], grad[0]) if return_grad else dist[0]
    return (dist, grad) if return_grad else dist


def boundary_distance(poly: Polygon, x, k: int = 8) -> np.ndarray:
    """Unsigned distance to the boundary.

    Exact for small polygons; for dense polylines (> 512 vertices) only the
    segments adjacent to the ``k`` nearest vertices are examined (KD-tree),
    which is exact whenever the nearest segment has one of those vertices as
    an endpoint, the usual case for finely sampled curves.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = poly.vertices
    if len(v) <= 512:
        return np.abs(polygon_sdf(poly, x))
    from scipy.spatial import cKDTree

    k = min(k, len(v))
    _, nbr = cKDTree(v).query(x, k=k)
    nbr = nbr.reshape(len(x), k)
    segs = np.concatenate([nbr, (nbr - 1) % len(v)], axis=1)
    a = v[segs]
    e = v[(segs + 1) % len(v)] - a
    ee = np.maximum(np.sum(e * e, axis=-1), 1e-300)
    d = x[:, None, :] - a
    t = np.clip(np.sum(d * e, axis=-1) / ee, 0.0, 1.0)
    diff = d - t[..., None] * e
    return np.sqrt(np.min(np.sum(diff * diff, axis=-1), axis=1))


def hausdorff_distance(a: Polygon, b: Polygon, samples_per_edge: int = 8) -> float:
    """Symmetric Hausdorff distance between two polygon boundaries (edges sampled)."""

    def dense(poly):
        v = poly.vertices
        t = np.arange(samples_per_edge) / samples_per_edge
        return (v[:, None, :] + t[None, :, None] * (np.roll(v, -1, axis=0) - v)[:, None, :]).reshape(-1, 2)

    return float(max(boundary_distance(b, dense(a)).max(), boundary_distance(a, dense(b)).max()))


@dataclass(frozen=True)
class Grid:
    """Pixel grid: ``shape = (rows, cols)``, row 0 at the top, ``origin`` the lower-left corner."""

    shape: tuple[int, int]
    origin: tuple[float, float] = (0.0, 0.0)
    pixel_size: float = 1.0

    @property
    def extent(self) -> tuple[float, float, float, float]:
        h, w = self.shape
        x0, y0 = self.origin
        return x0, y0, x0 + w * self.pixel_size, y0 + h * self.pixel_size

    def pixel_centers(self) -> np.ndarray:
        h, w = self.shape
        x0, y0 = self.origin
        xs = x0 + (np.arange(w) + 0.5) * self.pixel_size
        ys = y0 + (h - np.arange(h) - 0.5) * self.pixel_size
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def lookup(self, mask: np.ndarray, x) -> np.ndarray:
        """Nearest-pixel lookup of ``mask`` at world points; outside the grid reads as False."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h, w = self.shape
        col = np.floor((x[:, 0] - self.origin[0]) / self.pixel_size).astype(np.int64)
        row = h - 1 - np.floor((x[:, 1] - self.origin[1]) / self.pixel_size).astype(np.int64)
        ok = (col >= 0) & (col < w) & (row >= 0) & (row < h)
        out = np.zeros(len(x), dtype=bool)
        out[ok] = mask[row[ok], col[ok]]
        return out

    def resampled(self, resolution: int) -> "Grid":
        x0, y0, x1, y1 = self.extent
        size = max(x1 - x0, y1 - y0) / resolution
        w = max(1, int(round((x1 - x0) / size)))
        h = max(1, int(round((y1 - y0) / size)))
        return Grid((h, w), (x0, y0), size)


def rasterize_polygon(poly: Polygon, grid: Grid) -> np.ndarray:
    """Pixel-center occupancy of ``poly`` on ``grid`` as a boolean (rows, cols) array."""
    pts = grid.pixel_centers()
    inside = np.zeros(len(pts), dtype=bool)
    x0, y0, x1, y1 = poly.bbox()
    cand = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    idx = np.nonzero(cand)[0]
    inside[idx] = point_in_polygon(poly, pts[idx])
    return inside.reshape(grid.shape)


def rasterize_metrics(tile: Polygon, mask: np.ndarray, grid: Grid, resolution: int | None = 512):
    """IoU and pixel accuracy between ``tile`` and an occupancy mask.

    The comparison runs on a ``resolution``-pixel grid over the mask's extent
    (nearest-pixel resampling of the mask); ``resolution=None`` uses the mask
    grid as is. Two empty masks give ``(1.0, 1.0)`` by convention.
    """
    mask = np.asarray(mask, dtype=bool)
    if resolution is not None:
        g = grid.resampled(resolution)
        target = grid.lookup(mask, g.pixel_centers()).reshape(g.shape)
    else:
        g, target = grid, mask
    ours = rasterize_polygon(tile, g)
    union = np.count_nonzero(ours | target)
    inter = np.count_nonzero(ours & target)
    iou = 1.0 if union == 0 else inter / union
    acc = np.count_nonzero(ours == target) / ours.size
    return float(iou), float(acc)
