"""Signed-distance surface models built from triangle meshes or point clouds.

A SurfaceModel holds a triangle mesh plus a regular grid of exact signed
distances; queries interpolate trilinearly, so distance, gradient, and normal
are cheap and smooth enough to differentiate through.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from ..errors import DegenerateGeometry, DegenerateNormal, ParseError

SDF_CACHE_MAGIC = b"GFSD"

# Queries further than one cell from a face use the padded-grid extrapolation.
_PAD_CELLS = 5


@dataclass(frozen=True)
class Environment:
    """The fixed tabletop: a plane through `table_point` with upward normal."""

    table_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    table_normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "table_point", np.asarray(self.table_point, dtype=float))
        n = np.asarray(self.table_normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("table normal must be unit length")
        object.__setattr__(self, "table_normal", n)

    def height(self, points):
        """Signed height of point(s) above the table plane."""
        points = np.asarray(points, dtype=float)
        return (points - self.table_point) @ self.table_normal


@dataclass(frozen=True)
class ContactPoint:
    """Surface point with outward unit normal and orthonormal tangent pair."""

    position: np.ndarray
    normal: np.ndarray
    tangent1: np.ndarray
    tangent2: np.ndarray

    def __post_init__(self):
        for name in ("position", "normal", "tangent1", "tangent2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n, t1, t2 = self.normal, self.tangent1, self.tangent2
        for v in (n, t1, t2):
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError("contact frame vectors must be unit length")
        if max(abs(n @ t1), abs(n @ t2), abs(t1 @ t2)) > 1e-9:
            raise ValueError("contact frame must be orthogonal")

    @classmethod
    def from_normal(cls, position, normal):
        t1, t2 = tangent_basis(normal)
        return cls(position, np.asarray(normal, dtype=float), t1, t2)


@dataclass(frozen=True)
class SurfaceModel:
    """Triangle mesh plus signed-distance grid, optionally rigidly posed.

    The grid lives in the object frame; `rotation`/`translation` give the
    world-from-object transform so a model can be re-posed without rebuilding.
    """

    vertices: np.ndarray          # (V,3) object frame
    faces: np.ndarray             # (F,3) int
    sdf: np.ndarray               # (nx,ny,nz) float64
    grid_origin: np.ndarray       # (3,) object frame
    grid_spacing: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.grid_spacing <= 0:
            raise ValueError("grid_spacing must be positive")

    @property
    def dims(self):
        return np.array(self.sdf.shape)

    @property
    def grid_max(self):
        return self.grid_origin + (self.dims - 1) * self.grid_spacing

    @property
    def bounding_box(self):
        """Axis-aligned bounds of the mesh in the object frame."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def world_vertices(self):
        return self.vertices @ self.rotation.T + self.translation

    def world_triangles(self):
        wv = self.world_vertices
        return wv[self.faces[:, 0]], wv[self.faces[:, 1]], wv[self.faces[:, 2]]

    def transformed(self, rotation, translation):
        """Return a copy posed by world' = rotation @ world + translation."""
        rotation = np.asarray(rotation, dtype=float)
        translation = np.asarray(translation, dtype=float)
        return SurfaceModel(
            vertices=self.vertices,
            faces=self.faces,
            sdf=self.sdf,
            grid_origin=self.grid_origin,
            grid_spacing=self.grid_spacing,
            rotation=rotation @ self.rotation,
            translation=rotation @ self.translation + translation,
        )

    def to_object_frame(self, points):
        return (np.asarray(points, dtype=float) - self.translation) @ self.rotation

    def surface_area(self):
        a, b, c = self.world_triangles()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum()


def build_surface_model(mesh_or_points, grid_resolution=64, faces=None, sdf_cache=None):
    """Build a SurfaceModel from (vertices, faces) or a raw point cloud.

    Point clouds (faces is None) are meshed with their convex hull. The grid
    spans the mesh bounding box padded by at least five cells, with the box
    center placed exactly on a grid node.
    """
    if isinstance(mesh_or_points, tuple):
        vertices, faces = mesh_or_points
    else:
        vertices = mesh_or_points
    vertices = np.asarray(vertices, dtype=float)
    if grid_resolution < 16:
        raise ValueError("grid_resolution must be >= 16 per axis")
    if vertices.ndim != 2 or vertices.shape[1] != 3 or len(vertices) < 4:
        raise DegenerateGeometry("need at least 4 points in R^3")
    if faces is None:
        vertices, faces = convex_hull_mesh(vertices)
    else:
        faces = np.asarray(faces, dtype=np.int64)
        _require_volume(vertices)

    if sdf_cache is not None:
        try:
            origin, spacing, samples = read_sdf_cache(sdf_cache)
            return SurfaceModel(vertices, faces, samples, origin, spacing)
        except (OSError, ParseError):
            pass
    origin, spacing, samples = _build_sdf_grid(vertices, faces, grid_resolution)
    model = SurfaceModel(vertices, faces, samples, origin, spacing)
    if sdf_cache is not None:
        write_sdf_cache(model, sdf_cache)
    return model


def convex_hull_mesh(points):
    """Convex hull of a point set as an outward-oriented triangle mesh."""
    points = np.asarray(points, dtype=float)
    _require_volume(points)
    hull = ConvexHull(points)
    vertices = points[hull.vertices]
    remap = np.full(len(points), -1, dtype=np.int64)
    remap[hull.vertices] = np.arange(len(hull.vertices))
    faces = remap[hull.simplices]
    # Orient each face outward using qhull's plane equations.
    normals = hull.equations[:, :3]
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    geo = np.cross(b - a, c - a)
    flip = np.einsum("ij,ij->i", geo, normals) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return vertices, faces


def _require_volume(points):
    if len(points) < 4:
        raise DegenerateGeometry("need at least 4 points")
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    scale = max(s[0], 1e-30)
    if s[-1] / scale < 1e-9:
        raise DegenerateGeometry("points are coplanar")


# ---------------------------------------------------------------------------
# Grid construction
# ---------------------------------------------------------------------------

def _build_sdf_grid(vertices, faces, resolution):
    bbox_min = vertices.min(axis=0)
    bbox_max = vertices.max(axis=0)
    extent = bbox_max - bbox_min
    spacing = float(extent.max()) / max(resolution - 1 - 2 * _PAD_CELLS, 8)
    center = 0.5 * (bbox_min + bbox_max)
    half_counts = np.ceil((extent / 2.0 + _PAD_CELLS * spacing) / spacing).astype(int)
    dims = 2 * half_counts + 1
    origin = center - half_counts * spacing

    axes = [origin[k] + spacing * np.arange(dims[k]) for k in range(3)]
    unsigned = _unsigned_distance_grid(vertices, faces, axes, spacing)
    inside = _inside_mask(vertices, faces, axes)
    samples = np.where(inside, -unsigned, unsigned)
    return origin, spacing, samples


def _triangle_corners(vertices, faces):
    return vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]


def _unsigned_distance_grid(vertices, faces, axes, spacing, band_cells=3):
    """Unsigned distance on the grid: exact in a band near each triangle,
    then closest-point jump flooding outward (sub-cell accurate far field)."""
    dims = (len(axes[0]), len(axes[1]), len(axes[2]))
    origin = np.array([axes[0][0], axes[1][0], axes[2][0]])
    dist = np.full(dims, np.inf)
    closest = np.full(dims + (3,), 1e6)
    a, b, c = _triangle_corners(vertices, faces)
    band = band_cells * spacing
    for t in range(len(faces)):
        lo = np.minimum(np.minimum(a[t], b[t]), c[t]) - band
        hi = np.maximum(np.maximum(a[t], b[t]), c[t]) + band
        i0 = np.maximum(np.ceil((lo - origin) / spacing).astype(int), 0)
        i1 = np.minimum(np.floor((hi - origin) / spacing).astype(int), np.array(dims) - 1)
        if np.any(i0 > i1):
            continue
        local_axes = [axes[k][i0[k]:i1[k] + 1] for k in range(3)]
        pts = np.stack(np.meshgrid(*local_axes, indexing="ij"), axis=-1).reshape(-1, 3)
        cp = closest_point_on_triangle(
            pts,
            np.broadcast_to(a[t], pts.shape),
            np.broadcast_to(b[t], pts.shape),
            np.broadcast_to(c[t], pts.shape),
        )
        d = np.linalg.norm(cp - pts, axis=1)
        block = (slice(i0[0], i1[0] + 1), slice(i0[1], i1[1] + 1), slice(i0[2], i1[2] + 1))
        shape = tuple(i1[k] - i0[k] + 1 for k in range(3))
        d = d.reshape(shape)
        cp = cp.reshape(shape + (3,))
        better = d < dist[block]
        dist[block] = np.where(better, d, dist[block])
        closest[block] = np.where(better[..., None], cp, closest[block])
    _jump_flood(dist, closest, axes)
    return dist


def _jump_flood(dist, closest, axes):
    """Propagate closest-point candidates across the grid (JFA + cleanup)."""
    dims = dist.shape
    X = np.stack(np.meshgrid(axes[0], axes[1], axes[2], indexing="ij"), axis=-1)
    dist2 = np.where(np.isfinite(dist), dist * dist, np.inf)
    strides = []
    s = 1
    while s * 2 < max(dims):
        s *= 2
    while s >= 1:
        strides.append(s)
        s //= 2
    strides.append(1)
    offsets = [
        (dx, dy, dz)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
        if (dx, dy, dz) != (0, 0, 0)
    ]
    for s in strides:
        for off in offsets:
            shift = tuple(o * s for o in off)
            dst = tuple(
                slice(max(sh, 0), dims[k] + min(sh, 0)) for k, sh in enumerate(shift)
            )
            if any(sl.start >= sl.stop for sl in dst):
                continue
            src = tuple(
                slice(max(-sh, 0), dims[k] + min(-sh, 0)) for k, sh in enumerate(shift)
            )
            cand_cp = closest[src]
            delta = X[dst] - cand_cp
            cand_d2 = np.einsum("...i,...i->...", delta, delta)
            better = cand_d2 < dist2[dst]
            if better.any():
                dist2[dst] = np.where(better, cand_d2, dist2[dst])
                closest[dst] = np.where(better[..., None], cand_cp, closest[dst])
    np.sqrt(dist2, out=dist)


def closest_point_on_triangle(p, a, b, c):
    """Closest points on triangles (a,b,c) to points p; all inputs (N,3)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp_ = p - c
    d5 = np.einsum("ij,ij->i", ab, cp_)
    d6 = np.einsum("ij,ij->i", ac, cp_)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        v_ac = d2 / (d2 - d6)
        v_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom

    result = a + v[:, None] * ab + w[:, None] * ac  # interior default
    on_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    result = np.where(on_bc[:, None], b + np.clip(v_bc, 0, 1)[:, None] * (c - b), result)
    on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    result = np.where(on_ac[:, None], a + np.clip(v_ac, 0, 1)[:, None] * ac, result)
    on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    result = np.where(on_ab[:, None], a + np.clip(v_ab, 0, 1)[:, None] * ab, result)
    at_c = (d6 >= 0) & (d5 <= d6)
    result = np.where(at_c[:, None], c, result)
    at_b = (d3 >= 0) & (d4 <= d3)
    result = np.where(at_b[:, None], b, result)
    at_a = (d1 <= 0) & (d2 <= 0)
    result = np.where(at_a[:, None], a, result)
    return result


def _inside_mask(vertices, faces, axes):
    """Parity-based inside test on all grid nodes, ray cast along +x."""
    xs, ys, zs = axes
    nx, ny, nz = len(xs), len(ys), len(zs)
    spacing = xs[1] - xs[0]
    # Deterministic sub-cell jitter keeps rays off triangle edges.
    ry = ys + 0.37e-4 * spacing
    rz = zs + 0.61e-4 * spacing
    a, b, c = _triangle_corners(vertices, faces)
    row_hits = []   # flattened (j * nz + k) per crossing
    x_hits = []
    for t in range(len(faces)):
        ta, tb, tc = a[t], b[t], c[t]
        j0 = np.searchsorted(ry, min(ta[1], tb[1], tc[1]), side="left")
        j1 = np.searchsorted(ry, max(ta[1], tb[1], tc[1]), side="right")
        k0 = np.searchsorted(rz, min(ta[2], tb[2], tc[2]), side="left")
        k1 = np.searchsorted(rz, max(ta[2], tb[2], tc[2]), side="right")
        if j0 >= j1 or k0 >= k1:
            continue
        den = (tb[1] - ta[1]) * (tc[2] - ta[2]) - (tb[2] - ta[2]) * (tc[1] - ta[1])
        if abs(den) < 1e-18:  # ray-parallel plane: measure zero after jitter
            continue
        yy = ry[j0:j1][:, None] - ta[1]
        zz = rz[k0:k1][None, :] - ta[2]
        w1 = ((tc[2] - ta[2]) * yy - (tc[1] - ta[1]) * zz) / den
        w2 = (-(tb[2] - ta[2]) * yy + (tb[1] - ta[1]) * zz) / den
        hit = (w1 > 0) & (w2 > 0) & (w1 + w2 < 1)
        if not hit.any():
            continue
        jj, kk = np.nonzero(hit)
        x_hit = ta[0] + w1[hit] * (tb[0] - ta[0]) + w2[hit] * (tc[0] - ta[0])
        row_hits.append((j0 + jj) * nz + (k0 + kk))
        x_hits.append(x_hit)
    inside = np.zeros((nx, ny, nz), dtype=bool)
    if not row_hits:
        return inside
    rows = np.concatenate(row_hits)
    hits_x = np.concatenate(x_hits)
    # Bucket each crossing by the first grid x at or beyond it, then a prefix
    # sum per row counts crossings at or left of every sample.
    buckets = np.searchsorted(xs, hits_x, side="left")
    delta = np.zeros((ny * nz, nx + 1), dtype=np.int64)
    np.add.at(delta, (rows, buckets), 1)
    count_le = np.cumsum(delta[:, :nx], axis=1)
    total = delta.sum(axis=1)[:, None]
    odd = ((total - count_le) % 2 == 1)  # crossings strictly right of sample
    return odd.reshape(ny, nz, nx).transpose(2, 0, 1)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def _interp(model, q):
    """Trilinear interpolation at object-frame points q (N,3), clamped."""
    dims = model.dims
    u = (q - model.grid_origin) / model.grid_spacing
    i = np.clip(np.floor(u).astype(int), 0, dims - 2)
    f = u - i
    s = model.sdf
    ix, iy, iz = i[:, 0], i[:, 1], i[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    c00 = s[ix, iy, iz] * (1 - fx) + s[ix + 1, iy, iz] * fx
    c10 = s[ix, iy + 1, iz] * (1 - fx) + s[ix + 1, iy + 1, iz] * fx
    c01 = s[ix, iy, iz + 1] * (1 - fx) + s[ix + 1, iy, iz + 1] * fx
    c11 = s[ix, iy + 1, iz + 1] * (1 - fx) + s[ix + 1, iy + 1, iz + 1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


def _object_frame_value(model, q):
    lo = model.grid_origin
    hi = model.grid_max
    qc = np.clip(q, lo, hi)
    extra = np.linalg.norm(q - qc, axis=1)
    return _interp(model, qc) + extra


def signed_distance(model, points):
    """Signed distance (m) at world point(s); negative inside the object.

    Total on R^3: queries outside the grid add the distance to the grid
    boundary to the boundary value.
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    q = model.to_object_frame(points.reshape(-1, 3))
    vals = _object_frame_value(model, q)
    return float(vals[0]) if single else vals


def sdf_gradient(model, points):
    """Smoothed SDF gradient at world point(s), central differences."""
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    q = model.to_object_frame(points.reshape(-1, 3))
    h = 0.5 * model.grid_spacing
    grad = np.empty_like(q)
    for k in range(3):
        dq = np.zeros(3)
        dq[k] = h
        grad[:, k] = (_object_frame_value(model, q + dq) - _object_frame_value(model, q - dq)) / (2 * h)
    grad = grad @ model.rotation.T
    return grad[0] if single else grad


def surface_normal(model, point):
    """Outward unit normal from the SDF gradient at a world point."""
    g = sdf_gradient(model, point)
    norm = np.linalg.norm(g)
    if norm < 1e-6:
        raise DegenerateNormal(f"gradient magnitude {norm:.2e} at {point}")
    return g / norm


def normal_jacobian(model, point, step=1e-6):
    """d(normal)/d(point), 3x3, by central differences of surface_normal."""
    point = np.asarray(point, dtype=float)
    J = np.empty((3, 3))
    for k in range(3):
        d = np.zeros(3)
        d[k] = step
        J[:, k] = (surface_normal(model, point + d) - surface_normal(model, point - d)) / (2 * step)
    return J


def project_to_surface(model, point, max_iterations=64, tolerance=1e-5, return_info=False):
    """Project a world point onto the zero level set by damped gradient steps.

    Returns the projected point; with return_info=True returns
    (point, converged). The best iterate is returned even on failure.
    """
    p = np.asarray(point, dtype=float).copy()
    best = p.copy()
    best_d = abs(signed_distance(model, p))
    for _ in range(max_iterations):
        d = signed_distance(model, p)
        if abs(d) <= tolerance:
            best, best_d = p.copy(), abs(d)
            break
        g = sdf_gradient(model, p)
        gg = float(g @ g)
        if gg < 1e-12:
            break
        step = 1.0
        while step > 1e-3:
            cand = p - step * d * g / gg
            if abs(signed_distance(model, cand)) < abs(d):
                p = cand
                break
            step *= 0.5
        else:
            break
        if abs(signed_distance(model, p)) < best_d:
            best = p.copy()
            best_d = abs(signed_distance(model, p))
    converged = best_d <= tolerance
    if return_info:
        return best, converged
    return best


def tangent_basis(normal):
    """Deterministic orthonormal tangents with t1 x t2 = n.

    Pivot rule: seed with the coordinate axis of the smallest |n| component.
    """
    n = np.asarray(normal, dtype=float)
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    u = e - (e @ n) * n
    t1 = u / np.linalg.norm(u)
    t2 = np.cross(n, t1)
    return t1, t2


def tangent_basis_jacobian(normal):
    """Derivatives (dt1/dn, dt2/dn) of the pivot-rule tangent basis."""
    n = np.asarray(normal, dtype=float)
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    u = e - (e @ n) * n
    norm_u = np.linalg.norm(u)
    t1 = u / norm_u
    du_dn = -(np.outer(n, e) + (e @ n) * np.eye(3))
    dt1_dn = (np.eye(3) - np.outer(t1, t1)) @ du_dn / norm_u
    t1x = np.array([[0, -t1[2], t1[1]], [t1[2], 0, -t1[0]], [-t1[1], t1[0], 0]])
    nx = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    dt2_dn = -t1x + nx @ dt1_dn
    return dt1_dn, dt2_dn


# ---------------------------------------------------------------------------
# SDF grid cache
# ---------------------------------------------------------------------------

def write_sdf_cache(model, path):
    """Binary grid dump: magic, u32 dims, f64 origin+spacing, f32 x-fastest."""
    with open(path, "wb") as fh:
        fh.write(SDF_CACHE_MAGIC)
        fh.write(struct.pack("<3I", *(int(d) for d in model.dims)))
        fh.write(struct.pack("<3d", *model.grid_origin))
        fh.write(struct.pack("<d", model.grid_spacing))
        fh.write(np.asfortranarray(model.sdf.astype("<f4")).tobytes(order="F"))


def read_sdf_cache(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SDF_CACHE_MAGIC:
            raise ParseError(f"{path}: bad SDF cache magic {magic!r}")
        dims = struct.unpack("<3I", fh.read(12))
        origin = np.array(struct.unpack("<3d", fh.read(24)))
        spacing = struct.unpack("<d", fh.read(8))[0]
        n = dims[0] * dims[1] * dims[2]
        samples = np.frombuffer(fh.read(4 * n), dtype="<f4").astype(np.float64)
    samples = samples.reshape(dims, order="F")
    return origin, spacing, samples
