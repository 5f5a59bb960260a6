"""Surface sampling and quasi-static rest-pose analysis."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from ..errors import InsufficientSamples
from ..rigid import quat_wxyz_from_matrix, rotation_between
from .surface import ContactPoint, surface_normal, tangent_basis

# Candidate points closer than this to the table plane count as touching it.
TABLE_CONTACT_CLEARANCE = 0.005


@dataclass(frozen=True)
class RigidPose:
    """World-from-body rotation and translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def as_seven(self):
        """(x, y, z, qw, qx, qy, qz) vector."""
        return np.concatenate([self.translation, quat_wxyz_from_matrix(self.rotation)])


def area_weighted_surface_points(model, count, rng):
    """Uniform random points on the world-frame mesh surface."""
    a, b, c = model.world_triangles()
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    probs = areas / areas.sum()
    tri = rng.choice(len(areas), size=count, p=probs)
    uv = rng.random((count, 2))
    flip = uv.sum(axis=1) > 1.0
    uv[flip] = 1.0 - uv[flip]
    return a[tri] + uv[:, :1] * (b[tri] - a[tri]) + uv[:, 1:] * (c[tri] - a[tri])


def poisson_disk_sample(model, count, min_radius, rng_seed, table=None, oversample=30):
    """Poisson-disk contact candidates on the object surface.

    Greedy dart throwing over an area-weighted pool; pairwise distances are
    at least min_radius. Points within TABLE_CONTACT_CLEARANCE of the table
    plane are removed when `table` is given. Deterministic under rng_seed.
    """
    if count < 3:
        raise ValueError("count must be >= 3")
    if min_radius <= 0:
        raise ValueError("min_radius must be positive")
    rng = np.random.default_rng(rng_seed)
    pool = area_weighted_surface_points(model, max(count * oversample, 2048), rng)
    if table is not None:
        pool = pool[table.height(pool) > TABLE_CONTACT_CLEARANCE]
    accepted = []
    r2 = min_radius * min_radius
    for p in pool:
        if accepted:
            arr = np.asarray(accepted)
            if np.min(((arr - p) ** 2).sum(axis=1)) < r2:
                continue
        accepted.append(p)
        if len(accepted) == count:
            break
    if len(accepted) < 3:
        raise InsufficientSamples(
            f"only {len(accepted)} samples survived (requested {count})"
        )
    contacts = []
    for p in accepted:
        n = surface_normal(model, p)
        t1, t2 = tangent_basis(n)
        contacts.append(ContactPoint(p, n, t1, t2))
    return contacts


def stable_rest_poses(model, center_of_mass):
    """Rest poses from convex-hull facet stability.

    One pose per merged hull facet whose supporting-plane projection of the
    center of mass lies strictly inside the facet polygon. Each pose places
    that facet on the z=0 plane with the center of mass on the z axis.
    """
    com = np.asarray(center_of_mass, dtype=float)
    vertices = model.world_vertices
    hull = ConvexHull(vertices)
    facets = _merged_facets(vertices, hull)
    poses = []
    for normal, offset, polygon, area in facets:
        # The COM must sit strictly interior to the facet's halfspace and its
        # in-plane projection strictly inside the facet polygon.
        if offset - com @ normal <= 0:
            continue
        t1, t2 = _plane_basis(normal)
        origin = offset * normal
        poly2 = np.stack([(polygon - origin) @ t1, (polygon - origin) @ t2], axis=1)
        com2 = np.array([(com - origin) @ t1, (com - origin) @ t2])
        if not _strictly_inside_convex_polygon(com2, poly2):
            continue
        R = rotation_between(normal, np.array([0.0, 0.0, -1.0]))
        lift = -np.min((vertices @ R.T)[:, 2])
        com_rot = R @ com
        t = np.array([-com_rot[0], -com_rot[1], lift])
        poses.append((area, normal, RigidPose(R, t)))
    poses.sort(key=lambda item: (-item[0], tuple(np.round(item[1], 12))))
    return [pose for _, _, pose in poses]


def _merged_facets(vertices, hull):
    """Group coplanar hull simplices into polygonal facets.

    Returns (normal, offset, polygon_vertices, area) per facet.
    """
    eqs = np.round(hull.equations, 9)
    groups = {}
    for simplex_idx, key in enumerate(map(tuple, eqs)):
        groups.setdefault(key, []).append(simplex_idx)
    facets = []
    for key, simplex_ids in groups.items():
        normal = np.array(key[:3])
        normal /= np.linalg.norm(normal)
        vert_ids = np.unique(hull.simplices[simplex_ids].ravel())
        pts = vertices[vert_ids]
        offset = float((pts @ normal).mean())
        t1, t2 = _plane_basis(normal)
        origin = offset * normal
        flat = np.stack([(pts - origin) @ t1, (pts - origin) @ t2], axis=1)
        order = ConvexHull(flat).vertices
        polygon = pts[order]
        flat = flat[order]
        area = _polygon_area(flat)
        facets.append((normal, offset, polygon, area))
    return facets


def _plane_basis(normal):
    t1, t2 = tangent_basis(normal)
    return t1, t2


def _polygon_area(poly2):
    x, y = poly2[:, 0], poly2[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _strictly_inside_convex_polygon(point, polygon, margin=1e-9):
    """True if point lies strictly inside the CCW/CW convex polygon."""
    n = len(polygon)
    signs = []
    for i in range(n):
        edge = polygon[(i + 1) % n] - polygon[i]
        rel = point - polygon[i]
        signs.append(edge[0] * rel[1] - edge[1] * rel[0])
    signs = np.asarray(signs)
    return bool(np.all(signs > margin) or np.all(signs < -margin))
