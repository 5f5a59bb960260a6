import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspforge.errors import DegenerateGeometry, InsufficientSamples
from graspforge.geometry import (
    Environment,
    box_mesh,
    build_surface_model,
    cylinder_mesh,
    icosphere,
    poisson_disk_sample,
    project_to_surface,
    read_sdf_cache,
    sdf_gradient,
    signed_distance,
    stable_rest_poses,
    surface_normal,
    tangent_basis,
    tangent_basis_jacobian,
    tetrahedron_mesh,
    write_sdf_cache,
)
from graspforge.geometry.surface import closest_point_on_triangle

from oracles import (
    brute_force_closest_point,
    finite_difference_jacobian,
    inside_by_ray_parity,
    nearest_triangle_normal,
    point_strictly_inside_polygon_2d,
)


# ---------------------------------------------------------------------------
# build_surface_model / signed_distance
# ---------------------------------------------------------------------------

def test_sphere_center_distance(unit_sphere_model):
    assert signed_distance(unit_sphere_model, np.zeros(3)) == pytest.approx(-1.0, abs=0.02)


def test_sphere_outside_distance(unit_sphere_model):
    assert signed_distance(unit_sphere_model, np.array([2.0, 0.0, 0.0])) == pytest.approx(1.0, abs=0.02)


def test_point_cloud_builds_hull(rng):
    points = rng.normal(size=(10, 3))
    model = build_surface_model(points, 32)
    # Exhaustive point-in-hull: every input point behind every face plane.
    wv = model.world_vertices
    for tri in model.faces:
        a, b, c = wv[tri[0]], wv[tri[1]], wv[tri[2]]
        n = np.cross(b - a, c - a)
        n /= np.linalg.norm(n)
        assert np.max((points - a) @ n) <= 1e-9


def test_too_few_points_raises():
    with pytest.raises(DegenerateGeometry):
        build_surface_model(np.zeros((3, 3)), 32)


def test_coplanar_points_raise(rng):
    pts = rng.normal(size=(20, 3))
    pts[:, 2] = 0.25
    with pytest.raises(DegenerateGeometry):
        build_surface_model(pts, 32)


def test_resolution_floor(unit_cube_mesh):
    with pytest.raises(ValueError):
        build_surface_model(unit_cube_mesh, 8)


def test_cube_center_and_vertex(unit_cube_model):
    m = unit_cube_model
    tol = m.grid_spacing
    assert signed_distance(m, np.zeros(3)) == pytest.approx(-0.5, abs=tol)
    assert abs(signed_distance(m, np.array([0.5, 0.5, 0.5]))) <= tol


def test_cube_random_points_match_brute_force(unit_cube_model, rng):
    m = unit_cube_model
    v, f = m.vertices, m.faces
    pts = rng.uniform(-0.75, 0.75, size=(60, 3))
    for p in pts:
        expected, _ = brute_force_closest_point(p, v, f)
        assert abs(abs(signed_distance(m, p)) - expected) <= 2.0 * m.grid_spacing


def test_grid_padding(unit_cube_model):
    m = unit_cube_model
    lo, hi = m.bounding_box
    assert np.all(m.grid_origin <= lo - 4.999 * m.grid_spacing)
    assert np.all(m.grid_max >= hi + 4.999 * m.grid_spacing)


def test_sign_matches_parity_oracle():
    v, f = icosphere(1.0, 2)
    m = build_surface_model((v, f), 32)
    axes = [m.grid_origin[k] + m.grid_spacing * (np.arange(m.dims[k] - 1) + 0.5) for k in range(3)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    centers = centers[::7]
    vals = signed_distance(m, centers)
    # Cells straddling the surface have no well-defined interpolated sign.
    decided = np.abs(vals) > 0.5 * m.grid_spacing
    inside = inside_by_ray_parity(centers[decided], v, f, direction=(0.013, 0.997, 0.071))
    assert np.array_equal(vals[decided] < 0, inside)


def test_gradient_magnitude_near_unity(unit_sphere_model, rng):
    m = unit_sphere_model
    pts = rng.uniform(-1.2, 1.2, size=(800, 3))
    d = signed_distance(m, pts)
    # Exclude the medial point at the center where the gradient vanishes.
    keep = (np.abs(d) > m.grid_spacing) & (np.linalg.norm(pts, axis=1) > 3 * m.grid_spacing)
    mags = np.linalg.norm(sdf_gradient(m, pts[keep]), axis=1)
    assert mags.min() >= 0.8 and mags.max() <= 1.2


def test_distance_projection_inequality(unit_cube_model, rng):
    m = unit_cube_model
    pts = rng.uniform(-0.8, 0.8, size=(40, 3))
    for p in pts:
        proj = project_to_surface(m, p)
        assert abs(signed_distance(m, p)) <= np.linalg.norm(p - proj) + 2 * m.grid_spacing


# ---------------------------------------------------------------------------
# surface_normal
# ---------------------------------------------------------------------------

def test_sphere_normal(unit_sphere_model):
    n = surface_normal(unit_sphere_model, np.array([1.0, 0.0, 0.0]))
    assert np.linalg.norm(n - [1, 0, 0]) <= 0.02


def test_cube_face_normal(unit_cube_model):
    n = surface_normal(unit_cube_model, np.array([0.5, 0.0, 0.0]))
    assert np.linalg.norm(n - [1, 0, 0]) <= 0.02


def test_normals_match_nearest_triangle(unit_sphere_model, rng):
    m = unit_sphere_model
    for _ in range(25):
        raw = rng.normal(size=3)
        p = raw / np.linalg.norm(raw)
        n = surface_normal(m, p)
        ref = nearest_triangle_normal(p, m.vertices, m.faces)
        angle = np.degrees(np.arccos(np.clip(n @ ref, -1, 1)))
        assert angle <= 10.0


def test_exterior_normal_agrees_with_displacement(unit_sphere_model, rng):
    m = unit_sphere_model
    for _ in range(20):
        p = rng.normal(size=3)
        p = p / np.linalg.norm(p) * rng.uniform(1.2, 1.8)
        if signed_distance(m, p) <= 2 * m.grid_spacing:
            continue
        proj = project_to_surface(m, p)
        disp = (p - proj) / np.linalg.norm(p - proj)
        n = surface_normal(m, proj)
        angle = np.degrees(np.arccos(np.clip(n @ disp, -1, 1)))
        assert angle <= 15.0


# ---------------------------------------------------------------------------
# project_to_surface
# ---------------------------------------------------------------------------

def test_project_sphere_axis(unit_sphere_model):
    p = project_to_surface(unit_sphere_model, np.array([2.0, 0.0, 0.0]))
    assert np.linalg.norm(p - [1, 0, 0]) <= 1e-3 + 0.005  # icosphere faces sit slightly inside


def test_project_fixed_point(unit_sphere_model):
    p0 = project_to_surface(unit_sphere_model, np.array([0.3, -0.8, 0.52]))
    p1 = project_to_surface(unit_sphere_model, p0)
    assert np.linalg.norm(p1 - p0) <= 1e-4


def test_project_residual_tolerance(unit_cube_model, rng):
    m = unit_cube_model
    for _ in range(20):
        p = rng.uniform(-0.9, 0.9, size=3)
        proj, converged = project_to_surface(m, p, return_info=True)
        assert converged
        assert abs(signed_distance(m, proj)) <= 1e-4


def test_project_matches_brute_force_closest(unit_cube_model, rng):
    # Exterior points inside the padded grid, where the field is a true SDF.
    m = unit_cube_model
    for _ in range(25):
        p = rng.uniform(-0.59, 0.59, size=3)
        if signed_distance(m, p) < 0.5 * m.grid_spacing:
            continue
        proj = project_to_surface(m, p)
        _, expected = brute_force_closest_point(p, m.vertices, m.faces)
        assert np.linalg.norm(proj - expected) <= 2.0 * m.grid_spacing


# ---------------------------------------------------------------------------
# tangent_basis
# ---------------------------------------------------------------------------

def test_tangent_basis_pivot_rule():
    t1, t2 = tangent_basis(np.array([0.0, 0.0, 1.0]))
    assert np.allclose(t1, [1, 0, 0])
    assert np.allclose(t2, [0, 1, 0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_tangent_basis_orthonormal(raw):
    v = np.asarray(raw)
    norm = np.linalg.norm(v)
    if norm < 1e-3:
        return
    n = v / norm
    t1, t2 = tangent_basis(n)
    for dot in (n @ t1, n @ t2, t1 @ t2):
        assert abs(dot) <= 1e-12
    assert abs(np.linalg.norm(t1) - 1) <= 1e-12
    assert abs(np.linalg.norm(t2) - 1) <= 1e-12
    assert np.linalg.norm(np.cross(t1, t2) - n) <= 1e-9


def test_tangent_basis_opposite_normals():
    n = np.array([0.3, -0.5, 0.81])
    n = n / np.linalg.norm(n)
    for sign in (1.0, -1.0):
        t1, t2 = tangent_basis(sign * n)
        assert np.linalg.norm(np.cross(t1, t2) - sign * n) <= 1e-9


def test_tangent_basis_jacobian_matches_fd(rng):
    for _ in range(10):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        dt1, dt2 = tangent_basis_jacobian(n)

        # Differentiate along directions tangent to the unit sphere so the
        # perturbed vector stays unit after renormalization.
        def t1_of(x):
            u = x / np.linalg.norm(x)
            return tangent_basis(u)[0]

        def t2_of(x):
            u = x / np.linalg.norm(x)
            return tangent_basis(u)[1]

        J1 = finite_difference_jacobian(t1_of, n, h=1e-7)
        J2 = finite_difference_jacobian(t2_of, n, h=1e-7)
        # The analytic jacobian is the derivative with respect to n restricted
        # to unit-norm variations; compare both projected onto that subspace.
        P = np.eye(3) - np.outer(n, n)
        assert np.linalg.norm(dt1 @ P - J1 @ P) <= 1e-5
        assert np.linalg.norm(dt2 @ P - J2 @ P) <= 1e-5


# ---------------------------------------------------------------------------
# poisson_disk_sample
# ---------------------------------------------------------------------------

def test_poisson_sphere_counts(unit_sphere_model):
    pts = poisson_disk_sample(unit_sphere_model, 256, 0.05, rng_seed=3)
    assert len(pts) == 256
    arr = np.stack([c.position for c in pts])
    d2 = ((arr[:, None, :] - arr[None, :, :]) ** 2).sum(-1)
    d2[np.diag_indices(len(arr))] = np.inf
    assert np.sqrt(d2.min()) >= 0.05


def test_poisson_three_on_slab():
    model = build_surface_model(box_mesh([0.4, 0.4, 0.02]), 48)
    pts = poisson_disk_sample(model, 3, 0.05, rng_seed=1)
    assert len(pts) == 3


def test_poisson_deterministic(unit_sphere_model):
    a = poisson_disk_sample(unit_sphere_model, 64, 0.05, rng_seed=11)
    b = poisson_disk_sample(unit_sphere_model, 64, 0.05, rng_seed=11)
    assert np.array_equal(
        np.stack([c.position for c in a]), np.stack([c.position for c in b])
    )


def test_poisson_removes_table_contact():
    model = build_surface_model(box_mesh([0.08, 0.08, 0.08], center=(0, 0, 0.04)), 48)
    env = Environment()
    pts = poisson_disk_sample(model, 128, 0.01, rng_seed=5, table=env)
    heights = np.stack([c.position for c in pts])[:, 2]
    assert heights.min() > 0.005


def test_poisson_insufficient_samples():
    model = build_surface_model(box_mesh([0.02, 0.02, 0.02]), 32)
    with pytest.raises(InsufficientSamples):
        poisson_disk_sample(model, 16, 10.0, rng_seed=2)


def test_poisson_contact_frames(unit_sphere_model):
    for c in poisson_disk_sample(unit_sphere_model, 16, 0.05, rng_seed=7):
        # Outward normal on a sphere points along the position.
        assert c.normal @ (c.position / np.linalg.norm(c.position)) > 0.9
        assert abs(np.linalg.norm(np.cross(c.tangent1, c.tangent2) - c.normal)) <= 1e-9


# ---------------------------------------------------------------------------
# stable_rest_poses
# ---------------------------------------------------------------------------

def test_cube_has_six_rest_poses(unit_cube_model):
    poses = stable_rest_poses(unit_cube_model, np.zeros(3))
    assert len(poses) == 6


def test_tetrahedron_has_four_rest_poses(tetra_model):
    com = tetra_model.vertices.mean(axis=0)
    poses = stable_rest_poses(tetra_model, com)
    assert len(poses) == 4


def test_offset_com_excludes_face(rng):
    # Tall box; push the COM outside the support polygon of one side face.
    model = build_surface_model(box_mesh([0.04, 0.04, 0.3]), 48)
    com = np.array([0.015, 0.0, 0.14])
    poses = stable_rest_poses(model, com)

    # Oracle: per facet, project the COM and test polygon membership.
    from graspforge.geometry.surface import convex_hull_mesh
    verts, faces = convex_hull_mesh(model.vertices)
    expected = 0
    seen_normals = set()
    for tri in faces:
        a, b, c = verts[tri[0]], verts[tri[1]], verts[tri[2]]
        n = np.cross(b - a, c - a)
        n = n / np.linalg.norm(n)
        key = tuple(np.round(n, 6))
        if key in seen_normals:
            continue
        seen_normals.add(key)
        if (com - a) @ n >= 0:  # COM must be strictly interior
            continue
        t1, t2 = tangent_basis(n)
        face_pts = verts[np.abs((verts - a) @ n) < 1e-9]
        poly = np.stack([face_pts @ t1, face_pts @ t2], axis=1)
        from scipy.spatial import ConvexHull
        poly = poly[ConvexHull(poly).vertices]
        if point_strictly_inside_polygon_2d(np.array([com @ t1, com @ t2]), poly):
            expected += 1
    assert len(poses) == expected
    assert len(poses) < 6


def test_rest_poses_sit_on_table(unit_cube_model, tetra_model):
    for model in (unit_cube_model, tetra_model):
        com = model.vertices.mean(axis=0)
        for pose in stable_rest_poses(model, com):
            heights = pose.apply(model.world_vertices)[:, 2]
            assert heights.min() >= -1e-9


def test_posed_model_queries(unit_cube_model):
    from graspforge.rigid import rotation_about_axis
    R = rotation_about_axis([0, 0, 1], 0.7)
    t = np.array([0.2, -0.1, 0.5])
    posed = unit_cube_model.transformed(R, t)
    p_world = R @ np.array([0.5, 0.0, 0.0]) + t
    assert abs(signed_distance(posed, p_world)) <= posed.grid_spacing
    assert signed_distance(posed, t) == pytest.approx(-0.5, abs=posed.grid_spacing)


# ---------------------------------------------------------------------------
# SDF cache
# ---------------------------------------------------------------------------

def test_sdf_cache_roundtrip(tmp_path, unit_cube_model):
    path = tmp_path / "cube.gfsd"
    write_sdf_cache(unit_cube_model, path)
    origin, spacing, samples = read_sdf_cache(path)
    assert np.allclose(origin, unit_cube_model.grid_origin)
    assert spacing == pytest.approx(unit_cube_model.grid_spacing)
    assert samples.shape == unit_cube_model.sdf.shape
    assert np.max(np.abs(samples - unit_cube_model.sdf)) <= 1e-6


def test_sdf_cache_bad_magic(tmp_path):
    path = tmp_path / "bad.gfsd"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    from graspforge.errors import ParseError
    with pytest.raises(ParseError):
        read_sdf_cache(path)


def test_build_with_cache(tmp_path, unit_cube_mesh):
    path = tmp_path / "cube.gfsd"
    m1 = build_surface_model(unit_cube_mesh, 32, sdf_cache=path)
    assert path.exists()
    m2 = build_surface_model(unit_cube_mesh, 32, sdf_cache=path)
    assert np.max(np.abs(m1.sdf - m2.sdf)) <= 1e-6


# ---------------------------------------------------------------------------
# closest_point_on_triangle vs brute force
# ---------------------------------------------------------------------------

def test_closest_point_regions(rng):
    for _ in range(200):
        tri = rng.normal(size=(3, 3))
        p = rng.normal(size=3) * 2
        got = closest_point_on_triangle(
            p[None, :], tri[0][None, :], tri[1][None, :], tri[2][None, :]
        )[0]
        expected_d, expected_p = brute_force_closest_point(p, tri, np.array([[0, 1, 2]]))
        assert np.linalg.norm(p - got) == pytest.approx(expected_d, abs=1e-9)
