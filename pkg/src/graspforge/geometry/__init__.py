"""Object and environment geometry: SDF models, sampling, rest poses."""

from .meshio import (
    load_geometry,
    load_mesh,
    load_point_cloud,
    save_mesh_obj,
    save_point_cloud_ply,
)
from .primitives import box_mesh, cylinder_mesh, icosphere, tetrahedron_mesh
from .sampling import (
    RigidPose,
    TABLE_CONTACT_CLEARANCE,
    area_weighted_surface_points,
    poisson_disk_sample,
    stable_rest_poses,
)
from .surface import (
    ContactPoint,
    Environment,
    SurfaceModel,
    build_surface_model,
    closest_point_on_triangle,
    convex_hull_mesh,
    normal_jacobian,
    project_to_surface,
    read_sdf_cache,
    sdf_gradient,
    signed_distance,
    surface_normal,
    tangent_basis,
    tangent_basis_jacobian,
    write_sdf_cache,
)

__all__ = [
    "ContactPoint",
    "Environment",
    "RigidPose",
    "SurfaceModel",
    "TABLE_CONTACT_CLEARANCE",
    "area_weighted_surface_points",
    "box_mesh",
    "build_surface_model",
    "closest_point_on_triangle",
    "convex_hull_mesh",
    "cylinder_mesh",
    "icosphere",
    "load_geometry",
    "load_mesh",
    "load_point_cloud",
    "normal_jacobian",
    "poisson_disk_sample",
    "project_to_surface",
    "read_sdf_cache",
    "save_mesh_obj",
    "save_point_cloud_ply",
    "sdf_gradient",
    "signed_distance",
    "stable_rest_poses",
    "surface_normal",
    "tangent_basis",
    "tangent_basis_jacobian",
    "tetrahedron_mesh",
    "write_sdf_cache",
]
