"""Readers and writers for OBJ and PLY geometry files.

Supported: ASCII OBJ meshes, ASCII and binary little-endian PLY meshes and
point clouds. Faces with more than three vertices are fan-triangulated.
"""

import struct

import numpy as np

from ..errors import ParseError

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def load_mesh(path):
    """Load a triangle mesh, returning (vertices (V,3) f64, faces (F,3) i64)."""
    text = str(path)
    if text.lower().endswith(".obj"):
        return _load_obj(path)
    if text.lower().endswith(".ply"):
        vertices, faces = _load_ply(path)
        if faces is None or len(faces) == 0:
            raise ParseError(f"{path}: PLY file has no faces; use load_point_cloud")
        return vertices, faces
    raise ParseError(f"{path}: unsupported mesh format (expected .obj or .ply)")


def load_point_cloud(path):
    """Load point positions (N,3) from a PLY file (faces, if any, ignored)."""
    if not str(path).lower().endswith(".ply"):
        raise ParseError(f"{path}: point clouds must be PLY files")
    vertices, _ = _load_ply(path)
    return vertices


def load_geometry(path):
    """Load either a mesh or a point cloud.

    Returns (vertices, faces) where faces is None for point clouds.
    """
    text = str(path)
    if text.lower().endswith(".obj"):
        return _load_obj(path)
    if text.lower().endswith(".ply"):
        vertices, faces = _load_ply(path)
        if faces is not None and len(faces) == 0:
            faces = None
        return vertices, faces
    raise ParseError(f"{path}: unsupported geometry format")


def save_mesh_obj(path, vertices, faces):
    with open(path, "w") as fh:
        for v in np.asarray(vertices, dtype=float):
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in np.asarray(faces, dtype=int):
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def save_point_cloud_ply(path, points, binary=False):
    points = np.ascontiguousarray(points, dtype=np.float64)
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {len(points)}\n"
        "property double x\nproperty double y\nproperty double z\n"
        "end_header\n"
    )
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(points.astype("<f8").tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(header)
            for p in points:
                fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")


def _load_obj(path):
    vertices = []
    faces = []
    try:
        with open(path, "r") as fh:
            for line_no, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if parts[0] == "v":
                    if len(parts) < 4:
                        raise ParseError(f"{path}:{line_no}: short vertex line")
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                elif parts[0] == "f":
                    idx = []
                    for token in parts[1:]:
                        i = int(token.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(vertices) + i)
                    if len(idx) < 3:
                        raise ParseError(f"{path}:{line_no}: face with <3 vertices")
                    for k in range(1, len(idx) - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not vertices:
        raise ParseError(f"{path}: no vertices found")
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise ParseError(f"{path}: face index out of range")
    return v, f


def _parse_ply_header(fh):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise ParseError("not a PLY file")
    fmt = None
    elements = []  # (name, count, [(prop_name, dtype, list_count_dtype|None)])
    while True:
        raw = fh.readline()
        if not raw:
            raise ParseError("unexpected end of PLY header")
        line = raw.decode("ascii", "replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("PLY property before element")
            if parts[1] == "list":
                count_t = _PLY_DTYPES.get(parts[2])
                item_t = _PLY_DTYPES.get(parts[3])
                if count_t is None or item_t is None:
                    raise ParseError(f"unknown PLY list types in: {line}")
                elements[-1][2].append((parts[4], item_t, count_t))
            else:
                item_t = _PLY_DTYPES.get(parts[1])
                if item_t is None:
                    raise ParseError(f"unknown PLY type in: {line}")
                elements[-1][2].append((parts[2], item_t, None))
        elif parts[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"unsupported PLY format: {fmt}")
    return fmt, elements


def _load_ply(path):
    try:
        with open(path, "rb") as fh:
            fmt, elements = _parse_ply_header(fh)
            data = fh.read()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc

    vertices = None
    faces = None
    if fmt == "ascii":
        tokens = data.split()
        pos = 0
        for name, count, props in elements:
            has_list = any(p[2] is not None for p in props)
            rows = []
            for _ in range(count):
                row = []
                for _, _, count_t in props:
                    if count_t is not None:
                        n = int(tokens[pos]); pos += 1
                        row.append([float(tokens[pos + i]) for i in range(n)])
                        pos += n
                    else:
                        row.append(float(tokens[pos])); pos += 1
                rows.append(row)
            if name == "vertex":
                vertices = _vertex_array(rows, props, path)
            elif name == "face":
                faces = _face_array([r[_list_index(props)] for r in rows], path)
            _ = has_list
    else:
        offset = 0
        for name, count, props in elements:
            has_list = any(p[2] is not None for p in props)
            if not has_list:
                dtype = np.dtype([(p[0], "<" + p[1]) for p in props])
                arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
                offset += dtype.itemsize * count
                if name == "vertex":
                    vertices = _vertex_array_struct(arr, props, path)
            else:
                rows = []
                for _ in range(count):
                    row = []
                    for _, item_t, count_t in props:
                        if count_t is not None:
                            csize = np.dtype(count_t).itemsize
                            n = int(np.frombuffer(data, "<" + count_t, 1, offset)[0])
                            offset += csize
                            vals = np.frombuffer(data, "<" + item_t, n, offset)
                            offset += np.dtype(item_t).itemsize * n
                            row.append(vals.astype(np.int64).tolist())
                        else:
                            row.append(float(np.frombuffer(data, "<" + item_t, 1, offset)[0]))
                            offset += np.dtype(item_t).itemsize
                    rows.append(row)
                if name == "face":
                    faces = _face_array([r[_list_index(props)] for r in rows], path)
    if vertices is None:
        raise ParseError(f"{path}: PLY file has no vertex element")
    return vertices, faces


def _list_index(props):
    for i, (_, _, count_t) in enumerate(props):
        if count_t is not None:
            return i
    raise ParseError("face element without a list property")


def _vertex_array(rows, props, path):
    names = [p[0] for p in props]
    try:
        ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
    except ValueError as exc:
        raise ParseError(f"{path}: vertex element missing x/y/z") from exc
    return np.array([[r[ix], r[iy], r[iz]] for r in rows], dtype=np.float64)


def _vertex_array_struct(arr, props, path):
    names = [p[0] for p in props]
    for key in ("x", "y", "z"):
        if key not in names:
            raise ParseError(f"{path}: vertex element missing x/y/z")
    return np.stack(
        [arr["x"].astype(np.float64), arr["y"].astype(np.float64), arr["z"].astype(np.float64)],
        axis=1,
    )


def _face_array(index_lists, path):
    faces = []
    for idx in index_lists:
        idx = [int(i) for i in idx]
        if len(idx) < 3:
            raise ParseError(f"{path}: face with <3 vertices")
        for k in range(1, len(idx) - 1):
            faces.append([idx[0], idx[k], idx[k + 1]])
    return np.asarray(faces, dtype=np.int64).reshape(-1, 3)
