"""Small SO(3)/SE(3) helpers: exponential coordinates, quaternions, frames."""

import numpy as np


def skew(v):
    """Cross-product matrix [v]x such that skew(v) @ u == cross(v, u)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def exp_so3(omega):
    """Rotation matrix from exponential coordinates (Rodrigues)."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    K = skew(omega)
    if theta < 1e-10:
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R):
    """Exponential coordinates of a rotation matrix, norm in [0, pi]."""
    trace = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(trace)
    if theta < 1e-10:
        w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        return 0.5 * w
    if np.pi - theta < 1e-6:
        # Near pi the off-diagonal formula degenerates; use the symmetric part.
        S = 0.5 * (R + np.eye(3))
        axis = np.sqrt(np.clip(np.diag(S), 0.0, None))
        # Fix signs from the largest component.
        k = int(np.argmax(axis))
        if axis[k] > 0:
            for i in range(3):
                if i != k and S[k, i] < 0:
                    axis[i] = -axis[i]
        axis /= max(np.linalg.norm(axis), 1e-12)
        return theta * axis
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return theta / (2.0 * np.sin(theta)) * w


def left_jacobian_so3(omega):
    """Left Jacobian J_l of SO(3): exp((w + d)^) ~ exp((J_l d)^) exp(w^)."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    K = skew(omega)
    if theta < 1e-4:
        a = 0.5 - theta * theta / 24.0
        b = 1.0 / 6.0 - theta * theta / 120.0
    else:
        a = (1.0 - np.cos(theta)) / (theta * theta)
        b = (theta - np.sin(theta)) / (theta ** 3)
    return np.eye(3) + a * K + b * (K @ K)


def clamp_rotation_vector(omega, limit=np.pi):
    """Map omega to the equivalent rotation vector with norm <= limit."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    if theta <= limit:
        return omega
    # Wrap the angle into (-pi, pi] while keeping the axis.
    wrapped = np.remainder(theta + np.pi, 2.0 * np.pi) - np.pi
    return omega * (wrapped / theta)


def rotation_between(a, b):
    """Rotation matrix taking unit vector a onto unit vector b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(np.dot(a, b))
    v = np.cross(a, b)
    s2 = float(np.dot(v, v))
    if s2 < 1e-16:
        if c > 0:
            return np.eye(3)
        # Opposite vectors: rotate pi about any axis orthogonal to a.
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.dot(axis, axis) < 1e-12:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return exp_so3(np.pi * axis)
    K = skew(v)
    return np.eye(3) + K + K @ K * ((1.0 - c) / s2)


def rotation_about_axis(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return exp_so3(axis * float(angle))


def quat_wxyz_from_matrix(R):
    """Unit quaternion (w, x, y, z) from a rotation matrix, w >= 0."""
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([
            0.25 * s,
            (R[2, 1] - R[1, 2]) / s,
            (R[0, 2] - R[2, 0]) / s,
            (R[1, 0] - R[0, 1]) / s,
        ])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(R[i, i] - R[j, j] - R[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def matrix_from_quat_wxyz(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
