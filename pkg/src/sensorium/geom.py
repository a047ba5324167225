"""Vector and quaternion helpers shared by physics, kinematics and sensors.

Conventions used throughout the engine:
  * world axes: +x right/east, +y up, +z forward/north (right-handed)
  * gravity acts along -y
  * quaternions are (w, x, y, z), unit length
  * yaw is a rotation about +y; positive yaw turns the forward axis toward +x
"""
from __future__ import annotations

import numpy as np

UP = np.array([0.0, 1.0, 0.0])
FORWARD = np.array([0.0, 0.0, 1.0])
RIGHT = np.array([1.0, 0.0, 0.0])

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def vec(x, y, z) -> np.ndarray:
    return np.array([float(x), float(y), float(z)])


def norm(v) -> float:
    return float(np.sqrt(np.dot(v, v)))


def normalized(v) -> np.ndarray:
    n = norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return np.asarray(v, dtype=float) / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.sqrt(np.dot(q, q))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = normalized(axis)
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate one vector or an (n, 3) stack of vectors by q."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        # v + w*t + qv x t with t = 2 qv x v, avoiding matrix/np.cross overhead
        w, qx, qy, qz = float(q[0]), float(q[1]), float(q[2]), float(q[3])
        vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
        tx = 2.0 * (qy * vz - qz * vy)
        ty = 2.0 * (qz * vx - qx * vz)
        tz = 2.0 * (qx * vy - qy * vx)
        return np.array([
            vx + w * tx + qy * tz - qz * ty,
            vy + w * ty + qz * tx - qx * tz,
            vz + w * tz + qx * ty - qy * tx,
        ])
    return v @ quat_to_matrix(q).T


def quat_from_yaw(yaw: float) -> np.ndarray:
    return quat_from_axis_angle(UP, yaw)


def quat_mul_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product broadcast over stacks of quaternions (n, 4)."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    aw, ax, ay, az = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bw, bx, by, bz = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=1)


def quat_to_matrix_batch(q: np.ndarray) -> np.ndarray:
    """(n, 4) quaternions to (n, 3, 3) rotation matrices."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((q.shape[0], 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def yaw_forward(yaw: float) -> np.ndarray:
    """Horizontal forward direction for a yaw angle (yaw 0 faces +z)."""
    return np.array([np.sin(yaw), 0.0, np.cos(yaw)])


def look_rotation(forward, up=UP) -> np.ndarray:
    """Quaternion whose +z axis points along `forward`, roll-free w.r.t. `up`."""
    f = normalized(forward)
    r = np.cross(up, f)
    rn = norm(r)
    if rn < 1e-9:
        # forward (anti)parallel to up: pick an arbitrary horizontal right axis
        r = np.array([1.0, 0.0, 0.0])
    else:
        r = r / rn
    u = np.cross(f, r)
    m = np.column_stack([r, u, f])
    return quat_from_matrix(m)


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return quat_normalize(np.array([w, x, y, z]))


class Frame:
    """Rigid transform (rotation + translation). Composes left to right:
    child world frame = parent.compose(local)."""

    __slots__ = ("pos", "rot")

    def __init__(self, pos=None, rot=None):
        self.pos = np.zeros(3) if pos is None else np.asarray(pos, dtype=float)
        self.rot = QUAT_IDENTITY.copy() if rot is None else np.asarray(rot, dtype=float)

    def compose(self, other: "Frame") -> "Frame":
        return Frame(self.pos + quat_rotate(self.rot, other.pos),
                     quat_mul(self.rot, other.rot))

    def transform_point(self, p) -> np.ndarray:
        return self.pos + quat_rotate(self.rot, p)

    def transform_dir(self, d) -> np.ndarray:
        return quat_rotate(self.rot, d)

    def inverse(self) -> "Frame":
        inv_rot = quat_conj(self.rot)
        return Frame(quat_rotate(inv_rot, -self.pos), inv_rot)

    def forward(self) -> np.ndarray:
        return quat_rotate(self.rot, FORWARD)

    def up(self) -> np.ndarray:
        return quat_rotate(self.rot, UP)

    def right(self) -> np.ndarray:
        return quat_rotate(self.rot, RIGHT)

    def left(self) -> np.ndarray:
        return -self.right()

    def copy(self) -> "Frame":
        return Frame(self.pos.copy(), self.rot.copy())

    def __repr__(self):
        return f"Frame(pos={self.pos.tolist()}, rot={self.rot.tolist()})"
