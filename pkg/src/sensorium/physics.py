"""Rigid-body physics: collider shapes, contact detection with penetration
depth, the light/heavy interaction rule for agent-object collisions, and
DOF-limited joints driven by normalized torques.

Integration is semi-implicit Euler at the fixed physics timestep. Contact
resolution is a single pass per step: impulse-based with restitution for
object-object pairs, and the asymmetric kinematic rule for agent-object
pairs (light objects take the full impulse, heavy objects push the agent
out). Joint limits are hard: angles are clamped with the velocity zeroed at
the limit after every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidActionError, SimulationDivergedError, UnsupportedShapePairError
from .geom import quat_mul, quat_normalize, quat_rotate, quat_to_matrix

GRAVITY = np.array([0.0, -9.81, 0.0])
DEFAULT_MASS_THRESHOLD = 10.0   # kg; lighter objects yield, heavier push the agent out
DEFAULT_RESTITUTION = 0.0
SKIN_SLOP = 0.004               # m; light objects rest this deep in the agent's soft skin

_EPS = 1e-12


# ---------------------------------------------------------------------------
# bodies and colliders
# ---------------------------------------------------------------------------

@dataclass
class RigidBody:
    body_id: str
    mass: float = 1.0
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    kinematic: bool = False
    transparent: bool = False
    color: np.ndarray = field(default_factory=lambda: np.array([0.7, 0.7, 0.7]))
    group: str | None = None     # colliders sharing a group never collide (agent parts)
    structural: bool = False     # walls/floor: collide and render, but are not "objects"

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.orientation = np.asarray(self.orientation, dtype=float)
        self.linear_velocity = np.asarray(self.linear_velocity, dtype=float)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float)
        self.color = np.asarray(self.color, dtype=float)
        if not self.kinematic and self.mass <= 0:
            raise ValueError(f"dynamic body {self.body_id!r} needs mass > 0")
        # bodies that never change pose get their collision geometry cached
        self.moves = (not self.kinematic) or (self.group is not None)


class Sphere:
    def __init__(self, radius: float):
        if radius <= 0:
            raise ValueError("sphere radius must be > 0")
        self.radius = float(radius)


class Box:
    def __init__(self, half_extents):
        self.half_extents = np.asarray(half_extents, dtype=float)
        if (self.half_extents <= 0).any():
            raise ValueError("box half extents must be > 0")


class Capsule:
    """Capsule along the local +y axis: segment of +-half_height plus caps."""

    def __init__(self, radius: float, half_height: float):
        if radius <= 0 or half_height < 0:
            raise ValueError("capsule needs radius > 0 and half_height >= 0")
        self.radius = float(radius)
        self.half_height = float(half_height)


class Plane:
    """Half-space {x . normal <= offset}; the solid side is below the surface."""

    def __init__(self, normal, offset: float):
        n = np.asarray(normal, dtype=float)
        self.normal = n / np.sqrt(np.dot(n, n))
        self.offset = float(offset)


class TriMesh:
    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be (m, 3)")


@dataclass
class Collider:
    shape: object
    body_id: str
    offset_pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    offset_rot: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        self.offset_pos = np.asarray(self.offset_pos, dtype=float)
        self.offset_rot = np.asarray(self.offset_rot, dtype=float)

    @property
    def trivial_offset(self) -> bool:
        if not hasattr(self, "_trivial"):
            self._trivial = (not self.offset_pos.any()) and self._trivial_rot
        return self._trivial

    @property
    def _trivial_rot(self) -> bool:
        if not hasattr(self, "_rot_trivial"):
            self._rot_trivial = (self.offset_rot[0] == 1.0
                                 and not self.offset_rot[1:].any())
        return self._rot_trivial

    def world_pose(self, body: RigidBody):
        if self.trivial_offset:
            return body.position, body.orientation
        pos = body.position + quat_rotate(body.orientation, self.offset_pos)
        rot = body.orientation if self._trivial_rot else quat_mul(body.orientation,
                                                                  self.offset_rot)
        return pos, rot


@dataclass
class Contact:
    body_a: str
    body_b: str
    point: np.ndarray
    normal: np.ndarray          # unit, from a into b
    penetration: float
    impulse: float = 0.0


# ---------------------------------------------------------------------------
# narrow phase
# ---------------------------------------------------------------------------

def _contact_sphere_sphere(ida, ca, ra, idb, cb, rb):
    dx = float(cb[0]) - float(ca[0])
    dy = float(cb[1]) - float(ca[1])
    dz = float(cb[2]) - float(ca[2])
    d = math.sqrt(dx * dx + dy * dy + dz * dz)
    if d > ra + rb:
        return None
    if d > _EPS:
        n = np.array([dx / d, dy / d, dz / d])
    else:
        n = np.array([1.0, 0.0, 0.0])
    pen = ra + rb - d
    point = ca + n * (ra - 0.5 * pen)
    return Contact(ida, idb, point, n, pen)


def _contact_plane_sphere(idp, plane_n, plane_o, ids, c, r):
    height = (float(c[0]) * float(plane_n[0]) + float(c[1]) * float(plane_n[1])
              + float(c[2]) * float(plane_n[2])) - plane_o
    pen = r - height
    if pen < 0:
        return None
    point = c - plane_n * height
    return Contact(idp, ids, point, plane_n.copy(), pen)


def _contact_plane_box(idp, plane_n, plane_o, idb, center, rot, half):
    corners = center + (_BOX_CORNERS * half) @ rot.T
    depth = plane_o - corners @ plane_n
    below = depth > 0
    if not below.any():
        return None
    pen = float(depth.max())
    point = corners[below].mean(axis=0)
    return Contact(idp, idb, point, plane_n.copy(), pen)


_BOX_CORNERS = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)


def _contact_plane_capsule(idp, plane_n, plane_o, idc, p0, p1, r):
    nx, ny, nz = float(plane_n[0]), float(plane_n[1]), float(plane_n[2])
    h0 = float(p0[0]) * nx + float(p0[1]) * ny + float(p0[2]) * nz - plane_o
    h1 = float(p1[0]) * nx + float(p1[1]) * ny + float(p1[2]) * nz - plane_o
    pen0, pen1 = r - h0, r - h1
    if pen0 < 0 and pen1 < 0:
        return None
    if abs(pen0 - pen1) < 1e-9:
        deep = 0.5 * (p0 + p1)
        pen = pen0
    elif pen0 > pen1:
        deep, pen = p0, pen0
    else:
        deep, pen = p1, pen1
    point = deep - plane_n * (r - pen)
    return Contact(idp, idc, point, plane_n.copy(), pen)


def _contact_plane_mesh(idp, plane_n, plane_o, idm, world_verts):
    depth = plane_o - world_verts @ plane_n
    below = depth > 0
    if not below.any():
        return None
    pen = float(depth.max())
    point = world_verts[below].mean(axis=0)
    return Contact(idp, idm, point, plane_n.copy(), pen)


def _contact_box_sphere(idb, center, rot, half, ids, c, r, aligned=False):
    wx = float(c[0]) - float(center[0])
    wy = float(c[1]) - float(center[1])
    wz = float(c[2]) - float(center[2])
    if aligned:
        lx, ly, lz = wx, wy, wz
    else:
        # local = R^T world
        lx = float(rot[0, 0]) * wx + float(rot[1, 0]) * wy + float(rot[2, 0]) * wz
        ly = float(rot[0, 1]) * wx + float(rot[1, 1]) * wy + float(rot[2, 1]) * wz
        lz = float(rot[0, 2]) * wx + float(rot[1, 2]) * wy + float(rot[2, 2]) * wz
    hx, hy, hz = float(half[0]), float(half[1]), float(half[2])
    qx = min(max(lx, -hx), hx)
    qy = min(max(ly, -hy), hy)
    qz = min(max(lz, -hz), hz)
    ex, ey, ez = lx - qx, ly - qy, lz - qz
    d2 = ex * ex + ey * ey + ez * ez
    if d2 > r * r:
        return None
    if d2 > _EPS:
        d = math.sqrt(d2)
        n_local = np.array([ex / d, ey / d, ez / d])
        pen = r - d
        point_local = np.array([qx, qy, qz])
    else:
        # center inside the box: exit through the nearest face
        local = np.array([lx, ly, lz])
        face_dist = half - np.abs(local)
        axis = int(face_dist.argmin())
        n_local = np.zeros(3)
        n_local[axis] = 1.0 if local[axis] >= 0 else -1.0
        pen = r + float(face_dist[axis])
        point_local = local.copy()
        point_local[axis] = n_local[axis] * half[axis]
    n = rot @ n_local
    point = center + rot @ point_local
    return Contact(idb, ids, point, n, pen)


def _box_sphere_gap(center, rot, half, c, r, aligned=False):
    """Fast separation test: > 0 strictly separated (no allocation)."""
    wx = float(c[0]) - float(center[0])
    wy = float(c[1]) - float(center[1])
    wz = float(c[2]) - float(center[2])
    if aligned:
        lx, ly, lz = wx, wy, wz
    else:
        lx = float(rot[0, 0]) * wx + float(rot[1, 0]) * wy + float(rot[2, 0]) * wz
        ly = float(rot[0, 1]) * wx + float(rot[1, 1]) * wy + float(rot[2, 1]) * wz
        lz = float(rot[0, 2]) * wx + float(rot[1, 2]) * wy + float(rot[2, 2]) * wz
    ex = abs(lx) - float(half[0])
    ey = abs(ly) - float(half[1])
    ez = abs(lz) - float(half[2])
    ex = ex if ex > 0 else 0.0
    ey = ey if ey > 0 else 0.0
    ez = ez if ez > 0 else 0.0
    return ex * ex + ey * ey + ez * ez - r * r


def _closest_on_segment(p, a, b):
    abx = float(b[0]) - float(a[0])
    aby = float(b[1]) - float(a[1])
    abz = float(b[2]) - float(a[2])
    denom = abx * abx + aby * aby + abz * abz
    if denom < _EPS:
        return a
    t = ((float(p[0]) - float(a[0])) * abx + (float(p[1]) - float(a[1])) * aby
         + (float(p[2]) - float(a[2])) * abz) / denom
    t = min(max(t, 0.0), 1.0)
    return np.array([float(a[0]) + t * abx, float(a[1]) + t * aby,
                     float(a[2]) + t * abz])


def _contact_capsule_sphere(idc, p0, p1, rc, ids, c, rs):
    seg = _closest_on_segment(c, p0, p1)
    return _contact_sphere_sphere(idc, seg, rc, ids, c, rs)


def _contact_box_capsule(idb, center, rot, half, idc, p0, p1, rc, aligned=False):
    # candidate points on the segment; nearest feature wins (adequate for the
    # tall-wall / upright-capsule scenes this engine ships)
    best = None
    best_gap = np.inf
    for cand in (p0, p1, _closest_on_segment(center, p0, p1)):
        gap = _box_sphere_gap(center, rot, half, cand, rc, aligned)
        if gap < best_gap:
            best_gap = gap
            best = cand
    if best_gap > 0:
        return None
    return _contact_box_sphere(idb, center, rot, half, idc, best, rc, aligned)


def _segment_segment_closest(a0, a1, b0, b1):
    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    a = float(np.dot(d1, d1))
    e = float(np.dot(d2, d2))
    f = float(np.dot(d2, r))
    if a < _EPS and e < _EPS:
        return a0, b0
    if a < _EPS:
        s = 0.0
        t = np.clip(f / e, 0.0, 1.0)
    else:
        c = float(np.dot(d1, r))
        if e < _EPS:
            t = 0.0
            s = np.clip(-c / a, 0.0, 1.0)
        else:
            b = float(np.dot(d1, d2))
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > _EPS else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t = 1.0
                s = np.clip((b - c) / a, 0.0, 1.0)
    return a0 + s * d1, b0 + t * d2


def _contact_capsule_capsule(ida, a0, a1, ra, idb, b0, b1, rb):
    pa, pb = _segment_segment_closest(a0, a1, b0, b1)
    return _contact_sphere_sphere(ida, pa, ra, idb, pb, rb)


def _closest_on_triangle(p, a, b, c):
    # Ericson, Real-Time Collision Detection 5.1.5
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = float(np.dot(ab, ap))
    d2 = float(np.dot(ac, ap))
    if d1 <= 0 and d2 <= 0:
        return a
    bp = p - b
    d3 = float(np.dot(ab, bp))
    d4 = float(np.dot(ac, bp))
    if d3 >= 0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return a + v * ab
    cp = p - c
    d5 = float(np.dot(ab, cp))
    d6 = float(np.dot(ac, cp))
    if d6 >= 0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return a + w * ac
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b)
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a + ab * v + ac * w


def _contact_mesh_sphere(idm, world_verts, triangles, ids, c, r):
    best = None
    best_d2 = np.inf
    for tri in triangles:
        q = _closest_on_triangle(c, world_verts[tri[0]], world_verts[tri[1]], world_verts[tri[2]])
        d2 = float(np.dot(c - q, c - q))
        if d2 < best_d2:
            best_d2 = d2
            best = q
    if best is None or best_d2 > r * r:
        return None
    d = np.sqrt(best_d2)
    n = (c - best) / d if d > _EPS else np.array([0.0, 1.0, 0.0])
    return Contact(idm, ids, best, n, r - d)


def _contact_mesh_capsule(idm, world_verts, triangles, idc, p0, p1, rc):
    # capsule approximated by three axis samples; fine for the shallow
    # contacts these meshes (small props) see
    best = None
    for sample in (p0, 0.5 * (p0 + p1), p1):
        c = _contact_mesh_sphere(idm, world_verts, triangles, idc, sample, rc)
        if c is not None and (best is None or c.penetration > best.penetration):
            best = c
    return best


def _contact_box_mesh(idb, center, rot, half, idm, world_verts):
    # mesh vertices sampled against the box volume
    local = (world_verts - center) @ rot
    inside = (np.abs(local) <= half).all(axis=1)
    if not inside.any():
        return None
    face_dist = half - np.abs(local[inside])
    deepest = np.unravel_index(face_dist.argmin(), face_dist.shape)
    vi = np.flatnonzero(inside)[deepest[0]]
    axis = int(deepest[1])
    lp = local[vi]
    n_local = np.zeros(3)
    n_local[axis] = 1.0 if lp[axis] >= 0 else -1.0
    pen = float(half[axis] - abs(lp[axis]))
    n = rot @ n_local
    return Contact(idb, idm, center + rot @ lp, n, pen)


_RANK = {Plane: 0, Box: 1, Capsule: 2, Sphere: 3, TriMesh: 4}


def _world_geom(collider: Collider, body: RigidBody):
    pos, rot_q = collider.world_pose(body)
    shape = collider.shape
    if isinstance(shape, Sphere):
        return ("sphere", pos, shape.radius)
    if isinstance(shape, Box):
        aligned = rot_q[0] == 1.0 and rot_q[1] == 0.0 and rot_q[2] == 0.0 and rot_q[3] == 0.0
        return ("box", pos, quat_to_matrix(rot_q), shape.half_extents, aligned)
    if isinstance(shape, Capsule):
        axis = quat_rotate(rot_q, np.array([0.0, 1.0, 0.0])) * shape.half_height
        return ("capsule", pos - axis, pos + axis, shape.radius)
    if isinstance(shape, Plane):
        return ("plane", shape.normal, shape.offset)
    if isinstance(shape, TriMesh):
        world_verts = pos + quat_rotate(rot_q, shape.vertices)
        return ("mesh", world_verts, shape.triangles)
    raise UnsupportedShapePairError(f"unknown shape {type(shape).__name__}")


def contact_pair(collider_a: Collider, body_a: RigidBody, collider_b: Collider, body_b: RigidBody):
    """Contact between two colliders, or None. Raises on unsupported pairs."""
    return _contact_from_geoms(_world_geom(collider_a, body_a), body_a,
                               _world_geom(collider_b, body_b), body_b)


_KIND_RANK = {"plane": 0, "box": 1, "capsule": 2, "sphere": 3, "mesh": 4}


def _contact_from_geoms(ga, body_a: RigidBody, gb, body_b: RigidBody):
    if _KIND_RANK[ga[0]] > _KIND_RANK[gb[0]]:
        ga, gb = gb, ga
        body_a, body_b = body_b, body_a
    ka, kb = ga[0], gb[0]
    ida, idb = body_a.body_id, body_b.body_id

    if ka == "sphere" and kb == "sphere":
        return _contact_sphere_sphere(ida, ga[1], ga[2], idb, gb[1], gb[2])
    if ka == "plane" and kb == "sphere":
        return _contact_plane_sphere(ida, ga[1], ga[2], idb, gb[1], gb[2])
    if ka == "plane" and kb == "box":
        return _contact_plane_box(ida, ga[1], ga[2], idb, gb[1], gb[2], gb[3])
    if ka == "plane" and kb == "capsule":
        return _contact_plane_capsule(ida, ga[1], ga[2], idb, gb[1], gb[2], gb[3])
    if ka == "plane" and kb == "mesh":
        return _contact_plane_mesh(ida, ga[1], ga[2], idb, gb[1])
    if ka == "box" and kb == "sphere":
        return _contact_box_sphere(ida, ga[1], ga[2], ga[3], idb, gb[1], gb[2],
                                   aligned=ga[4])
    if ka == "box" and kb == "capsule":
        return _contact_box_capsule(ida, ga[1], ga[2], ga[3], idb, gb[1], gb[2], gb[3],
                                    aligned=ga[4])
    if ka == "box" and kb == "mesh":
        return _contact_box_mesh(ida, ga[1], ga[2], ga[3], idb, gb[1])
    if ka == "capsule" and kb == "sphere":
        return _contact_capsule_sphere(ida, ga[1], ga[2], ga[3], idb, gb[1], gb[2])
    if ka == "capsule" and kb == "capsule":
        return _contact_capsule_capsule(ida, ga[1], ga[2], ga[3], idb, gb[1], gb[2], gb[3])
    if ka == "capsule" and kb == "mesh":
        return _contact_mesh_capsule(idb, gb[1], gb[2], ida, ga[1], ga[2], ga[3])
    if ka == "sphere" and kb == "mesh":
        return _contact_mesh_sphere(idb, gb[1], gb[2], ida, ga[1], ga[2])
    raise UnsupportedShapePairError(f"no contact routine for {ka}-{kb}")


def _collider_aabb_from_geom(g):
    if g[0] == "sphere":
        return g[1] - g[2], g[1] + g[2]
    if g[0] == "box":
        extent = np.abs(g[2]) @ g[3]
        return g[1] - extent, g[1] + extent
    if g[0] == "capsule":
        lo = np.minimum(g[1], g[2]) - g[3]
        hi = np.maximum(g[1], g[2]) + g[3]
        return lo, hi
    if g[0] == "mesh":
        return g[1].min(axis=0), g[1].max(axis=0)
    return None  # plane: unbounded


def _collider_aabb(collider: Collider, body: RigidBody):
    return _collider_aabb_from_geom(_world_geom(collider, body))


def _aabb_row(aabb) -> np.ndarray:
    if aabb is None:
        return np.array([-np.inf, -np.inf, -np.inf, np.inf, np.inf, np.inf])
    return np.concatenate([aabb[0], aabb[1]])


def _write_aabb_row(matrix, i, aabb):
    if aabb is None:
        matrix[i, 0:3] = -np.inf
        matrix[i, 3:6] = np.inf
    else:
        matrix[i, 0:3] = aabb[0]
        matrix[i, 3:6] = aabb[1]


def detect_contacts(bodies, colliders, skip_same_group=True, skip_kinematic_pairs=True):
    """All overlapping collider pairs, sorted deterministically.

    bodies: dict body_id -> RigidBody (or list). Pairs within one collision
    group, and pairs where both bodies are kinematic, are skipped by default
    (nothing to resolve between two immovable walls).
    """
    if not isinstance(bodies, dict):
        bodies = {b.body_id: b for b in bodies}
    contacts = []
    n = len(colliders)
    aabbs = [_collider_aabb(c, bodies[c.body_id]) for c in colliders]
    for i in range(n):
        ci = colliders[i]
        bi = bodies[ci.body_id]
        for j in range(i + 1, n):
            cj = colliders[j]
            bj = bodies[cj.body_id]
            if bi.body_id == bj.body_id:
                continue
            if skip_same_group and bi.group is not None and bi.group == bj.group:
                continue
            if skip_kinematic_pairs and bi.kinematic and bj.kinematic:
                continue
            ai, aj = aabbs[i], aabbs[j]
            if ai is not None and aj is not None:
                if (ai[0] > aj[1]).any() or (aj[0] > ai[1]).any():
                    continue
            c = contact_pair(ci, bi, cj, bj)
            if c is not None and c.penetration >= 0:
                contacts.append(c)
    contacts.sort(key=lambda c: (c.body_a, c.body_b, tuple(c.point)))
    return contacts


# ---------------------------------------------------------------------------
# resolution
# ---------------------------------------------------------------------------

def resolve_light_heavy(agent_body: RigidBody, object_body: RigidBody, contact: Contact,
                        mass_threshold: float = DEFAULT_MASS_THRESHOLD,
                        restitution: float = DEFAULT_RESTITUTION,
                        slop: float = 0.0):
    """Asymmetric agent-object collision rule.

    Light objects (< mass_threshold) take the full collision impulse while
    the agent is unaffected; heavy objects are immovable and the agent is
    translated out of penetration with its approach velocity zeroed.
    `slop` leaves light objects resting slightly inside the agent's soft
    skin so taxels keep a contact signal.
    """
    if contact.penetration <= 0:
        return agent_body, object_body
    n = contact.normal
    if contact.body_a == agent_body.body_id:
        nx, ny, nz = float(n[0]), float(n[1]), float(n[2])   # from agent into object
    else:
        nx, ny, nz = -float(n[0]), -float(n[1]), -float(n[2])

    if object_body.mass < mass_threshold and not object_body.kinematic:
        corr = contact.penetration - slop
        if corr > 0:
            op = object_body.position
            object_body.position = np.array([op[0] + nx * corr, op[1] + ny * corr,
                                             op[2] + nz * corr])
        ov = object_body.linear_velocity
        av = agent_body.linear_velocity
        v_rel = ((float(ov[0]) - float(av[0])) * nx + (float(ov[1]) - float(av[1])) * ny
                 + (float(ov[2]) - float(av[2])) * nz)
        if v_rel < 0:
            dv = -(1.0 + restitution) * v_rel
            object_body.linear_velocity = np.array([
                float(ov[0]) + dv * nx, float(ov[1]) + dv * ny, float(ov[2]) + dv * nz])
            contact.impulse = object_body.mass * dv
    else:
        pen = contact.penetration
        ap = agent_body.position
        agent_body.position = np.array([ap[0] - nx * pen, ap[1] - ny * pen,
                                        ap[2] - nz * pen])
        av = agent_body.linear_velocity
        v_n = float(av[0]) * nx + float(av[1]) * ny + float(av[2]) * nz
        if v_n > 0:
            agent_body.linear_velocity = np.array([
                float(av[0]) - v_n * nx, float(av[1]) - v_n * ny, float(av[2]) - v_n * nz])
    return agent_body, object_body


def _resolve_pair(body_a: RigidBody, body_b: RigidBody, contact: Contact, restitution: float):
    inv_a = 0.0 if body_a.kinematic else 1.0 / body_a.mass
    inv_b = 0.0 if body_b.kinematic else 1.0 / body_b.mass
    inv_sum = inv_a + inv_b
    if inv_sum == 0.0:
        return
    n = contact.normal
    nx, ny, nz = float(n[0]), float(n[1]), float(n[2])
    va = body_a.linear_velocity
    vb = body_b.linear_velocity
    v_rel = ((float(vb[0]) - float(va[0])) * nx + (float(vb[1]) - float(va[1])) * ny
             + (float(vb[2]) - float(va[2])) * nz)
    if v_rel < 0:
        j = -(1.0 + restitution) * v_rel / inv_sum
        ja = j * inv_a
        jb = j * inv_b
        body_a.linear_velocity = np.array([float(va[0]) - ja * nx, float(va[1]) - ja * ny,
                                           float(va[2]) - ja * nz])
        body_b.linear_velocity = np.array([float(vb[0]) + jb * nx, float(vb[1]) + jb * ny,
                                           float(vb[2]) + jb * nz])
        contact.impulse = j
    corr = contact.penetration / inv_sum
    ca = corr * inv_a
    cb = corr * inv_b
    pa = body_a.position
    pb = body_b.position
    if ca != 0.0:
        body_a.position = np.array([float(pa[0]) - ca * nx, float(pa[1]) - ca * ny,
                                    float(pa[2]) - ca * nz])
    if cb != 0.0:
        body_b.position = np.array([float(pb[0]) + cb * nx, float(pb[1]) + cb * ny,
                                    float(pb[2]) + cb * nz])


# ---------------------------------------------------------------------------
# joints
# ---------------------------------------------------------------------------

@dataclass
class Joint:
    name: str
    parent_bone: str
    child_bone: str
    axes: np.ndarray                 # (dof, 3) orthonormal, in parent-bone frame
    limits: np.ndarray               # (dof, 2) radians
    max_torque: np.ndarray           # (dof,) N*m
    angle: np.ndarray = None         # (dof,)
    angular_velocity: np.ndarray = None
    inertia: float = 0.02            # kg*m^2 per axis
    damping: float = 0.5

    def __post_init__(self):
        self.axes = np.asarray(self.axes, dtype=float).reshape(-1, 3)
        self.limits = np.asarray(self.limits, dtype=float).reshape(-1, 2)
        self.max_torque = np.asarray(self.max_torque, dtype=float).reshape(-1)
        dof = self.axes.shape[0]
        if self.angle is None:
            self.angle = np.zeros(dof)
        if self.angular_velocity is None:
            self.angular_velocity = np.zeros(dof)
        self.angle = np.asarray(self.angle, dtype=float).reshape(-1)
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float).reshape(-1)
        self.applied_torque = np.zeros(dof)
        if (self.limits[:, 0] > self.limits[:, 1]).any():
            raise ValueError(f"joint {self.name!r} has inverted limits")

    @property
    def dof(self) -> int:
        return self.axes.shape[0]


def apply_torque(joints, normalized_torque):
    """Store per-axis torques = command * max_torque for the next step.

    The command vector must have exactly one entry per degree of freedom,
    each within [-1, 1]; violations name the offending index.
    """
    u = np.asarray(normalized_torque, dtype=float).reshape(-1)
    total = sum(j.dof for j in joints)
    if u.shape[0] != total:
        raise InvalidActionError(
            f"torque vector has length {u.shape[0]}, expected {total}")
    bad = np.flatnonzero((u < -1.0) | (u > 1.0) | ~np.isfinite(u))
    if bad.size:
        raise InvalidActionError(
            f"torque component {bad[0]} = {u[bad[0]]} outside [-1, 1]", index=int(bad[0]))
    base = 0
    for j in joints:
        j.applied_torque = u[base:base + j.dof] * j.max_torque
        base += j.dof
    return joints


def integrate_joints(joints, dt: float):
    """Advance joint angles one step, enforcing hard limits."""
    for j in joints:
        acc = (j.applied_torque - j.damping * j.angular_velocity) / j.inertia
        j.angular_velocity = j.angular_velocity + acc * dt
        j.angle = j.angle + j.angular_velocity * dt
        lo = j.limits[:, 0]
        hi = j.limits[:, 1]
        hit = (j.angle <= lo) | (j.angle >= hi)
        j.angle = np.clip(j.angle, lo, hi)
        j.angular_velocity = np.where(hit, 0.0, j.angular_velocity)


# ---------------------------------------------------------------------------
# world
# ---------------------------------------------------------------------------

class PhysicsWorld:
    def __init__(self, gravity=GRAVITY, mass_threshold=DEFAULT_MASS_THRESHOLD,
                 restitution=DEFAULT_RESTITUTION, skin_slop=SKIN_SLOP):
        self.gravity = np.asarray(gravity, dtype=float)
        self.mass_threshold = float(mass_threshold)
        self.restitution = float(restitution)
        self.skin_slop = float(skin_slop)
        self.bodies: dict[str, RigidBody] = {}
        self.colliders: list[Collider] = []
        self.joint_groups: list[list[Joint]] = []
        self.agent_groups: set[str] = set()   # group names owned by agents
        self._pairs = None                    # lazily built candidate pair cache
        self._revision = 0                    # bumped on collider add/remove
        self._pack_cache = {}                 # kernel packs keyed by filter

    def add_body(self, body: RigidBody, colliders=()):
        if body.body_id in self.bodies:
            raise ValueError(f"duplicate body id {body.body_id!r}")
        self.bodies[body.body_id] = body
        for c in colliders:
            self.add_collider(c)
        self._pairs = None
        self._revision += 1
        return body

    def add_collider(self, collider: Collider):
        if collider.body_id not in self.bodies:
            raise ValueError(f"collider references unknown body {collider.body_id!r}")
        self.colliders.append(collider)
        self._pairs = None
        self._revision += 1

    def remove_body(self, body_id: str):
        self.bodies.pop(body_id)
        self.colliders = [c for c in self.colliders if c.body_id != body_id]
        self._pairs = None
        self._revision += 1

    def body_of(self, contact_side: str) -> RigidBody:
        return self.bodies[contact_side]

    def detect(self):
        return detect_contacts(self.bodies, self.colliders)

    def _build_pairs(self):
        """Candidate pair indices plus cached geometry for immobile bodies.

        Pairs where neither body can ever move are dropped outright: they can
        never come into (new) contact and nothing could be resolved anyway."""
        n = len(self.colliders)
        owners = [self.bodies[c.body_id] for c in self.colliders]
        pairs = []
        for i in range(n):
            bi = owners[i]
            for j in range(i + 1, n):
                bj = owners[j]
                if bi.body_id == bj.body_id:
                    continue
                if bi.group is not None and bi.group == bj.group:
                    continue
                if not bi.moves and not bj.moves:
                    continue
                pairs.append((i, j))
        static_geom = {}
        aabb = np.empty((n, 6))
        for i, c in enumerate(self.colliders):
            if not owners[i].moves:
                static_geom[i] = _world_geom(c, owners[i])
                _write_aabb_row(aabb, i, _collider_aabb_from_geom(static_geom[i]))
        self._pairs = {
            "idx": np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
            "owners": owners,
            "static_geom": static_geom,
            "aabb": aabb,
            "movers": [i for i in range(n) if owners[i].moves],
            "dynamic_bodies": [b for b in self.bodies.values() if not b.kinematic],
        }

    def _detect_fast(self):
        """Contacts over cached candidate pairs (world stepping path)."""
        if self._pairs is None:
            self._build_pairs()
        cache = self._pairs
        idx = cache["idx"]
        if idx.shape[0] == 0:
            return []
        aabb = cache["aabb"]
        geoms = dict(cache["static_geom"])
        for i in cache["movers"]:
            g = _world_geom(self.colliders[i], cache["owners"][i])
            geoms[i] = g
            _write_aabb_row(aabb, i, _collider_aabb_from_geom(g))
        a = aabb[idx[:, 0]]
        b = aabb[idx[:, 1]]
        overlap = ((a[:, 0:3] <= b[:, 3:6]) & (b[:, 0:3] <= a[:, 3:6])).all(axis=1)
        contacts = []
        for k in np.flatnonzero(overlap):
            i, j = int(idx[k, 0]), int(idx[k, 1])
            bi = cache["owners"][i]
            bj = cache["owners"][j]
            if bi.kinematic and bj.kinematic and (bi.group is None and bj.group is None):
                continue  # e.g. two held/frozen props
            c = _contact_from_geoms(geoms[i], bi, geoms[j], bj)
            if c is not None and c.penetration >= 0:
                contacts.append(c)
        contacts.sort(key=lambda c: (c.body_a, c.body_b, tuple(c.point)))
        return contacts

    def step(self, dt: float):
        """One physics substep: integrate, detect, resolve, validate."""
        if self._pairs is None:
            self._build_pairs()
        for body in self._pairs["dynamic_bodies"]:
            if body.kinematic:   # may have been frozen since the cache was built
                continue
            body.linear_velocity = body.linear_velocity + self.gravity * dt
            body.position = body.position + body.linear_velocity * dt
            w = body.angular_velocity
            if w[0] != 0.0 or w[1] != 0.0 or w[2] != 0.0:
                dq = quat_mul(np.array([0.0, w[0], w[1], w[2]]), body.orientation)
                body.orientation = quat_normalize(body.orientation + 0.5 * dt * dq)

        for joints in self.joint_groups:
            integrate_joints(joints, dt)

        contacts = self._detect_fast()
        for c in contacts:
            a = self.bodies[c.body_a]
            b = self.bodies[c.body_b]
            a_is_agent = a.group in self.agent_groups
            b_is_agent = b.group in self.agent_groups
            if a_is_agent and b_is_agent:
                continue  # agents never push each other
            if a_is_agent:
                resolve_light_heavy(a, b, c, self.mass_threshold, self.restitution, self.skin_slop)
            elif b_is_agent:
                resolve_light_heavy(b, a, c, self.mass_threshold, self.restitution, self.skin_slop)
            else:
                _resolve_pair(a, b, c, self.restitution)

        for body in self._pairs["dynamic_bodies"]:
            if not (np.isfinite(body.position).all() and np.isfinite(body.linear_velocity).all()):
                raise SimulationDivergedError(body.body_id)
        return contacts
