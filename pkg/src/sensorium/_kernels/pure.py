"""Pure-numpy implementations of the hot geometry kernels.

Two entry points, shared with the compiled backend in ``_core``:

  raycast(origins, dirs, prims, tris)    -> first-hit t / owner / normal
  line_depth(points, normals, prims, tris) -> skin compression depth per point

Primitive rows are packed as float64[PRIM_COLS] (see ``PRIM_*`` constants);
triangle rows carry (v0, e1, e2) of mesh faces. Owners are int32 indices into
the caller's collider table, -1 meaning "no hit".

The depth convention: for a line through p along outward normal n, the shape
occupies an interval [t0, t1] of line parameter t. The skin at p is
compressed by d = -t0 when the shape covers p (t0 <= 0 <= t1), else 0.
A point buried deep inside a shape yields a large d (clamped to the maximum
reading downstream).
"""
from __future__ import annotations

import numpy as np

PRIM_COLS = 20
TYPE_SPHERE = 0
TYPE_BOX = 1
TYPE_CAPSULE = 2
TYPE_PLANE = 3

BURIED_DEPTH = 1e9  # "inside a half-space / deep inside a solid" sentinel
_EPS = 1e-12


def pack_sphere(center, radius) -> np.ndarray:
    row = np.zeros(PRIM_COLS)
    row[0] = TYPE_SPHERE
    row[1:4] = center
    row[4] = radius
    return row


def pack_box(center, rot_matrix, half_extents) -> np.ndarray:
    row = np.zeros(PRIM_COLS)
    row[0] = TYPE_BOX
    row[1:4] = center
    row[4:13] = np.asarray(rot_matrix, dtype=float).reshape(9)
    row[13:16] = half_extents
    return row


def pack_capsule(p0, p1, radius) -> np.ndarray:
    row = np.zeros(PRIM_COLS)
    row[0] = TYPE_CAPSULE
    row[1:4] = p0
    row[4:7] = p1
    row[7] = radius
    return row


def pack_plane(normal, offset) -> np.ndarray:
    row = np.zeros(PRIM_COLS)
    row[0] = TYPE_PLANE
    row[1:4] = normal
    row[4] = offset
    return row


# ---------------------------------------------------------------------------
# raycast
# ---------------------------------------------------------------------------

def raycast(origins, dirs, prims, prim_owner, tris, tri_owner):
    """First hit of each ray against the packed scene.

    Returns (t, owner, normal): t is inf and owner -1 where nothing is hit.
    Rays starting inside a solid do not count the enclosing surface as a hit
    (entry parameter must be >= 0).
    """
    origins = np.ascontiguousarray(origins, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    n = origins.shape[0]
    best_t = np.full(n, np.inf)
    best_owner = np.full(n, -1, dtype=np.int32)
    best_normal = np.zeros((n, 3))

    for k in range(prims.shape[0]):
        row = prims[k]
        typ = int(row[0])
        if typ == TYPE_SPHERE:
            t, nrm = _ray_sphere(origins, dirs, row[1:4], row[4])
        elif typ == TYPE_BOX:
            t, nrm = _ray_box(origins, dirs, row[1:4], row[4:13].reshape(3, 3), row[13:16])
        elif typ == TYPE_CAPSULE:
            t, nrm = _ray_capsule(origins, dirs, row[1:4], row[4:7], row[7])
        else:
            t, nrm = _ray_plane(origins, dirs, row[1:4], row[4])
        closer = t < best_t
        if closer.any():
            best_t[closer] = t[closer]
            best_owner[closer] = prim_owner[k]
            best_normal[closer] = nrm[closer]

    for k in range(tris.shape[0]):
        v0 = tris[k, 0:3]
        e1 = tris[k, 3:6]
        e2 = tris[k, 6:9]
        t = _ray_triangle(origins, dirs, v0, e1, e2)
        closer = t < best_t
        if closer.any():
            nrm = np.cross(e1, e2)
            nrm = nrm / np.sqrt(np.dot(nrm, nrm))
            # orient against the ray so shading sees the front face
            flip = (dirs[closer] @ nrm) > 0
            facing = np.where(flip[:, None], -nrm, nrm)
            best_t[closer] = t[closer]
            best_owner[closer] = tri_owner[k]
            best_normal[closer] = facing

    return best_t, best_owner, best_normal


def _ray_sphere(o, d, center, radius):
    m = center - o
    b = np.einsum("ij,ij->i", m, d)
    disc = radius * radius - (np.einsum("ij,ij->i", m, m) - b * b)
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t = b - sq
    t = np.where(hit & (t >= 0), t, np.inf)
    p = o + t[:, None] * d
    nrm = np.where(np.isfinite(t)[:, None], (p - center) / radius, 0.0)
    return t, nrm


def _ray_plane(o, d, normal, offset):
    denom = d @ normal
    t = np.where(np.abs(denom) > _EPS, (offset - o @ normal) / np.where(denom == 0, 1.0, denom), np.inf)
    t = np.where(t >= 0, t, np.inf)
    nrm = np.where((denom < 0)[:, None], normal, -normal)
    return t, np.broadcast_to(nrm, o.shape).copy()


def _ray_box(o, d, center, rot, half):
    # transform rays into the box frame: x_local = R^T (x - c)
    ol = (o - center) @ rot
    dl = d @ rot
    safe = np.where(np.abs(dl) > _EPS, dl, _EPS)
    t1 = (-half - ol) / safe
    t2 = (half - ol) / safe
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    # rays parallel to a slab and outside it never hit
    parallel_miss = (np.abs(dl) <= _EPS) & (np.abs(ol) > half)
    t_enter = tmin.max(axis=1)
    t_exit = tmax.min(axis=1)
    hit = (t_enter <= t_exit) & (t_exit >= 0) & (t_enter >= 0) & ~parallel_miss.any(axis=1)
    t = np.where(hit, t_enter, np.inf)
    axis = tmin.argmax(axis=1)
    sign = -np.sign(dl[np.arange(o.shape[0]), axis])
    nrm_local = np.zeros_like(o)
    nrm_local[np.arange(o.shape[0]), axis] = sign
    nrm = nrm_local @ rot.T
    nrm[~hit] = 0.0
    return t, nrm


def _ray_capsule(o, d, p0, p1, radius):
    axis = p1 - p0
    length = np.sqrt(np.dot(axis, axis))
    if length < _EPS:
        return _ray_sphere(o, d, p0, radius)
    a = axis / length
    m = o - p0
    md = d - np.outer(d @ a, a)
    mm = m - np.outer(m @ a, a)
    A = np.einsum("ij,ij->i", md, md)
    B = 2.0 * np.einsum("ij,ij->i", mm, md)
    C = np.einsum("ij,ij->i", mm, mm) - radius * radius
    disc = B * B - 4 * A * C
    ok = (disc >= 0) & (A > _EPS)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t_cyl = np.where(ok, (-B - sq) / np.where(A > _EPS, 2 * A, 1.0), np.inf)
    t_safe = np.where(np.isfinite(t_cyl), t_cyl, 0.0)
    s = (m + t_safe[:, None] * d) @ a
    t_cyl = np.where((t_cyl >= 0) & (s >= 0) & (s <= length), t_cyl, np.inf)

    t0, _ = _ray_sphere(o, d, p0, radius)
    t1, _ = _ray_sphere(o, d, p1, radius)
    t = np.minimum(t_cyl, np.minimum(t0, t1))

    hit = np.isfinite(t)
    p = o + np.where(hit, t, 0.0)[:, None] * d
    sc = np.clip((p - p0) @ a, 0.0, length)
    closest = p0 + np.outer(sc, a)
    nrm = np.where(hit[:, None], (p - closest) / radius, 0.0)
    return t, nrm


def _ray_triangle(o, d, v0, e1, e2):
    # Moller-Trumbore, vectorized over rays
    pvec = np.cross(d, e2)
    det = pvec @ e1
    ok = np.abs(det) > _EPS
    inv = 1.0 / np.where(ok, det, 1.0)
    tvec = o - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,ij->i", d, qvec) * inv
    t = (qvec @ e2) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= 0)
    return np.where(hit, t, np.inf)


# ---------------------------------------------------------------------------
# line depth (tactile)
# ---------------------------------------------------------------------------

def line_depth(points, normals, prims, tris):
    """Compression depth at each skin point, max over all packed shapes."""
    points = np.ascontiguousarray(points, dtype=float)
    normals = np.ascontiguousarray(normals, dtype=float)
    n = points.shape[0]
    depth = np.zeros(n)

    for k in range(prims.shape[0]):
        row = prims[k]
        typ = int(row[0])
        if typ == TYPE_SPHERE:
            d = _depth_sphere(points, normals, row[1:4], row[4])
        elif typ == TYPE_BOX:
            d = _depth_box(points, normals, row[1:4], row[4:13].reshape(3, 3), row[13:16])
        elif typ == TYPE_CAPSULE:
            d = _depth_capsule(points, normals, row[1:4], row[4:7], row[7])
        else:
            d = _depth_plane(points, normals, row[1:4], row[4])
        np.maximum(depth, d, out=depth)

    if tris.shape[0]:
        depth = np.maximum(depth, _depth_trimesh(points, normals, tris))
    return depth


def _interval_depth(t0, t1, covered):
    # shape covers the point when t0 <= 0 <= t1; skin compressed by -t0
    inside = covered & (t0 <= 0.0) & (t1 >= 0.0)
    return np.where(inside, -t0, 0.0)


def _depth_sphere(p, n, center, radius):
    m = center - p
    b = np.einsum("ij,ij->i", m, n)
    disc = radius * radius - (np.einsum("ij,ij->i", m, m) - b * b)
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    return _interval_depth(b - sq, b + sq, ok)


def _depth_plane(p, n, normal, offset):
    denom = n @ normal
    val = offset - p @ normal
    inside_now = val >= 0.0  # p.m <= o
    t_c = val / np.where(np.abs(denom) > _EPS, denom, 1.0)
    d = np.zeros(p.shape[0])
    away = denom < -_EPS   # half-space lies toward -n: interval [t_c, inf)
    d = np.where(away & (t_c <= 0), -t_c, d)
    toward = denom > _EPS  # interval (-inf, t_c]: p buried when t_c >= 0
    d = np.where(toward & (t_c >= 0), BURIED_DEPTH, d)
    grazing = np.abs(denom) <= _EPS
    d = np.where(grazing & inside_now, BURIED_DEPTH, d)
    return d


def _depth_box(p, n, center, rot, half):
    pl = (p - center) @ rot
    nl = n @ rot
    safe = np.where(np.abs(nl) > _EPS, nl, _EPS)
    t1 = (-half - pl) / safe
    t2 = (half - pl) / safe
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    parallel_miss = (np.abs(nl) <= _EPS) & (np.abs(pl) > half)
    t0 = tmin.max(axis=1)
    t1b = tmax.min(axis=1)
    covered = (t0 <= t1b) & ~parallel_miss.any(axis=1)
    return _interval_depth(t0, t1b, covered)


def _depth_capsule(p, n, p0, p1, radius):
    axis = p1 - p0
    length = np.sqrt(np.dot(axis, axis))
    if length < _EPS:
        return _depth_sphere(p, n, p0, radius)
    a = axis / length
    m = p - p0
    md = n - np.outer(n @ a, a)
    mm = m - np.outer(m @ a, a)
    A = np.einsum("ij,ij->i", md, md)
    B = 2.0 * np.einsum("ij,ij->i", mm, md)
    C = np.einsum("ij,ij->i", mm, mm) - radius * radius
    disc = B * B - 4 * A * C
    ok = (disc >= 0) & (A > _EPS)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    denom = np.where(A > _EPS, 2 * A, 1.0)
    tc0 = np.where(ok, (-B - sq) / denom, np.inf)
    tc1 = np.where(ok, (-B + sq) / denom, -np.inf)
    s0 = (m + np.where(ok, tc0, 0.0)[:, None] * n) @ a
    s1 = (m + np.where(ok, tc1, 0.0)[:, None] * n) @ a
    tc0 = np.where((s0 >= 0) & (s0 <= length), tc0, np.inf)
    tc1 = np.where((s1 >= 0) & (s1 <= length), tc1, -np.inf)

    e0, x0 = _sphere_interval(p, n, p0, radius)
    e1, x1 = _sphere_interval(p, n, p1, radius)
    t0 = np.minimum(tc0, np.minimum(e0, e1))
    t1 = np.maximum(tc1, np.maximum(x0, x1))
    covered = t0 <= t1
    return _interval_depth(t0, t1, covered)


def _sphere_interval(p, n, center, radius):
    m = center - p
    b = np.einsum("ij,ij->i", m, n)
    disc = radius * radius - (np.einsum("ij,ij->i", m, m) - b * b)
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = np.where(ok, b - sq, np.inf)
    t1 = np.where(ok, b + sq, -np.inf)
    return t0, t1


def _depth_trimesh(p, n, tris):
    """Inside test via the nearest crossing at t <= 0: the point is covered
    when that face's outward normal points away from it. Robust to lines
    through shared edges (both faces agree on the normal there)."""
    npts = p.shape[0]
    t_lower = np.full(npts, -np.inf)
    best_dot = np.full(npts, np.inf)   # face-normal component along +n
    for k in range(tris.shape[0]):
        t = _line_triangle(p, n, tris[k, 0:3], tris[k, 3:6], tris[k, 6:9])
        below = np.isfinite(t) & (t <= 0)
        if not below.any():
            continue
        face_n = np.cross(tris[k, 3:6], tris[k, 6:9])
        face_n = face_n / np.sqrt(np.dot(face_n, face_n))
        fdot = n @ face_n
        closer = below & (t > t_lower)
        tie = below & (t == t_lower) & (fdot < best_dot)
        upd = closer | tie
        t_lower = np.where(upd, t, t_lower)
        best_dot = np.where(upd, fdot, best_dot)
    inside = np.isfinite(best_dot) & (best_dot < 0)
    return np.where(inside, -t_lower, 0.0)


def _line_triangle(o, d, v0, e1, e2):
    # full-line variant of Moller-Trumbore (t may be negative)
    pvec = np.cross(d, e2)
    det = pvec @ e1
    ok = np.abs(det) > _EPS
    inv = 1.0 / np.where(ok, det, 1.0)
    tvec = o - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,ij->i", d, qvec) * inv
    t = (qvec @ e2) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1)
    return np.where(hit, t, np.inf)
