# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of the pure-numpy kernels in ``pure``.

Same packed-array contract and numerics (agreement within float rounding,
~1e-12); scalar loops ordered shape-outer so per-shape constants hoist out
of the per-ray/per-point loop. The parity test compares both backends on
randomized scenes.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

cnp.import_array()

DEF TYPE_SPHERE = 0
DEF TYPE_BOX = 1
DEF TYPE_CAPSULE = 2
DEF TYPE_PLANE = 3

cdef double EPS = 1e-12
cdef double BURIED = 1e9


cdef inline double _dot3(double ax, double ay, double az,
                         double bx, double by, double bz) nogil:
    return ax * bx + ay * by + az * bz


# ---------------------------------------------------------------------------
# raycast
# ---------------------------------------------------------------------------

def raycast(origins, dirs, prims, prim_owner, tris, tri_owner):
    cdef double[:, ::1] o = np.ascontiguousarray(origins, dtype=np.float64)
    cdef double[:, ::1] d = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef double[:, ::1] p = np.ascontiguousarray(prims, dtype=np.float64)
    cdef int[::1] po = np.ascontiguousarray(prim_owner, dtype=np.int32)
    cdef double[:, ::1] tr = np.ascontiguousarray(tris, dtype=np.float64)
    cdef int[::1] to = np.ascontiguousarray(tri_owner, dtype=np.int32)

    cdef Py_ssize_t n = o.shape[0]
    cdef Py_ssize_t n_prims = p.shape[0]
    cdef Py_ssize_t n_tris = tr.shape[0]

    best_t_arr = np.full(n, np.inf)
    best_o_arr = np.full(n, -1, dtype=np.int32)
    best_n_arr = np.zeros((n, 3))
    cdef double[::1] best_t = best_t_arr
    cdef int[::1] best_o = best_o_arr
    cdef double[:, ::1] best_n = best_n_arr

    cdef Py_ssize_t i, k, a
    cdef int typ, owner, axis
    cdef double t, ox, oy, oz, dx, dy, dz
    cdef double c0, c1, c2, r, off
    cdef double[9] R
    cdef double[3] half
    cdef double p0x, p0y, p0z, p1x, p1y, p1z, axx, axy, axz, length
    cdef double mx, my, mz, b, disc, denom
    cdef double[3] ol
    cdef double[3] dl
    cdef double t_enter, t_exit, inv, t1v, t2v, tmp, sign
    cdef double da, ma, mdx, mdy, mdz, mmx, mmy, mmz, A, B, C, s
    cdef double hx, hy, hz, scx, scy, scz, ts
    cdef double v0x, v0y, v0z, e1x, e1y, e1z, e2x, e2y, e2z
    cdef double pvx, pvy, pvz, det, u, v, tvx, tvy, tvz, qvx, qvy, qvz
    cdef double nn, fx, fy, fz

    with nogil:
        for k in range(n_prims):
            typ = <int> p[k, 0]
            owner = po[k]
            if typ == TYPE_SPHERE:
                c0 = p[k, 1]; c1 = p[k, 2]; c2 = p[k, 3]; r = p[k, 4]
                for i in range(n):
                    mx = c0 - o[i, 0]; my = c1 - o[i, 1]; mz = c2 - o[i, 2]
                    b = _dot3(mx, my, mz, d[i, 0], d[i, 1], d[i, 2])
                    disc = r * r - (_dot3(mx, my, mz, mx, my, mz) - b * b)
                    if disc < 0:
                        continue
                    t = b - sqrt(disc)
                    if t < 0 or t >= best_t[i]:
                        continue
                    best_t[i] = t
                    best_o[i] = owner
                    best_n[i, 0] = (o[i, 0] + t * d[i, 0] - c0) / r
                    best_n[i, 1] = (o[i, 1] + t * d[i, 1] - c1) / r
                    best_n[i, 2] = (o[i, 2] + t * d[i, 2] - c2) / r
            elif typ == TYPE_PLANE:
                c0 = p[k, 1]; c1 = p[k, 2]; c2 = p[k, 3]; off = p[k, 4]
                for i in range(n):
                    denom = _dot3(d[i, 0], d[i, 1], d[i, 2], c0, c1, c2)
                    if fabs(denom) <= EPS:
                        continue
                    t = (off - _dot3(o[i, 0], o[i, 1], o[i, 2], c0, c1, c2)) / denom
                    if t < 0 or t >= best_t[i]:
                        continue
                    best_t[i] = t
                    best_o[i] = owner
                    if denom < 0:
                        best_n[i, 0] = c0; best_n[i, 1] = c1; best_n[i, 2] = c2
                    else:
                        best_n[i, 0] = -c0; best_n[i, 1] = -c1; best_n[i, 2] = -c2
            elif typ == TYPE_BOX:
                c0 = p[k, 1]; c1 = p[k, 2]; c2 = p[k, 3]
                for a in range(9):
                    R[a] = p[k, 4 + a]
                for a in range(3):
                    half[a] = p[k, 13 + a]
                for i in range(n):
                    ox = o[i, 0] - c0; oy = o[i, 1] - c1; oz = o[i, 2] - c2
                    dx = d[i, 0]; dy = d[i, 1]; dz = d[i, 2]
                    # local = R^T world (R stored row-major world-from-box)
                    ol[0] = R[0] * ox + R[3] * oy + R[6] * oz
                    ol[1] = R[1] * ox + R[4] * oy + R[7] * oz
                    ol[2] = R[2] * ox + R[5] * oy + R[8] * oz
                    dl[0] = R[0] * dx + R[3] * dy + R[6] * dz
                    dl[1] = R[1] * dx + R[4] * dy + R[7] * dz
                    dl[2] = R[2] * dx + R[5] * dy + R[8] * dz
                    t_enter = -INFINITY
                    t_exit = INFINITY
                    axis = -1
                    for a in range(3):
                        if fabs(dl[a]) <= EPS:
                            if fabs(ol[a]) > half[a]:
                                axis = -2
                                break
                            continue
                        inv = 1.0 / dl[a]
                        t1v = (-half[a] - ol[a]) * inv
                        t2v = (half[a] - ol[a]) * inv
                        if t1v > t2v:
                            tmp = t1v; t1v = t2v; t2v = tmp
                        if t1v > t_enter:
                            t_enter = t1v
                            axis = <int> a
                        if t2v < t_exit:
                            t_exit = t2v
                    if axis < 0 or t_enter > t_exit or t_exit < 0 or t_enter < 0:
                        continue
                    if t_enter >= best_t[i]:
                        continue
                    best_t[i] = t_enter
                    best_o[i] = owner
                    sign = -1.0 if dl[axis] > 0 else 1.0
                    best_n[i, 0] = R[axis] * sign
                    best_n[i, 1] = R[3 + axis] * sign
                    best_n[i, 2] = R[6 + axis] * sign
            else:  # capsule
                p0x = p[k, 1]; p0y = p[k, 2]; p0z = p[k, 3]
                p1x = p[k, 4]; p1y = p[k, 5]; p1z = p[k, 6]
                r = p[k, 7]
                axx = p1x - p0x; axy = p1y - p0y; axz = p1z - p0z
                length = sqrt(_dot3(axx, axy, axz, axx, axy, axz))
                if length >= EPS:
                    axx /= length; axy /= length; axz /= length
                for i in range(n):
                    dx = d[i, 0]; dy = d[i, 1]; dz = d[i, 2]
                    t = INFINITY
                    if length >= EPS:
                        mx = o[i, 0] - p0x; my = o[i, 1] - p0y; mz = o[i, 2] - p0z
                        da = _dot3(dx, dy, dz, axx, axy, axz)
                        ma = _dot3(mx, my, mz, axx, axy, axz)
                        mdx = dx - da * axx; mdy = dy - da * axy; mdz = dz - da * axz
                        mmx = mx - ma * axx; mmy = my - ma * axy; mmz = mz - ma * axz
                        A = _dot3(mdx, mdy, mdz, mdx, mdy, mdz)
                        B = 2.0 * _dot3(mmx, mmy, mmz, mdx, mdy, mdz)
                        C = _dot3(mmx, mmy, mmz, mmx, mmy, mmz) - r * r
                        disc = B * B - 4.0 * A * C
                        if A > EPS and disc >= 0:
                            ts = (-B - sqrt(disc)) / (2.0 * A)
                            if ts >= 0:
                                s = ma + ts * da
                                if 0 <= s <= length:
                                    t = ts
                    ts = _ray_sphere_t(o[i, 0], o[i, 1], o[i, 2], dx, dy, dz,
                                       p0x, p0y, p0z, r)
                    if ts < t:
                        t = ts
                    ts = _ray_sphere_t(o[i, 0], o[i, 1], o[i, 2], dx, dy, dz,
                                       p1x, p1y, p1z, r)
                    if ts < t:
                        t = ts
                    if t >= best_t[i]:
                        continue
                    hx = o[i, 0] + t * dx; hy = o[i, 1] + t * dy; hz = o[i, 2] + t * dz
                    if length >= EPS:
                        s = _dot3(hx - p0x, hy - p0y, hz - p0z, axx, axy, axz)
                        if s < 0:
                            s = 0
                        elif s > length:
                            s = length
                    else:
                        s = 0
                    scx = p0x + s * axx; scy = p0y + s * axy; scz = p0z + s * axz
                    best_t[i] = t
                    best_o[i] = owner
                    best_n[i, 0] = (hx - scx) / r
                    best_n[i, 1] = (hy - scy) / r
                    best_n[i, 2] = (hz - scz) / r

        for k in range(n_tris):
            v0x = tr[k, 0]; v0y = tr[k, 1]; v0z = tr[k, 2]
            e1x = tr[k, 3]; e1y = tr[k, 4]; e1z = tr[k, 5]
            e2x = tr[k, 6]; e2y = tr[k, 7]; e2z = tr[k, 8]
            fx = e1y * e2z - e1z * e2y
            fy = e1z * e2x - e1x * e2z
            fz = e1x * e2y - e1y * e2x
            nn = sqrt(_dot3(fx, fy, fz, fx, fy, fz))
            if nn > 0:
                fx /= nn; fy /= nn; fz /= nn
            owner = to[k]
            for i in range(n):
                dx = d[i, 0]; dy = d[i, 1]; dz = d[i, 2]
                pvx = dy * e2z - dz * e2y
                pvy = dz * e2x - dx * e2z
                pvz = dx * e2y - dy * e2x
                det = _dot3(pvx, pvy, pvz, e1x, e1y, e1z)
                if fabs(det) <= EPS:
                    continue
                inv = 1.0 / det
                tvx = o[i, 0] - v0x; tvy = o[i, 1] - v0y; tvz = o[i, 2] - v0z
                u = _dot3(tvx, tvy, tvz, pvx, pvy, pvz) * inv
                if u < 0 or u > 1:
                    continue
                qvx = tvy * e1z - tvz * e1y
                qvy = tvz * e1x - tvx * e1z
                qvz = tvx * e1y - tvy * e1x
                v = _dot3(dx, dy, dz, qvx, qvy, qvz) * inv
                if v < 0 or u + v > 1:
                    continue
                t = _dot3(qvx, qvy, qvz, e2x, e2y, e2z) * inv
                if t < 0 or t >= best_t[i]:
                    continue
                best_t[i] = t
                best_o[i] = owner
                if _dot3(dx, dy, dz, fx, fy, fz) > 0:
                    best_n[i, 0] = -fx; best_n[i, 1] = -fy; best_n[i, 2] = -fz
                else:
                    best_n[i, 0] = fx; best_n[i, 1] = fy; best_n[i, 2] = fz
    return best_t_arr, best_o_arr, best_n_arr


cdef inline double _ray_sphere_t(double ox, double oy, double oz,
                                 double dx, double dy, double dz,
                                 double cx, double cy, double cz, double r) nogil:
    cdef double mx = cx - ox
    cdef double my = cy - oy
    cdef double mz = cz - oz
    cdef double b = _dot3(mx, my, mz, dx, dy, dz)
    cdef double disc = r * r - (_dot3(mx, my, mz, mx, my, mz) - b * b)
    if disc < 0:
        return INFINITY
    cdef double t = b - sqrt(disc)
    if t < 0:
        return INFINITY
    return t


# ---------------------------------------------------------------------------
# line depth (tactile)
# ---------------------------------------------------------------------------

def line_depth(points, normals, prims, tris):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] nr = np.ascontiguousarray(normals, dtype=np.float64)
    cdef double[:, ::1] pr = np.ascontiguousarray(prims, dtype=np.float64)
    cdef double[:, ::1] tr = np.ascontiguousarray(tris, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t n_prims = pr.shape[0]
    cdef Py_ssize_t n_tris = tr.shape[0]

    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef int typ
    cdef double dd

    with nogil:
        for k in range(n_prims):
            typ = <int> pr[k, 0]
            for i in range(n):
                if typ == TYPE_SPHERE:
                    dd = _depth_sphere(p[i, 0], p[i, 1], p[i, 2],
                                       nr[i, 0], nr[i, 1], nr[i, 2],
                                       pr[k, 1], pr[k, 2], pr[k, 3], pr[k, 4])
                elif typ == TYPE_BOX:
                    dd = _depth_box(p[i, 0], p[i, 1], p[i, 2],
                                    nr[i, 0], nr[i, 1], nr[i, 2], &pr[k, 0])
                elif typ == TYPE_CAPSULE:
                    dd = _depth_capsule(p[i, 0], p[i, 1], p[i, 2],
                                        nr[i, 0], nr[i, 1], nr[i, 2], &pr[k, 0])
                else:
                    dd = _depth_plane(p[i, 0], p[i, 1], p[i, 2],
                                      nr[i, 0], nr[i, 1], nr[i, 2],
                                      pr[k, 1], pr[k, 2], pr[k, 3], pr[k, 4])
                if dd > out[i]:
                    out[i] = dd
        if n_tris > 0:
            for i in range(n):
                dd = _depth_trimesh(p[i, 0], p[i, 1], p[i, 2],
                                    nr[i, 0], nr[i, 1], nr[i, 2], tr, n_tris)
                if dd > out[i]:
                    out[i] = dd
    return out_arr


cdef inline double _interval_depth(double t0, double t1) nogil:
    if t0 <= 0.0 <= t1:
        return -t0
    return 0.0


cdef double _depth_sphere(double px, double py, double pz,
                          double nx, double ny, double nz,
                          double cx, double cy, double cz, double r) nogil:
    cdef double mx = cx - px
    cdef double my = cy - py
    cdef double mz = cz - pz
    cdef double b = _dot3(mx, my, mz, nx, ny, nz)
    cdef double disc = r * r - (_dot3(mx, my, mz, mx, my, mz) - b * b)
    if disc < 0:
        return 0.0
    cdef double sq = sqrt(disc)
    return _interval_depth(b - sq, b + sq)


cdef double _depth_plane(double px, double py, double pz,
                         double nx, double ny, double nz,
                         double mx, double my, double mz, double off) nogil:
    cdef double denom = _dot3(nx, ny, nz, mx, my, mz)
    cdef double val = off - _dot3(px, py, pz, mx, my, mz)
    cdef double t_c
    if denom < -EPS:
        t_c = val / denom
        if t_c <= 0:
            return -t_c
        return 0.0
    if denom > EPS:
        t_c = val / denom
        if t_c >= 0:
            return BURIED
        return 0.0
    if val >= 0:
        return BURIED
    return 0.0


cdef double _depth_box(double px, double py, double pz,
                       double nx, double ny, double nz,
                       const double* row) nogil:
    cdef double wx = px - row[1]
    cdef double wy = py - row[2]
    cdef double wz = pz - row[3]
    cdef double[3] pl
    cdef double[3] nl
    cdef double[3] half
    cdef Py_ssize_t a
    for a in range(3):
        pl[a] = row[4 + a] * wx + row[7 + a] * wy + row[10 + a] * wz
        nl[a] = row[4 + a] * nx + row[7 + a] * ny + row[10 + a] * nz
        half[a] = row[13 + a]
    cdef double t0 = -INFINITY
    cdef double t1 = INFINITY
    cdef double inv, ta, tb, tmp
    for a in range(3):
        if fabs(nl[a]) <= EPS:
            if fabs(pl[a]) > half[a]:
                return 0.0
            continue
        inv = 1.0 / nl[a]
        ta = (-half[a] - pl[a]) * inv
        tb = (half[a] - pl[a]) * inv
        if ta > tb:
            tmp = ta
            ta = tb
            tb = tmp
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
    if t0 > t1:
        return 0.0
    return _interval_depth(t0, t1)


cdef double _depth_capsule(double px, double py, double pz,
                           double nx, double ny, double nz,
                           const double* row) nogil:
    cdef double p0x = row[1], p0y = row[2], p0z = row[3]
    cdef double p1x = row[4], p1y = row[5], p1z = row[6]
    cdef double r = row[7]
    cdef double axx = p1x - p0x
    cdef double axy = p1y - p0y
    cdef double axz = p1z - p0z
    cdef double length = sqrt(_dot3(axx, axy, axz, axx, axy, axz))
    if length < EPS:
        return _depth_sphere(px, py, pz, nx, ny, nz, p0x, p0y, p0z, r)
    axx /= length
    axy /= length
    axz /= length
    cdef double mx = px - p0x
    cdef double my = py - p0y
    cdef double mz = pz - p0z
    cdef double na = _dot3(nx, ny, nz, axx, axy, axz)
    cdef double ma = _dot3(mx, my, mz, axx, axy, axz)
    cdef double mdx = nx - na * axx
    cdef double mdy = ny - na * axy
    cdef double mdz = nz - na * axz
    cdef double mmx = mx - ma * axx
    cdef double mmy = my - ma * axy
    cdef double mmz = mz - ma * axz
    cdef double A = _dot3(mdx, mdy, mdz, mdx, mdy, mdz)
    cdef double B = 2.0 * _dot3(mmx, mmy, mmz, mdx, mdy, mdz)
    cdef double C = _dot3(mmx, mmy, mmz, mmx, mmy, mmz) - r * r
    cdef double disc = B * B - 4.0 * A * C
    cdef double t0 = INFINITY
    cdef double t1 = -INFINITY
    cdef double tc0, tc1, s
    if A > EPS and disc >= 0:
        tc0 = (-B - sqrt(disc)) / (2.0 * A)
        tc1 = (-B + sqrt(disc)) / (2.0 * A)
        s = ma + tc0 * na
        if 0 <= s <= length and tc0 < t0:
            t0 = tc0
        s = ma + tc1 * na
        if 0 <= s <= length and tc1 > t1:
            t1 = tc1
    cdef double b0 = _dot3(p0x - px, p0y - py, p0z - pz, nx, ny, nz)
    cdef double q0 = r * r - (_dot3(p0x - px, p0y - py, p0z - pz,
                                    p0x - px, p0y - py, p0z - pz) - b0 * b0)
    cdef double e, x
    if q0 >= 0:
        e = b0 - sqrt(q0)
        x = b0 + sqrt(q0)
        if e < t0:
            t0 = e
        if x > t1:
            t1 = x
    cdef double b1 = _dot3(p1x - px, p1y - py, p1z - pz, nx, ny, nz)
    cdef double q1 = r * r - (_dot3(p1x - px, p1y - py, p1z - pz,
                                    p1x - px, p1y - py, p1z - pz) - b1 * b1)
    if q1 >= 0:
        e = b1 - sqrt(q1)
        x = b1 + sqrt(q1)
        if e < t0:
            t0 = e
        if x > t1:
            t1 = x
    if t0 > t1:
        return 0.0
    return _interval_depth(t0, t1)


cdef double _depth_trimesh(double px, double py, double pz,
                           double nx, double ny, double nz,
                           double[:, ::1] tr, Py_ssize_t n_tris) nogil:
    # nearest crossing at t <= 0 decides coverage by its face orientation;
    # see pure._depth_trimesh for the rationale
    cdef double t_lower = -INFINITY
    cdef double best_dot = INFINITY
    cdef Py_ssize_t k
    cdef double det, inv, u, v, t, fdot, nn
    cdef double pvx, pvy, pvz, tvx, tvy, tvz, qvx, qvy, qvz
    cdef double e1x, e1y, e1z, e2x, e2y, e2z, fx, fy, fz
    for k in range(n_tris):
        e1x = tr[k, 3]; e1y = tr[k, 4]; e1z = tr[k, 5]
        e2x = tr[k, 6]; e2y = tr[k, 7]; e2z = tr[k, 8]
        pvx = ny * e2z - nz * e2y
        pvy = nz * e2x - nx * e2z
        pvz = nx * e2y - ny * e2x
        det = _dot3(pvx, pvy, pvz, e1x, e1y, e1z)
        if fabs(det) <= EPS:
            continue
        inv = 1.0 / det
        tvx = px - tr[k, 0]; tvy = py - tr[k, 1]; tvz = pz - tr[k, 2]
        u = _dot3(tvx, tvy, tvz, pvx, pvy, pvz) * inv
        if u < 0 or u > 1:
            continue
        qvx = tvy * e1z - tvz * e1y
        qvy = tvz * e1x - tvx * e1z
        qvz = tvx * e1y - tvy * e1x
        v = _dot3(nx, ny, nz, qvx, qvy, qvz) * inv
        if v < 0 or u + v > 1:
            continue
        t = _dot3(qvx, qvy, qvz, e2x, e2y, e2z) * inv
        if t > 0:
            continue
        fx = e1y * e2z - e1z * e2y
        fy = e1z * e2x - e1x * e2z
        fz = e1x * e2y - e1y * e2x
        nn = sqrt(_dot3(fx, fy, fz, fx, fy, fz))
        if nn <= 0:
            continue
        fdot = _dot3(nx, ny, nz, fx / nn, fy / nn, fz / nn)
        if t > t_lower or (t == t_lower and fdot < best_dot):
            t_lower = t
            best_dot = fdot
    if best_dot < 0:
        return -t_lower
    return 0.0
