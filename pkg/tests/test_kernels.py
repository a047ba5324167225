"""Backend parity: the compiled kernels and the numpy fallback must agree."""
import numpy as np
import pytest

from sensorium._kernels import BURIED_DEPTH, pure

try:
    from sensorium._kernels import _core
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled kernels not built")


def random_scene(seed, n_meshes=1):
    from scipy.spatial.transform import Rotation
    rng = np.random.default_rng(seed)
    prims = []
    for _ in range(3):
        prims.append(pure.pack_sphere(rng.uniform(-2, 2, 3), rng.uniform(0.2, 0.8)))
    for i in range(3):
        rot = Rotation.random(random_state=seed * 10 + i).as_matrix()
        prims.append(pure.pack_box(rng.uniform(-2, 2, 3), rot, rng.uniform(0.2, 0.9, 3)))
    for _ in range(2):
        p0 = rng.uniform(-2, 2, 3)
        prims.append(pure.pack_capsule(p0, p0 + rng.uniform(-1, 1, 3),
                                       rng.uniform(0.15, 0.5)))
    prims.append(pure.pack_plane([0.0, 1.0, 0.0], 0.0))
    prims = np.stack(prims)
    owner = np.arange(prims.shape[0], dtype=np.int32)

    tris = []
    tri_owner = []
    for m in range(n_meshes):
        base = rng.uniform(-2, 2, 3)
        base[1] = rng.uniform(0.2, 1.0)
        v = np.array([[-0.5, 0, -0.5], [0.5, 0, -0.5], [0.5, 0, 0.5],
                      [-0.5, 0, 0.5], [0.0, 0.7, 0.0]]) * rng.uniform(0.5, 1.5) + base
        for a, b, c in [[0, 2, 1], [0, 3, 2], [0, 1, 4], [1, 2, 4], [2, 3, 4],
                        [3, 0, 4]]:
            tris.append(np.concatenate([v[a], v[b] - v[a], v[c] - v[a]]))
            tri_owner.append(prims.shape[0] + m)
    tris = np.stack(tris) if tris else np.zeros((0, 9))
    tri_owner = np.asarray(tri_owner, dtype=np.int32)
    return prims, owner, tris, tri_owner, rng


@needs_compiled
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_raycast_parity(seed):
    prims, owner, tris, tri_owner, rng = random_scene(seed)
    n = 4000
    o = rng.uniform(-3, 3, (n, 3))
    o[:, 1] = rng.uniform(0.05, 3.0, n)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    t1, o1, n1 = pure.raycast(o, d, prims, owner, tris, tri_owner)
    t2, o2, n2 = _core.raycast(o, d, prims, owner, tris, tri_owner)
    assert np.array_equal(o1, o2)
    finite = np.isfinite(t1)
    assert np.array_equal(finite, np.isfinite(t2))
    assert np.abs(t1[finite] - t2[finite]).max() < 1e-12
    assert np.abs(n1 - n2).max() < 1e-12


@needs_compiled
@pytest.mark.parametrize("seed", [4, 5, 6])
def test_line_depth_parity(seed):
    prims, owner, tris, tri_owner, rng = random_scene(seed)
    n = 2000
    p = rng.uniform(-3, 3, (n, 3))
    p[:, 1] = rng.uniform(-0.2, 2.5, n)
    nr = rng.normal(size=(n, 3))
    nr /= np.linalg.norm(nr, axis=1, keepdims=True)
    d1 = pure.line_depth(p, nr, prims, tris)
    d2 = _core.line_depth(p, nr, prims, tris)
    capped1 = np.minimum(d1, BURIED_DEPTH)
    capped2 = np.minimum(d2, BURIED_DEPTH)
    assert np.abs(capped1 - capped2).max() < 1e-12
    assert (d1 > 0).sum() == (d2 > 0).sum()


def test_depth_semantics_box_and_capsule():
    # a unit box pressing down past a taxel by 0.3
    rot = np.eye(3)
    prims = np.stack([pure.pack_box([0.0, 0.7, 0.0], rot, [1.0, 1.0, 1.0])])
    p = np.zeros((1, 3))
    nrm = np.array([[0.0, 1.0, 0.0]])
    d = pure.line_depth(p, nrm, prims, np.zeros((0, 9)))
    assert d[0] == pytest.approx(0.3, abs=1e-12)

    prims = np.stack([pure.pack_capsule([-1.0, 0.35, 0.0], [1.0, 0.35, 0.0], 0.4)])
    d = pure.line_depth(p, nrm, prims, np.zeros((0, 9)))
    assert d[0] == pytest.approx(0.05, abs=1e-12)


def test_depth_zero_when_shape_above_surface():
    prims = np.stack([pure.pack_sphere([0.0, 0.5, 0.0], 0.3)])
    p = np.zeros((1, 3))
    nrm = np.array([[0.0, 1.0, 0.0]])
    d = pure.line_depth(p, nrm, prims, np.zeros((0, 9)))
    assert d[0] == 0.0


def test_depth_trimesh_inside_outside():
    v = np.array([[-1.0, 0, -1.0], [1.0, 0, -1.0], [1.0, 0, 1.0], [-1.0, 0, 1.0],
                  [0.0, 1.2, 0.0]])
    tris = []
    # outward winding: base normals down, side normals away from the axis
    for a, b, c in [[0, 1, 2], [0, 2, 3], [0, 4, 1], [1, 4, 2], [2, 4, 3], [3, 4, 0]]:
        tris.append(np.concatenate([v[a], v[b] - v[a], v[c] - v[a]]))
    tris = np.stack(tris)
    inside = np.array([[0.0, 0.3, 0.0]])
    outside = np.array([[2.5, 0.3, 0.0]])
    nrm = np.array([[0.0, 1.0, 0.0]])
    d_in = pure.line_depth(inside, nrm, np.zeros((0, 20)), tris)
    d_out = pure.line_depth(outside, nrm, np.zeros((0, 20)), tris)
    assert d_in[0] == pytest.approx(0.3, abs=1e-12)  # down to the base plane
    assert d_out[0] == 0.0


@needs_compiled
def test_compiled_backend_selected_by_default():
    import sensorium._kernels as kernels
    assert kernels.backend_name() in ("compiled", "pure")
