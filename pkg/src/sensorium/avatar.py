"""The embodied agent: actions, gaze, interaction predicates, proprioception.

An agent runs in one of two mutually exclusive action modes chosen at
construction: 'animation' (kinematic walk/turn primitives plus kick, grab,
release, make-sound) or 'torque' (normalized per-axis joint torques). Both
modes share the same skeleton, skin and sensor suite.

Interaction follows the visibility-gated rule: an object can be kicked or
grabbed only when it is inside an eye frustum, not hidden behind an opaque
body, within reach, and (for interaction, not bare visibility) not behind a
transparent pane either.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import InteractionRefusedError, ModeConflictError, NotFoundError
from .geom import Frame, look_rotation, quat_from_yaw, quat_rotate
from .physics import Capsule, Collider, RigidBody, Sphere, apply_torque
from .skeleton import Skeleton, load_skeleton

DEFAULT_IPD = 0.06             # m between eye centers
DEFAULT_EAR_OFFSET = 0.0875    # m from head center to each ear
DEFAULT_INTERACT_DISTANCE = 1.5
DEFAULT_KICK_IMPULSE = 2.0     # N*s
EYE_FORWARD_OFFSET = 0.08
EYE_HEIGHT_OFFSET = 0.05

# animation-mode action vector layout
PRIMITIVE_ACTION_DIM = 6
A_WALK, A_TURN, A_KICK, A_GRAB, A_RELEASE, A_SOUND = range(6)


class Agent:
    def __init__(self, agent_id: str, mode: str = "animation",
                 skeleton: Skeleton | None = None,
                 position=(0.0, 0.0, 0.0), yaw: float = 0.0,
                 ipd: float = DEFAULT_IPD,
                 interact_distance: float = DEFAULT_INTERACT_DISTANCE,
                 kick_impulse: float = DEFAULT_KICK_IMPULSE,
                 vertical_fov_deg: float = 60.0):
        if mode not in ("animation", "torque"):
            raise ValueError(f"unknown agent mode {mode!r}")
        self.agent_id = agent_id
        self.mode = mode
        self.skeleton = skeleton if skeleton is not None else load_skeleton()
        self.ipd = float(ipd)
        self.ear_offset = DEFAULT_EAR_OFFSET
        self.interact_distance = float(interact_distance)
        self.kick_impulse = float(kick_impulse)
        self.vertical_fov_deg = float(vertical_fov_deg)

        self.yaw = float(yaw)
        pos = np.asarray(position, dtype=float)
        self.root_body = RigidBody(
            body_id=f"{agent_id}/root", mass=60.0, position=pos + np.array([0.0, 0.9, 0.0]),
            kinematic=True, group=agent_id, color=np.array([0.9, 0.75, 0.6]))
        self.root_body.orientation = quat_from_yaw(self.yaw)
        self.colliders = [
            Collider(Capsule(radius=0.18, half_height=0.55), self.root_body.body_id),
        ]
        self.hand_bodies = {
            "l": RigidBody(body_id=f"{agent_id}/hand_l", mass=1.0, kinematic=True,
                           group=agent_id, color=np.array([0.9, 0.75, 0.6])),
            "r": RigidBody(body_id=f"{agent_id}/hand_r", mass=1.0, kinematic=True,
                           group=agent_id, color=np.array([0.9, 0.75, 0.6])),
        }
        # palm sphere top flush with the palm skin plane (local +z, at 0.0125),
        # so resting objects press the skin by the contact slop
        self.hand_colliders = [
            Collider(Sphere(0.045), self.hand_bodies["l"].body_id,
                     offset_pos=np.array([0.0, 0.0, -0.0325])),
            Collider(Sphere(0.045), self.hand_bodies["r"].body_id,
                     offset_pos=np.array([0.0, 0.0, -0.0325])),
        ]

        self.gaze_target: np.ndarray | None = None
        self.head_pitch = 0.0
        self.head_yaw = 0.0
        self.grabbed_object: str | None = None
        self._grab_hand = None
        self._grab_offset = None
        self._prev_hand_pos = {"l": np.zeros(3), "r": np.zeros(3)}
        self._hand_velocity = {"l": np.zeros(3), "r": np.zeros(3)}
        self._rel_dirty = True      # joint angles changed: re-run FK
        self._world_dirty = True    # root moved: recompose cached arrays
        self._pose_stamp = 0
        self._taxel_stamp = -1
        self.pending_voice: np.ndarray | None = None
        self.refresh_pose()

    # -- pose and frames ----------------------------------------------------
    # Bone poses are cached in two stages: frames relative to the root body
    # (invalidated by joint-angle or head changes) and world arrays composed
    # with the root pose (invalidated whenever the root moves).

    def root_frame(self) -> Frame:
        f = Frame(self.root_body.position.copy(), self.root_body.orientation.copy())
        return f.compose(Frame([0.0, -0.9, 0.0]))  # skeleton root sits on the ground plane

    def _recompute_rel(self):
        from .geom import quat_to_matrix_batch
        frames = self.skeleton.forward_kinematics(Frame([0.0, -0.9, 0.0]))
        self._rel_pos = np.stack([f.pos for f in frames])
        self._rel_quat = np.stack([f.rot for f in frames])
        sk = self.skeleton
        if sk.n_taxels:
            mats = quat_to_matrix_batch(self._rel_quat)
            m = mats[sk.taxel_bone_tri]
            self._rel_taxel_pos = (np.einsum("nij,nj->ni", m, sk.taxel_local)
                                   + self._rel_pos[sk.taxel_bone_tri])
            self._rel_taxel_nrm = np.einsum("nij,nj->ni", m, sk.taxel_normal_local)
        else:
            self._rel_taxel_pos = np.zeros((0, 3))
            self._rel_taxel_nrm = np.zeros((0, 3))
        self._rel_dirty = False

    def refresh_pose(self):
        from .geom import quat_mul_batch, quat_to_matrix
        if self._rel_dirty:
            self._recompute_rel()
        rot = self.root_body.orientation
        self._root_mat = quat_to_matrix(rot)
        self._bone_pos = self.root_body.position + self._rel_pos @ self._root_mat.T
        self._bone_quat = quat_mul_batch(
            np.broadcast_to(rot, (self.skeleton.n_bones, 4)), self._rel_quat)
        self._world_dirty = False
        self._pose_stamp += 1
        for side in ("l", "r"):
            frame = self.hand_frame(side)
            anchor = frame.transform_point([0.0, 0.045, 0.0])
            self._prev_hand_pos[side] = self.hand_bodies[side].position
            self.hand_bodies[side].position = anchor
            self.hand_bodies[side].orientation = frame.rot.copy()

    def taxel_world(self):
        """World positions and outward normals of every taxel (cached per pose)."""
        if self._rel_dirty or self._world_dirty:
            self.refresh_pose()
        if self._taxel_stamp != self._pose_stamp:
            self._taxel_pos = self.root_body.position + self._rel_taxel_pos @ self._root_mat.T
            self._taxel_nrm = self._rel_taxel_nrm @ self._root_mat.T
            self._taxel_stamp = self._pose_stamp
        return self._taxel_pos, self._taxel_nrm

    def mark_dirty(self):
        """Root pose changed (walk, teleport)."""
        self._world_dirty = True

    def mark_joints_changed(self):
        self._rel_dirty = True
        self._world_dirty = True

    @property
    def bone_frames(self) -> list[Frame]:
        if self._rel_dirty or self._world_dirty:
            self.refresh_pose()
        return [Frame(self._bone_pos[i], self._bone_quat[i])
                for i in range(self.skeleton.n_bones)]

    def bone_frame(self, bone_id: str) -> Frame:
        if self._rel_dirty or self._world_dirty:
            self.refresh_pose()
        i = self.skeleton.bone_index[bone_id]
        return Frame(self._bone_pos[i], self._bone_quat[i])

    def hand_frame(self, side: str) -> Frame:
        return self.bone_frame(f"hand_{side}")

    def _gaze_version(self):
        return (self._pose_stamp, self.head_pitch, self.head_yaw,
                None if self.gaze_target is None else tuple(self.gaze_target))

    def head_frame(self) -> Frame:
        version = self._gaze_version()
        cached = getattr(self, "_head_cache", None)
        if cached is not None and cached[0] == version:
            return cached[1]
        base = self.bone_frame("head")
        if self.head_pitch != 0.0 or self.head_yaw != 0.0:
            from .geom import quat_from_axis_angle, quat_mul
            q = quat_mul(quat_from_axis_angle([0, 1, 0], self.head_yaw),
                         quat_from_axis_angle([1, 0, 0], self.head_pitch))
            base = Frame(base.pos, quat_mul(base.rot, q))
        self._head_cache = (version, base)
        return base

    def eye_frame(self, eye: str) -> Frame:
        version = self._gaze_version()
        cached = getattr(self, "_eye_cache", None)
        if cached is not None and cached[0] == version and eye in cached[1]:
            return cached[1][eye]
        head = self.head_frame()
        sign = -1.0 if eye == "left" else 1.0
        pos = head.transform_point([sign * self.ipd / 2.0, EYE_HEIGHT_OFFSET, EYE_FORWARD_OFFSET])
        if self.gaze_target is not None:
            frame = Frame(pos, look_rotation(np.asarray(self.gaze_target, dtype=float) - pos))
        else:
            frame = Frame(pos, head.rot.copy())
        if cached is None or cached[0] != version:
            self._eye_cache = (version, {eye: frame})
        else:
            cached[1][eye] = frame
        return frame

    def ear_positions(self):
        head = self.head_frame()
        left = head.transform_point([-self.ear_offset, EYE_HEIGHT_OFFSET, 0.0])
        right = head.transform_point([self.ear_offset, EYE_HEIGHT_OFFSET, 0.0])
        return left, right

    def gaze_axis(self) -> np.ndarray:
        left = self.eye_frame("left")
        right = self.eye_frame("right")
        d = left.forward() + right.forward()
        return d / np.linalg.norm(d)

    def update_hand_velocities(self, dt: float):
        for side in ("l", "r"):
            self._hand_velocity[side] = (self.hand_bodies[side].position
                                         - self._prev_hand_pos[side]) / dt

    # -- primitive actions ---------------------------------------------------

    def walk(self, walk_speed: float, turn_speed: float, dt_control: float):
        """Kinematic locomotion: turn, then advance along the new heading."""
        if self.mode != "animation":
            raise ModeConflictError("walk() is an animation-mode primitive")
        self.yaw += turn_speed * dt_control
        self.root_body.orientation = quat_from_yaw(self.yaw)
        fwd = quat_rotate(self.root_body.orientation, np.array([0.0, 0.0, 1.0]))
        self.root_body.position = self.root_body.position + fwd * (walk_speed * dt_control)
        self.root_body.linear_velocity = fwd * walk_speed
        self.mark_dirty()

    def set_torques(self, normalized_torque):
        if self.mode != "torque":
            raise ModeConflictError("joint torques require torque mode")
        apply_torque(self.skeleton.joints, normalized_torque)

    def kick(self, world, object_id: str):
        """Impulse along the horizontal agent->object direction; needs reach."""
        if not self.is_interactable(world, object_id):
            raise InteractionRefusedError(f"{object_id!r} is not interactable")
        obj = world.bodies[object_id]
        delta = obj.position - self.root_body.position
        delta[1] = 0.0
        n = np.linalg.norm(delta)
        direction = delta / n if n > 1e-9 else quat_rotate(self.root_body.orientation,
                                                           np.array([0.0, 0.0, 1.0]))
        if not obj.kinematic:
            obj.linear_velocity = obj.linear_velocity + direction * (self.kick_impulse / obj.mass)
        return direction

    def grab(self, world, object_id: str):
        """Rigidly attach a light interactable object to the nearer hand."""
        if self.grabbed_object is not None:
            raise InteractionRefusedError("already holding an object")
        if not self.is_interactable(world, object_id):
            raise InteractionRefusedError(f"{object_id!r} is not interactable")
        obj = world.bodies[object_id]
        if obj.kinematic or obj.mass >= world.mass_threshold:
            raise InteractionRefusedError(f"{object_id!r} is too heavy to grab")
        dl = np.linalg.norm(obj.position - self.hand_bodies["l"].position)
        dr = np.linalg.norm(obj.position - self.hand_bodies["r"].position)
        side = "l" if dl <= dr else "r"
        frame = self.hand_frame(side)
        self.grabbed_object = object_id
        self._grab_hand = side
        self._grab_offset = frame.inverse().transform_point(obj.position)
        obj.kinematic = True
        obj.linear_velocity = np.zeros(3)

    def release(self, world):
        """Detach the held object with the hand's current velocity; no-op if empty."""
        if self.grabbed_object is None:
            return
        obj = world.bodies.get(self.grabbed_object)
        if obj is not None:
            obj.kinematic = False
            obj.linear_velocity = self._hand_velocity[self._grab_hand].copy()
        self.grabbed_object = None
        self._grab_hand = None
        self._grab_offset = None

    def carry_grabbed(self, world):
        """Kinematic follow: held object keeps a constant hand-frame offset."""
        if self.grabbed_object is None:
            return
        obj = world.bodies.get(self.grabbed_object)
        if obj is None:
            self.grabbed_object = None
            return
        frame = self.hand_frame(self._grab_hand)
        obj.position = frame.transform_point(self._grab_offset)
        obj.linear_velocity = self._hand_velocity[self._grab_hand].copy()

    def look_toward_point(self, target):
        self.gaze_target = np.asarray(target, dtype=float).copy()

    def release_toward_point(self):
        self.gaze_target = None

    def rotate_head(self, up_down_deg: float, left_right_deg: float):
        # unconstrained on purpose: mirrors the free head rotation primitive;
        # applied on top of the head bone frame, so no FK recompute needed
        self.head_pitch += np.radians(up_down_deg)
        self.head_yaw += np.radians(left_right_deg)

    def make_sound(self, samples) -> bool:
        """Queue a voice clip; the environment registers it at the head."""
        samples = np.asarray(samples, dtype=float).reshape(-1)
        if samples.size == 0:
            return False
        self.pending_voice = samples
        return True

    # -- sensing ------------------------------------------------------------

    def get_proprioception(self) -> np.ndarray:
        """Fixed-order concatenation: bone quats, joint angles, joint velocities."""
        if self._rel_dirty or self._world_dirty:
            self.refresh_pose()
        return np.concatenate([
            self._bone_quat.reshape(-1),
            self.skeleton.get_angles(),
            self.skeleton.get_velocities(),
        ]).astype(np.float32)

    def proprio_length(self) -> int:
        return 4 * self.skeleton.n_bones + 2 * self.skeleton.total_dof

    def _frustum_contains(self, eye_frame: Frame, point) -> bool:
        local = quat_rotate(np.array([eye_frame.rot[0], -eye_frame.rot[1],
                                      -eye_frame.rot[2], -eye_frame.rot[3]]),
                            np.asarray(point, dtype=float) - eye_frame.pos)
        if local[2] <= 0:
            return False
        lim = np.tan(np.radians(self.vertical_fov_deg) / 2.0) * local[2]
        return bool(abs(local[0]) <= lim and abs(local[1]) <= lim)

    def _ray_blocked(self, world, origin, target_point, target_id, opaque_only: bool) -> bool:
        direction = np.asarray(target_point, dtype=float) - origin
        dist = float(np.linalg.norm(direction))
        if dist < 1e-9:
            return False
        direction = direction / dist
        prims, prim_owner, tris, tri_owner, _ = pack_world_colliders(
            world, exclude_group=self.agent_id, exclude_bodies={target_id},
            opaque_only=opaque_only)
        if prims.shape[0] == 0 and tris.shape[0] == 0:
            return False
        t, owner, _ = _kernels.raycast(origin[None, :], direction[None, :],
                                       prims, prim_owner, tris, tri_owner)
        return bool(owner[0] >= 0 and t[0] < dist - 1e-6)

    def is_visible(self, world, object_id: str, eye: str = "left") -> bool:
        """Inside the eye frustum and not hidden behind an opaque body.

        Transparent bodies never occlude visibility (they do block
        interaction, see is_interactable)."""
        if object_id not in world.bodies:
            raise NotFoundError(f"unknown object {object_id!r}")
        center = world.bodies[object_id].position
        frame = self.eye_frame(eye)
        if not self._frustum_contains(frame, center):
            return False
        return not self._ray_blocked(world, frame.pos, center, object_id, opaque_only=True)

    def is_interactable(self, world, object_id: str) -> bool:
        """Visible, within reach, and no body (even transparent) in between.

        Reach is measured from the eye midpoint, the same anchor the frustum
        uses, so pushing an object farther along its bearing can only revoke
        interactability, never grant it."""
        if object_id not in world.bodies:
            raise NotFoundError(f"unknown object {object_id!r}")
        center = world.bodies[object_id].position
        mid = 0.5 * (self.eye_frame("left").pos + self.eye_frame("right").pos)
        if float(np.linalg.norm(center - mid)) > self.interact_distance:
            return False
        for eye in ("left", "right"):
            if self.is_visible(world, object_id, eye):
                frame = self.eye_frame(eye)
                if not self._ray_blocked(world, frame.pos, center, object_id,
                                         opaque_only=False):
                    return True
        return False

    def get_interactable_objects(self, world, candidate_ids) -> list[str]:
        """Interactable candidates ordered by angle off the gaze axis."""
        head = self.head_frame()
        axis = self.gaze_axis()
        scored = []
        for oid in candidate_ids:
            if not self.is_interactable(world, oid):
                continue
            delta = world.bodies[oid].position - head.pos
            dist = float(np.linalg.norm(delta))
            ang = float(np.arccos(np.clip(delta @ axis / max(dist, 1e-12), -1.0, 1.0)))
            scored.append((ang, dist, oid))
        scored.sort()
        return [oid for _, _, oid in scored]


def _prim_row(collider, body):
    from .geom import quat_to_matrix
    from .physics import Box, Capsule, Plane, Sphere

    pos, rot_q = collider.world_pose(body)
    shape = collider.shape
    if isinstance(shape, Sphere):
        return _kernels.pack_sphere(pos, shape.radius)
    if isinstance(shape, Box):
        return _kernels.pack_box(pos, quat_to_matrix(rot_q), shape.half_extents)
    if isinstance(shape, Capsule):
        axis = quat_rotate(rot_q, np.array([0.0, 1.0, 0.0])) * shape.half_height
        return _kernels.pack_capsule(pos - axis, pos + axis, shape.radius)
    if isinstance(shape, Plane):
        return _kernels.pack_plane(shape.normal, shape.offset)
    return None


def _tri_rows(collider, body):
    pos, rot_q = collider.world_pose(body)
    shape = collider.shape
    world_verts = pos + quat_rotate(rot_q, shape.vertices)
    rows = np.empty((shape.triangles.shape[0], 9))
    v0 = world_verts[shape.triangles[:, 0]]
    rows[:, 0:3] = v0
    rows[:, 3:6] = world_verts[shape.triangles[:, 1]] - v0
    rows[:, 6:9] = world_verts[shape.triangles[:, 2]] - v0
    return rows


def _prim_aabb(row):
    """(lo, hi) of one packed primitive row; planes are unbounded."""
    typ = row[0]
    if typ == _kernels.TYPE_SPHERE:
        c, r = row[1:4], row[4]
        return c - r, c + r
    if typ == _kernels.TYPE_BOX:
        ext = np.abs(row[4:13].reshape(3, 3)) @ row[13:16]
        return row[1:4] - ext, row[1:4] + ext
    if typ == _kernels.TYPE_CAPSULE:
        r = row[7]
        return (np.minimum(row[1:4], row[4:7]) - r,
                np.maximum(row[1:4], row[4:7]) + r)
    return (np.full(3, -np.inf), np.full(3, np.inf))


def pack_world_colliders(world, exclude_group=None, exclude_bodies=frozenset(),
                         opaque_only=False, with_aabbs=False):
    """Pack world colliders into kernel arrays.

    Returns (prims, prim_owner, tris, tri_owner, owner_colliders), plus
    (prim_lo, prim_hi) bounds when with_aabbs is set. Owner indices point
    into the returned owner_colliders list. Rows for immobile bodies are
    cached on the world; only moving bodies repack per call.
    """
    from .physics import TriMesh

    key = (exclude_group, frozenset(exclude_bodies), opaque_only)
    cache = world._pack_cache.get(key)
    if cache is None or cache["rev"] != world._revision:
        entries = []
        for collider in world.colliders:
            body = world.bodies[collider.body_id]
            if exclude_group is not None and body.group == exclude_group:
                continue
            if body.body_id in exclude_bodies:
                continue
            if opaque_only and body.transparent:
                continue
            entries.append((collider, body))
        owners = [c for c, _ in entries]
        prim_entries = [(i, c, b) for i, (c, b) in enumerate(entries)
                        if not isinstance(c.shape, TriMesh)]
        mesh_entries = [(i, c, b) for i, (c, b) in enumerate(entries)
                        if isinstance(c.shape, TriMesh)]
        n = len(prim_entries)
        prims = np.zeros((n, _kernels.PRIM_COLS))
        prim_owner = np.empty(n, dtype=np.int32)
        lo = np.empty((n, 3))
        hi = np.empty((n, 3))
        prim_movers = []
        for row, (idx, c, b) in enumerate(prim_entries):
            prims[row] = _prim_row(c, b)
            lo[row], hi[row] = _prim_aabb(prims[row])
            prim_owner[row] = idx
            if b.moves:
                prim_movers.append((row, c, b))
        cache = {
            "rev": world._revision,
            "owners": owners,
            "prims": prims,
            "prim_owner": prim_owner,
            "prim_movers": prim_movers,
            "mesh_entries": mesh_entries,
            "lo": lo,
            "hi": hi,
        }
        world._pack_cache[key] = cache

    prims = cache["prims"]
    lo = cache["lo"]
    hi = cache["hi"]
    if cache["prim_movers"]:
        prims = prims.copy()
        if with_aabbs:
            lo = lo.copy()
            hi = hi.copy()
        for row, c, b in cache["prim_movers"]:
            prims[row] = _prim_row(c, b)
            if with_aabbs:
                lo[row], hi[row] = _prim_aabb(prims[row])

    mesh_entries = cache["mesh_entries"]
    if mesh_entries:
        chunks = []
        owner_chunks = []
        for idx, c, b in mesh_entries:
            rows = _tri_rows(c, b)
            chunks.append(rows)
            owner_chunks.append(np.full(rows.shape[0], idx, dtype=np.int32))
        tris = np.concatenate(chunks)
        tri_owner = np.concatenate(owner_chunks)
    else:
        tris = np.zeros((0, 9))
        tri_owner = np.zeros(0, dtype=np.int32)
    if with_aabbs:
        return prims, cache["prim_owner"], tris, tri_owner, cache["owners"], lo, hi
    return prims, cache["prim_owner"], tris, tri_owner, cache["owners"]
