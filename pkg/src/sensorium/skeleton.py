"""Humanoid skeleton: bone tree, DOF-limited joints, skin mesh and taxels.

Skeletons are data, loaded from a JSON config listing bones (parent, offset,
rest rotation), joints (axes, limits in degrees, max torque) and skin
triangles bound to bones. Angles are degrees in files and radians in memory.
The shipped default is "simple18" (18 bones, 34 DOF); richer rigs load
through the same format.

Each skin triangle carries six taxels: the three edge midpoints and the
three points at (2/3, 1/6, 1/6) cyclic. Taxel world positions and normals
follow the posed triangle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import NotFoundError
from .geom import Frame, quat_from_axis_angle, quat_mul, quat_to_matrix
from .physics import Joint

TAXELS_PER_TRIANGLE = 6
TAXEL_BARY = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [2 / 3, 1 / 6, 1 / 6],
    [1 / 6, 2 / 3, 1 / 6],
    [1 / 6, 1 / 6, 2 / 3],
])

DEFAULT_SKIN_DEPTH = 0.01  # m; d_max of every taxel


@dataclass
class Bone:
    bone_id: str
    parent: str | None
    offset: np.ndarray      # position in parent frame
    rest_rot: np.ndarray    # quaternion in parent frame


def _euler_deg_to_quat(deg_xyz):
    q = np.array([1.0, 0.0, 0.0, 0.0])
    for axis, ang in zip(np.eye(3), deg_xyz):
        q = quat_mul(q, quat_from_axis_angle(axis, np.radians(ang)))
    return q


class Skeleton:
    def __init__(self, config: dict):
        self.name = config.get("name", "unnamed")
        self.bones: list[Bone] = []
        self.bone_index: dict[str, int] = {}
        for spec in config["bones"]:
            parent = spec.get("parent")
            if parent is not None and parent not in self.bone_index:
                raise ValueError(f"bone {spec['id']!r} listed before its parent {parent!r}")
            bone = Bone(
                bone_id=spec["id"],
                parent=parent,
                offset=np.asarray(spec.get("offset", [0, 0, 0]), dtype=float),
                rest_rot=_euler_deg_to_quat(spec.get("rotation_deg", [0, 0, 0])),
            )
            self.bone_index[bone.bone_id] = len(self.bones)
            self.bones.append(bone)
        roots = [b for b in self.bones if b.parent is None]
        if len(roots) != 1:
            raise ValueError("skeleton must have exactly one root bone")

        self.joints: list[Joint] = []
        self.joint_of_bone: dict[str, Joint] = {}
        for spec in config.get("joints", []):
            joint = Joint(
                name=spec["name"],
                parent_bone=spec["parent"],
                child_bone=spec["child"],
                axes=np.asarray(spec["axes"], dtype=float),
                limits=np.radians(np.asarray(spec["limits_deg"], dtype=float)),
                max_torque=np.asarray(spec["max_torque"], dtype=float),
            )
            if joint.child_bone not in self.bone_index:
                raise ValueError(f"joint {joint.name!r} references unknown bone")
            self.joints.append(joint)
            self.joint_of_bone[joint.child_bone] = joint

        # skin triangles in bone-local coordinates
        tri_bone = []
        tri_local = []
        for tri in config.get("skin", []):
            tri_bone.append(self.bone_index[tri["bone"]])
            tri_local.append(np.asarray(tri["vertices"], dtype=float))
        self.tri_bone = np.asarray(tri_bone, dtype=np.int64).reshape(-1)
        self.tri_local = (np.asarray(tri_local, dtype=float).reshape(-1, 3, 3)
                          if tri_local else np.zeros((0, 3, 3)))
        self._build_taxels()

    # -- structure ---------------------------------------------------------

    @property
    def n_bones(self) -> int:
        return len(self.bones)

    @property
    def total_dof(self) -> int:
        return sum(j.dof for j in self.joints)

    @property
    def n_triangles(self) -> int:
        return self.tri_local.shape[0]

    @property
    def n_taxels(self) -> int:
        return self.taxel_local.shape[0]

    def _build_taxels(self):
        """Bake taxel-local positions/normals and the nearest-bone grouping."""
        t = self.n_triangles
        if t == 0:
            self.taxel_local = np.zeros((0, 3))
            self.taxel_bone_tri = np.zeros(0, dtype=np.int64)
            self.taxel_normal_local = np.zeros((0, 3))
            self.taxel_group_bone = np.zeros(0, dtype=np.int64)
            self.taxel_d_max = np.zeros(0)
            return
        # (t, 6, 3): barycentric combinations of the local triangle vertices
        pos = np.einsum("kb,tbj->tkj", TAXEL_BARY, self.tri_local)
        e1 = self.tri_local[:, 1] - self.tri_local[:, 0]
        e2 = self.tri_local[:, 2] - self.tri_local[:, 0]
        nrm = np.cross(e1, e2)
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        self.taxel_local = pos.reshape(-1, 3)
        self.taxel_normal_local = np.repeat(nrm, TAXELS_PER_TRIANGLE, axis=0)
        self.taxel_bone_tri = np.repeat(self.tri_bone, TAXELS_PER_TRIANGLE)
        self.taxel_d_max = np.full(self.n_taxels, DEFAULT_SKIN_DEPTH)

        # nearest-bone assignment, computed once at the rest pose
        frames = self.forward_kinematics(Frame())
        world = self.pose_points(frames, self.taxel_local, self.taxel_bone_tri)
        starts = np.array([frames[i].pos for i in range(self.n_bones)])
        ends = np.array([
            frames[i].transform_point([0.0, self._bone_reach(i), 0.0])
            for i in range(self.n_bones)
        ])
        d2 = np.empty((self.n_taxels, self.n_bones))
        for i in range(self.n_bones):
            d2[:, i] = _point_segment_dist2(world, starts[i], ends[i])
        self.taxel_group_bone = d2.argmin(axis=1)

    def _bone_reach(self, index: int) -> float:
        """Heuristic bone segment length: offset of the first child, else 0.1."""
        me = self.bones[index].bone_id
        for b in self.bones:
            if b.parent == me:
                return float(np.linalg.norm(b.offset))
        return 0.1

    # -- kinematics --------------------------------------------------------

    def forward_kinematics(self, root_frame: Frame) -> list[Frame]:
        """World frame per bone; deterministic function of root + joint angles."""
        frames: list[Frame] = [None] * self.n_bones
        for i, bone in enumerate(self.bones):
            rot = bone.rest_rot
            joint = self.joint_of_bone.get(bone.bone_id)
            if joint is not None:
                q = np.array([1.0, 0.0, 0.0, 0.0])
                for axis, ang in zip(joint.axes, joint.angle):
                    if ang != 0.0:
                        q = quat_mul(q, quat_from_axis_angle(axis, ang))
                rot = quat_mul(rot, q)
            local = Frame(bone.offset, rot)
            if bone.parent is None:
                frames[i] = root_frame.compose(local)
            else:
                frames[i] = frames[self.bone_index[bone.parent]].compose(local)
        return frames

    def pose_points(self, frames: list[Frame], local_points, bone_of_point) -> np.ndarray:
        """Transform bone-local points into the world given posed frames."""
        mats = np.stack([quat_to_matrix(f.rot) for f in frames])
        pos = np.stack([f.pos for f in frames])
        m = mats[bone_of_point]
        return np.einsum("nij,nj->ni", m, local_points) + pos[bone_of_point]

    def pose_dirs(self, frames: list[Frame], local_dirs, bone_of_point) -> np.ndarray:
        mats = np.stack([quat_to_matrix(f.rot) for f in frames])
        m = mats[bone_of_point]
        return np.einsum("nij,nj->ni", m, local_dirs)

    def taxels_of_bone(self, bone_id: str) -> np.ndarray:
        """Indices of taxels assigned to a bone by the nearest-bone rule."""
        if bone_id not in self.bone_index:
            raise NotFoundError(f"unknown bone {bone_id!r}")
        return np.flatnonzero(self.taxel_group_bone == self.bone_index[bone_id])

    def set_angles(self, angles):
        angles = np.asarray(angles, dtype=float).reshape(-1)
        base = 0
        for j in self.joints:
            j.angle = np.clip(angles[base:base + j.dof], j.limits[:, 0], j.limits[:, 1])
            base += j.dof

    def get_angles(self) -> np.ndarray:
        return np.concatenate([j.angle for j in self.joints]) if self.joints else np.zeros(0)

    def get_velocities(self) -> np.ndarray:
        return (np.concatenate([j.angular_velocity for j in self.joints])
                if self.joints else np.zeros(0))


def _point_segment_dist2(points, a, b):
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-12:
        d = points - a
        return np.einsum("ij,ij->i", d, d)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    d = points - closest
    return np.einsum("ij,ij->i", d, d)


def load_skeleton(name_or_path: str = "simple18") -> Skeleton:
    """Load a skeleton config by shipped name or by file path."""
    if name_or_path.endswith(".json"):
        with open(name_or_path, encoding="utf-8") as fh:
            return Skeleton(json.load(fh))
    ref = resources.files("sensorium").joinpath(f"data/skeletons/{name_or_path}.json")
    if not ref.is_file():
        raise NotFoundError(f"unknown skeleton {name_or_path!r}")
    return Skeleton(json.loads(ref.read_text(encoding="utf-8")))
