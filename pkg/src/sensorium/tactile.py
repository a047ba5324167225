"""Spring-skin tactile sensing.

Each skin triangle carries six taxels. A taxel measures how far intruding
geometry has pressed past its rest surface along the inward normal, and
reports the normalized reading T(d) = min(1, d / d_max). A collision that
reaches the rigid bone (depth beyond the skin) saturates at the maximum
reading. Readings are displacement-based, so they do not change when the
physics timestep changes - the property that motivates this sensor model
over impulse/dt force estimates.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .avatar import pack_world_colliders


def update_taxels(agent):
    """Posed world positions and outward normals for every taxel."""
    return agent.taxel_world()


def sense_depths(positions, normals, prims, tris) -> np.ndarray:
    """Raw compression depth per taxel against packed colliders."""
    if prims.shape[0] == 0 and tris.shape[0] == 0:
        return np.zeros(positions.shape[0])
    return _kernels.line_depth(positions, normals, prims, tris)


def _prune_tris(positions, tris):
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    v0 = tris[:, 0:3]
    v1 = v0 + tris[:, 3:6]
    v2 = v0 + tris[:, 6:9]
    tlo = np.minimum(np.minimum(v0, v1), v2)
    thi = np.maximum(np.maximum(v0, v1), v2)
    keep = ((thi >= lo).all(axis=1)) & ((tlo <= hi).all(axis=1))
    return tris[keep]


def sense(agent, world) -> np.ndarray:
    """Tactile reading per taxel, in [0, 1], fixed taxel order.

    Colliders of the sensing agent itself are excluded (skin does not feel
    its own bones). Shapes whose bounds miss the taxel cloud are skipped: a
    positive reading needs the taxel point inside the shape, so they cannot
    contribute. Planes are unbounded and always tested."""
    positions, normals = update_taxels(agent)
    prims, _, tris, _, _, lo, hi = pack_world_colliders(
        world, exclude_group=agent.agent_id, with_aabbs=True)
    cloud_lo = positions.min(axis=0)
    cloud_hi = positions.max(axis=0)
    keep = ((hi >= cloud_lo) & (lo <= cloud_hi)).all(axis=1)
    prims = prims[keep] if not keep.all() else prims
    if tris.shape[0]:
        tris = _prune_tris(positions, tris)
    depths = sense_depths(positions, normals, prims, tris)
    return readings_from_depths(depths, agent.skeleton.taxel_d_max)


def readings_from_depths(depths: np.ndarray, d_max) -> np.ndarray:
    return np.minimum(1.0, depths / d_max)


def tactile_by_bone(agent, reading: np.ndarray, bone_id: str) -> np.ndarray:
    """Readings of the taxels assigned to one bone (nearest-bone rule)."""
    idx = agent.skeleton.taxels_of_bone(bone_id)
    return reading[idx]


def hand_taxel_indices(agent, side: str = "l") -> np.ndarray:
    """Taxels of the hand and finger bones on one side, in fixed order."""
    sk = agent.skeleton
    idx = np.concatenate([sk.taxels_of_bone(f"hand_{side}"),
                          sk.taxels_of_bone(f"fingers_{side}")])
    return np.sort(idx)
