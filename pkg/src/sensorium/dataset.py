"""Supervised-dataset generators.

Five kinds, all rendered in the bare single-room playground so exactly one
object appears per sample:

  image_classification   binocular RGB of {doll, ball, pyramid}
  bbox                   tight pixel box (cx, cy, h, w) of the object mask
  distance               camera-to-object distance in meters
  sound_localization     0.2 s stereo clips, label = unit direction to source
  tactile_classification {pyramid, sphere, cube, cylinder} dropped onto the
                         upturned palm; 128 physics steps of hand taxels

Every sample i draws from derive_stream(seed, i), so generation order (or
parallelism by index) can never change the bytes. Tensors go to VTEN files,
labels to a CSV sidecar, and manifest.json records the file list with byte
sizes.

The doll has no canonical geometry; a capsule torso with a sphere head
stands in. The cylinder is approximated by a capsule of matching radius.
Both proxies are noted in the manifest.
"""
from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import tactile, vision
from .audio import AudioConfig, AudioSource, Listener, spatialize
from .avatar import Agent, pack_world_colliders
from .clock import derive_stream
from .errors import EngineError
from .geom import Frame, quat_from_yaw
from .physics import Box, Capsule, Collider, RigidBody, Sphere
from .scene import load_playground, make_pyramid_mesh

VTEN_MAGIC = b"VTEN"
_VTEN_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_VTEN_CODES = {np.dtype("<f4"): 0, np.dtype("u1"): 1}

KINDS = ("image_classification", "bbox", "distance", "sound_localization",
         "tactile_classification")

IMAGE_CLASSES = ("doll", "ball", "pyramid")
TACTILE_CLASSES = ("pyramid", "sphere", "cube", "cylinder")
CLIP_SECONDS = 0.2
TACTILE_STEPS = 128


def write_vten(path, array: np.ndarray):
    arr = np.ascontiguousarray(array)
    if arr.dtype == np.float32:
        code = 0
    elif arr.dtype == np.uint8:
        code = 1
    else:
        raise EngineError(f"VTEN supports f32/u8, not {arr.dtype}")
    with open(path, "wb") as fh:
        fh.write(VTEN_MAGIC)
        fh.write(struct.pack("<BB", code, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_vten(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != VTEN_MAGIC:
            raise EngineError(f"{path}: not a VTEN file")
        code, ndim = struct.unpack("<BB", fh.read(2))
        dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        dtype = _VTEN_DTYPES[code]
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        data = fh.read(count * dtype.itemsize)
    if len(data) != count * dtype.itemsize:
        raise EngineError(f"{path}: payload shorter than header declares")
    return np.frombuffer(data, dtype=dtype).reshape(dims)


@dataclass
class Manifest:
    kind: str
    n: int
    seed: int
    config: dict
    label_schema: list[str]
    files: list[dict]
    notes: str = ""

    def save(self, out_dir):
        doc = {"kind": self.kind, "n": self.n, "seed": self.seed,
               "config": self.config, "label_schema": self.label_schema,
               "files": self.files, "notes": self.notes}
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)


def load_manifest(out_dir) -> dict:
    with open(os.path.join(out_dir, "manifest.json"), encoding="utf-8") as fh:
        return json.load(fh)


def _sample_name(i: int) -> str:
    return f"data_{i:06d}.vten"


def _finish(out_dir, kind, n, seed, config, schema, rows, notes=""):
    files = []
    for i in range(n):
        name = _sample_name(i)
        files.append({"name": name,
                      "bytes": os.path.getsize(os.path.join(out_dir, name))})
    with open(os.path.join(out_dir, "labels.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema)
        writer.writerows(rows)
    manifest = Manifest(kind=kind, n=n, seed=seed, config=config,
                        label_schema=schema, files=files, notes=notes)
    manifest.save(out_dir)
    return manifest


# ---------------------------------------------------------------------------
# vision scenes
# ---------------------------------------------------------------------------

def _vision_scene(object_kind: str, rng, distance=None):
    """Bare room + camera agent + one labeled object; returns render pack."""
    scene = load_playground("SimpleEnv")
    agent = Agent("camera", position=(0.0, 0.0, -1.5))
    scene.world.add_body(agent.root_body, agent.colliders)
    scene.world.agent_groups.add(agent.agent_id)

    dist = float(rng.uniform(1.2, 3.2)) if distance is None else float(distance)
    bearing = float(rng.uniform(-0.35, 0.35))
    yaw = float(rng.uniform(0.0, 2 * np.pi))
    color = rng.uniform(0.2, 1.0, 3)

    head = agent.head_frame().pos
    direction = np.array([np.sin(bearing), 0.0, np.cos(bearing)])
    center = head + direction * dist
    body = RigidBody("object", mass=1.0, kinematic=True, color=color,
                     orientation=quat_from_yaw(yaw))
    if object_kind == "ball":
        r = 0.22
        body.position = np.array([center[0], center[1], center[2]])
        colliders = [Collider(Sphere(r), "object")]
    elif object_kind == "pyramid":
        mesh = make_pyramid_mesh(0.5, 0.55)
        body.position = np.array([center[0], center[1] - 0.27, center[2]])
        colliders = [Collider(mesh, "object")]
    elif object_kind == "doll":
        body.position = np.array([center[0], center[1] - 0.1, center[2]])
        colliders = [
            Collider(Capsule(0.12, 0.14), "object"),
            Collider(Sphere(0.1), "object", offset_pos=np.array([0.0, 0.33, 0.0])),
        ]
    else:
        raise EngineError(f"unknown object kind {object_kind!r}")
    scene.world.add_body(body, colliders)
    return scene, agent, body, dist


def _render_pack(scene, agent):
    prims, po, tris, to, owners = pack_world_colliders(
        scene.world, exclude_group=agent.agent_id, opaque_only=True)
    colors = (np.stack([scene.world.bodies[c.body_id].color for c in owners])
              if owners else np.zeros((0, 3)))
    return (prims, po, tris, to, colors), owners


def _binocular_f32(agent, scene):
    pack, _ = _render_pack(scene, agent)
    left, right = vision.render_binocular(agent, pack, background=scene.background,
                                          light_dir=scene.light_dir)
    return np.stack([left, right]).transpose(0, 3, 1, 2).astype(np.float32)


def gen_image_classification(n: int, seed: int, out_dir: str) -> Manifest:
    if n < 1:
        raise EngineError("n must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i in range(n):
        rng = derive_stream(seed, i)
        label = IMAGE_CLASSES[i % len(IMAGE_CLASSES)]
        scene, agent, _, _ = _vision_scene(label, rng)
        write_vten(os.path.join(out_dir, _sample_name(i)), _binocular_f32(agent, scene))
        rows.append([i, _sample_name(i), label])
    return _finish(out_dir, "image_classification", n, seed,
                   {"resolution": 84, "binocular": True}, ["index", "file", "label"],
                   rows, notes="doll rendered as capsule torso + sphere head proxy")


def _object_mask_bbox(agent, scene, body_id, eye="left"):
    pack, owners = _render_pack(scene, agent)
    cam = vision.eye_camera(agent, eye)
    _, _, ids = vision.render(pack, cam, scene.background, scene.light_dir)
    # composite objects own several collider indices
    indices = [i for i, c in enumerate(owners) if c.body_id == body_id]
    if not indices:
        return None
    mask = np.isin(ids, indices)
    if not mask.any():
        return None
    rows_idx, cols_idx = np.nonzero(mask)
    h = float(rows_idx.max() - rows_idx.min() + 1)
    w = float(cols_idx.max() - cols_idx.min() + 1)
    cx = float(cols_idx.min() + cols_idx.max() + 1) / 2.0
    cy = float(rows_idx.min() + rows_idx.max() + 1) / 2.0
    return cx, cy, h, w


def gen_bbox(n: int, seed: int, out_dir: str, max_retries: int = 64) -> Manifest:
    if n < 1:
        raise EngineError("n must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i in range(n):
        label = IMAGE_CLASSES[i % len(IMAGE_CLASSES)]
        bbox = None
        for attempt in range(max_retries):
            rng = derive_stream(seed, i * max_retries + attempt)
            scene, agent, body, _ = _vision_scene(label, rng)
            bbox = _object_mask_bbox(agent, scene, "object")
            if bbox is not None:
                break
        if bbox is None:
            raise EngineError(f"sample {i}: object off-screen after {max_retries} draws")
        write_vten(os.path.join(out_dir, _sample_name(i)), _binocular_f32(agent, scene))
        cx, cy, h, w = bbox
        rows.append([i, _sample_name(i), label, cx, cy, h, w])
    return _finish(out_dir, "bbox", n, seed, {"resolution": 84, "eye": "left"},
                   ["index", "file", "label", "x", "y", "h", "w"], rows,
                   notes="box is the tight mask box in the left-eye view")


def gen_distance(n: int, seed: int, out_dir: str) -> Manifest:
    if n < 1:
        raise EngineError("n must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i in range(n):
        rng = derive_stream(seed, i)
        label = IMAGE_CLASSES[i % len(IMAGE_CLASSES)]
        scene, agent, body, _ = _vision_scene(label, rng)
        eye_mid = 0.5 * (agent.eye_frame("left").pos + agent.eye_frame("right").pos)
        dist = float(np.linalg.norm(body.position - eye_mid))
        write_vten(os.path.join(out_dir, _sample_name(i)), _binocular_f32(agent, scene))
        rows.append([i, _sample_name(i), label, dist])
    return _finish(out_dir, "distance", n, seed, {"resolution": 84, "unit": "m"},
                   ["index", "file", "label", "distance_m"], rows)


def gen_sound_localization(n: int, seed: int, out_dir: str,
                           mode: str = "stereo") -> Manifest:
    if n < 1:
        raise EngineError("n must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    config = AudioConfig()
    clip_len = int(round(CLIP_SECONDS * config.fs))
    rows = []
    for i in range(n):
        rng = derive_stream(seed, i)
        az = float(rng.uniform(-np.pi, np.pi))
        el = float(rng.uniform(np.radians(-30), np.radians(30)))
        dist = float(rng.uniform(1.0, 3.0))
        head = Frame(np.array([0.0, 1.5, 0.0]))
        local_dir = np.array([np.sin(az) * np.cos(el), np.sin(el),
                              np.cos(az) * np.cos(el)])
        src_pos = head.pos + local_dir * dist
        clip = 0.5 * rng.standard_normal(clip_len)
        source = AudioSource(position=src_pos, clip=clip)
        listener = Listener(frame=head, mode=mode)
        buf = spatialize(source, listener, n=clip_len, config=config)
        write_vten(os.path.join(out_dir, _sample_name(i)), buf.astype(np.float32))
        rows.append([i, _sample_name(i), local_dir[0], local_dir[1], local_dir[2]])
    return _finish(out_dir, "sound_localization", n, seed,
                   {"fs": config.fs, "seconds": CLIP_SECONDS, "mode": mode},
                   ["index", "file", "dir_x", "dir_y", "dir_z"], rows,
                   notes="direction is a unit vector in the head frame "
                         "(x right, y up, z forward)")


# ---------------------------------------------------------------------------
# tactile drops
# ---------------------------------------------------------------------------

def _palms_up(agent: Agent):
    for j in agent.skeleton.joints:
        if j.name in ("elbow_l", "elbow_r"):
            j.angle = np.array([np.pi / 2])
    agent.mark_joints_changed()
    agent.refresh_pose()


def _drop_body(kind: str, position, rng):
    color = rng.uniform(0.2, 1.0, 3)
    body = RigidBody("drop", mass=0.3, position=position, color=color)
    if kind == "sphere":
        return body, [Collider(Sphere(0.035), "drop")]
    if kind == "cube":
        return body, [Collider(Box([0.03, 0.03, 0.03]), "drop")]
    if kind == "cylinder":
        # capsule proxy: taxels respond to the curved face the same way
        return body, [Collider(Capsule(0.028, 0.02), "drop")]
    if kind == "pyramid":
        return body, [Collider(make_pyramid_mesh(0.07, 0.06), "drop")]
    raise EngineError(f"unknown drop shape {kind!r}")


def gen_tactile_classification(n: int, seed: int, out_dir: str) -> Manifest:
    if n < 1:
        raise EngineError("n must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    dt = 0.004
    for i in range(n):
        rng = derive_stream(seed, i)
        label = TACTILE_CLASSES[i % len(TACTILE_CLASSES)]
        scene = load_playground("SimpleEnv")
        agent = Agent("subject", position=(0.0, 0.0, 0.0))
        scene.world.add_body(agent.root_body, agent.colliders)
        for side in ("l", "r"):
            scene.world.add_body(agent.hand_bodies[side])
        for hc in agent.hand_colliders:
            scene.world.add_collider(hc)
        scene.world.agent_groups.add(agent.agent_id)
        _palms_up(agent)

        palm = agent.hand_bodies["l"].position
        jitter = rng.uniform(-0.012, 0.012, 2)
        drop_h = float(rng.uniform(0.10, 0.16))
        start = np.array([palm[0] + jitter[0], palm[1] + drop_h, palm[2] + jitter[1]])
        body, colliders = _drop_body(label, start, rng)
        scene.world.add_body(body, colliders)

        hand_idx = tactile.hand_taxel_indices(agent, "l")
        trace = np.empty((TACTILE_STEPS, hand_idx.shape[0]), dtype=np.float32)
        for step in range(TACTILE_STEPS):
            scene.world.step(dt)
            reading = tactile.sense(agent, scene.world)
            trace[step] = reading[hand_idx]
        write_vten(os.path.join(out_dir, _sample_name(i)), trace)
        rows.append([i, _sample_name(i), label])
    return _finish(out_dir, "tactile_classification", n, seed,
                   {"steps": TACTILE_STEPS, "dt": dt, "hand": "left"},
                   ["index", "file", "label"], rows,
                   notes="cylinder approximated by a capsule collider")


GENERATORS = {
    "image_classification": gen_image_classification,
    "bbox": gen_bbox,
    "distance": gen_distance,
    "sound_localization": gen_sound_localization,
    "tactile_classification": gen_tactile_classification,
}


def generate(kind: str, n: int, seed: int, out_dir: str, audio_mode: str = "stereo"):
    if kind not in GENERATORS:
        raise EngineError(f"unknown dataset kind {kind!r} (have {', '.join(KINDS)})")
    if kind == "sound_localization":
        return gen_sound_localization(n, seed, out_dir, mode=audio_mode)
    return GENERATORS[kind](n, seed, out_dir)


def validate_manifest(out_dir) -> bool:
    """Every listed file exists, has the declared size, and parses as VTEN."""
    doc = load_manifest(out_dir)
    for entry in doc["files"]:
        path = os.path.join(out_dir, entry["name"])
        if not os.path.isfile(path):
            raise EngineError(f"manifest lists missing file {entry['name']}")
        if os.path.getsize(path) != entry["bytes"]:
            raise EngineError(f"{entry['name']}: size differs from manifest")
        read_vten(path)
    return True
