"""Scene construction: playground files, rooms with door gaps, props.

Playgrounds are JSON data, not code. A scene file lists rooms (size, wall
color, optional doors and which walls to build), props (shape, size, mass,
color, transparency, position), named rectangular spawn regions, and the
shoebox acoustics of the space. Three playgrounds ship, ordered by
complexity: SimpleEnv (one bare white room), SingleRoomEnv (same room with
furniture props), HouseEnv (three rooms joined to a center room by doors).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .audio import AudioSource, RoomAcoustics
from .errors import NotFoundError
from .physics import Box, Capsule, Collider, Plane, PhysicsWorld, RigidBody, Sphere, TriMesh

PLAYGROUNDS = ("SimpleEnv", "SingleRoomEnv", "HouseEnv")
WALL_THICKNESS = 0.1


@dataclass
class Scene:
    name: str
    world: PhysicsWorld
    background: np.ndarray
    room: RoomAcoustics | None
    room_origin: np.ndarray | None
    spawn_regions: dict[str, np.ndarray]       # name -> (x0, z0, x1, z1)
    rooms: list[dict]                          # room metadata for task logic
    interactable_ids: list[str] = field(default_factory=list)
    sources: list[AudioSource] = field(default_factory=list)
    light_dir: np.ndarray = field(
        default_factory=lambda: np.array([0.0, -1.0, 0.35]) / np.linalg.norm([0.0, -1.0, 0.35]))

    def room_of_point(self, point) -> str | None:
        p = np.asarray(point, dtype=float)
        for room in self.rooms:
            cx, cz = room["center"]
            hx, hz = room["size"][0] / 2.0, room["size"][2] / 2.0
            if abs(p[0] - cx) <= hx and abs(p[2] - cz) <= hz:
                return room["id"]
        return None


def load_playground_spec(name: str) -> dict:
    """Raw spec dict of a shipped playground (or a JSON file path)."""
    if name.endswith(".json"):
        with open(name, encoding="utf-8") as fh:
            return json.load(fh)
    ref = resources.files("sensorium").joinpath(f"data/playgrounds/{_file_of(name)}")
    if not ref.is_file():
        raise NotFoundError(f"unknown playground {name!r} (have {', '.join(PLAYGROUNDS)})")
    return json.loads(ref.read_text(encoding="utf-8"))


def _file_of(name: str) -> str:
    table = {"SimpleEnv": "simple_env.json", "SingleRoomEnv": "single_room_env.json",
             "HouseEnv": "house_env.json"}
    if name not in table:
        raise NotFoundError(f"unknown playground {name!r} (have {', '.join(PLAYGROUNDS)})")
    return table[name]


def load_playground(name: str) -> Scene:
    return build_scene(load_playground_spec(name))


def prop_count(scene: Scene) -> int:
    return len(scene.interactable_ids) + sum(
        1 for b in scene.world.bodies.values()
        if not b.structural and b.group is None and b.body_id not in scene.interactable_ids)


def build_scene(spec: dict) -> Scene:
    """Fresh world from a playground spec; never mutates the spec."""
    world = PhysicsWorld()
    ground = RigidBody(body_id="ground", mass=1e6, kinematic=True, structural=True,
                       color=np.asarray(spec.get("floor_color", [0.45, 0.42, 0.38]), float))
    world.add_body(ground, [Collider(Plane([0.0, 1.0, 0.0], 0.0), "ground")])

    rooms = []
    for room_spec in spec.get("rooms", []):
        rooms.append({
            "id": room_spec["id"],
            "center": list(room_spec["center"]),
            "size": list(room_spec["size"]),
        })
        _build_room_walls(world, room_spec)

    interactable = []
    for prop in spec.get("props", []):
        body_id = _add_prop(world, prop)
        if prop.get("interactable", False):
            interactable.append(body_id)

    acoustics = spec.get("acoustics")
    room = None
    room_origin = None
    if acoustics is not None:
        room = RoomAcoustics(room_size=np.asarray(acoustics["room_size"], float),
                             beta=float(acoustics.get("beta", 0.0)),
                             max_order=int(acoustics.get("max_order", 0)))
        room_origin = np.array([-room.room_size[0] / 2.0, 0.0, -room.room_size[2] / 2.0])

    spawn = {k: np.asarray(v, dtype=float) for k, v in spec.get("spawn", {}).items()}
    return Scene(
        name=spec.get("name", "custom"),
        world=world,
        background=np.asarray(spec.get("background", [0.0, 0.0, 0.0]), float),
        room=room,
        room_origin=room_origin,
        spawn_regions=spawn,
        rooms=rooms,
        interactable_ids=interactable,
    )


def _build_room_walls(world: PhysicsWorld, room_spec: dict):
    cx, cz = room_spec["center"]
    sx, sy, sz = room_spec["size"]
    color = np.asarray(room_spec.get("wall_color", [1.0, 1.0, 1.0]), float)
    build = room_spec.get("build_walls", ["n", "s", "e", "w"])
    doors = {d["wall"]: d for d in room_spec.get("doors", [])}
    rid = room_spec["id"]

    # wall frames: n at +z, s at -z, e at +x, w at -x; "along" runs left-to-right
    # when facing the wall from inside
    walls = {
        "n": (np.array([cx, 0.0, cz + sz / 2.0]), np.array([1.0, 0.0, 0.0]), sx),
        "s": (np.array([cx, 0.0, cz - sz / 2.0]), np.array([1.0, 0.0, 0.0]), sx),
        "e": (np.array([cx + sx / 2.0, 0.0, cz]), np.array([0.0, 0.0, 1.0]), sz),
        "w": (np.array([cx - sx / 2.0, 0.0, cz]), np.array([0.0, 0.0, 1.0]), sz),
    }
    for wall_id in build:
        center, along, length = walls[wall_id]
        door = doors.get(wall_id)
        segments = []
        if door is None:
            segments.append((0.0, length))
        else:
            off = float(door.get("offset", 0.0))        # door center along the wall
            w = float(door["width"])
            lo = off - w / 2.0 + length / 2.0           # gap span in [0, length]
            hi = off + w / 2.0 + length / 2.0
            if lo > 1e-6:
                segments.append((lo / 2.0 - length / 2.0, lo))
            if length - hi > 1e-6:
                segments.append((hi + (length - hi) / 2.0 - length / 2.0, length - hi))
            door_h = float(door.get("height", 2.0))
            if sy - door_h > 1e-6:
                _add_wall_box(world, f"wall/{rid}/{wall_id}/lintel", center, along,
                              offset=off, seg_len=w, y0=door_h, y1=sy, color=color)
        for i, (offset, seg_len) in enumerate(segments):
            _add_wall_box(world, f"wall/{rid}/{wall_id}/{i}", center, along,
                          offset=offset, seg_len=seg_len, y0=0.0, y1=sy, color=color)


def _add_wall_box(world, body_id, wall_center, along, offset, seg_len, y0, y1, color):
    normal = np.cross(np.array([0.0, 1.0, 0.0]), along)
    pos = wall_center + along * offset + np.array([0.0, (y0 + y1) / 2.0, 0.0])
    half = (np.abs(along) * seg_len / 2.0 + np.abs(normal) * WALL_THICKNESS / 2.0
            + np.array([0.0, (y1 - y0) / 2.0, 0.0]))
    body = RigidBody(body_id=body_id, mass=1e5, position=pos, kinematic=True,
                     structural=True, color=color)
    world.add_body(body, [Collider(Box(half), body_id)])


def make_pyramid_mesh(base: float, height: float) -> TriMesh:
    """Closed square pyramid, apex up, origin at the base center."""
    b = base / 2.0
    verts = np.array([
        [-b, 0.0, -b], [b, 0.0, -b], [b, 0.0, b], [-b, 0.0, b],   # base
        [0.0, height, 0.0],                                        # apex
    ])
    tris = np.array([
        [0, 1, 2], [0, 2, 3],              # base, outward normal down
        [0, 4, 1], [1, 4, 2], [2, 4, 3], [3, 4, 0],
    ])
    return TriMesh(verts, tris)


def _prop_shape(prop: dict):
    kind = prop["shape"]
    size = prop.get("size")
    if kind == "sphere":
        return Sphere(float(size)), float(size)
    if kind == "box":
        half = np.asarray(size, dtype=float)
        return Box(half), float(half[1])
    if kind == "capsule":
        r, hh = float(size[0]), float(size[1])
        return Capsule(r, hh), hh + r
    if kind == "pyramid":
        base, height = float(size[0]), float(size[1])
        return make_pyramid_mesh(base, height), 0.0
    raise NotFoundError(f"unknown prop shape {kind!r}")


def _add_prop(world: PhysicsWorld, prop: dict) -> str:
    shape, rest_height = _prop_shape(prop)
    pos = prop.get("position", [0.0, None, 0.0])
    y = pos[1] if pos[1] is not None else rest_height
    body = RigidBody(
        body_id=prop["id"],
        mass=float(prop.get("mass", 1.0)),
        position=np.array([float(pos[0]), float(y), float(pos[2])]),
        kinematic=bool(prop.get("kinematic", False)),
        transparent=bool(prop.get("transparent", False)),
        color=np.asarray(prop.get("color", [0.7, 0.7, 0.7]), float),
    )
    world.add_body(body, [Collider(shape, body.body_id)])
    return body.body_id


def add_prop(scene: Scene, prop: dict, interactable=False) -> str:
    body_id = _add_prop(scene.world, prop)
    if interactable:
        scene.interactable_ids.append(body_id)
    return body_id
