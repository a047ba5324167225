"""Config-file surfaces: richer skeleton rigs, custom scene files, filters."""
import json

import numpy as np
import pytest

from sensorium.env import Environment
from sensorium.skeleton import Skeleton
from sensorium.vision import VisionConfig


def build_humanlike_rig(n_bones=47, total_dof=82):
    """Synthetic chain rig with the full humanlike bone/DOF counts, built in
    the same JSON schema the shipped skeleton uses."""
    bones = [{"id": "bone0", "parent": None, "offset": [0.0, 0.9, 0.0]}]
    joints = []
    skin = []
    axes_cycle = [[[1, 0, 0]], [[1, 0, 0], [0, 1, 0]], [[1, 0, 0], [0, 1, 0], [0, 0, 1]]]
    dof = 0
    for i in range(1, n_bones):
        bones.append({"id": f"bone{i}", "parent": f"bone{i-1}",
                      "offset": [0.0, 0.03, 0.0]})
        remaining = total_dof - dof - (n_bones - 1 - i)  # leave >= 1 DOF per joint
        take = min(3, max(1, remaining - 2 * (n_bones - 1 - i)))
        axes = axes_cycle[take - 1]
        joints.append({"name": f"j{i}", "parent": f"bone{i-1}", "child": f"bone{i}",
                       "axes": axes, "limits_deg": [[-45, 45]] * take,
                       "max_torque": [5.0] * take})
        dof += take
        skin.append({"bone": f"bone{i}",
                     "vertices": [[0.0, 0.0, 0.01], [0.01, 0.03, 0.01],
                                  [-0.01, 0.03, 0.01]]})
    assert dof == total_dof, f"rig construction yielded {dof} DOF"
    return {"name": "humanlike", "bones": bones, "joints": joints, "skin": skin}


class TestRicherRig:
    def test_47_bone_82_dof_rig_loads(self):
        sk = Skeleton(build_humanlike_rig())
        assert sk.n_bones == 47
        assert sk.total_dof == 82
        assert sk.n_taxels == sk.n_triangles * 6

    def test_rig_runs_forward_kinematics(self):
        from sensorium.geom import Frame
        sk = Skeleton(build_humanlike_rig())
        frames = sk.forward_kinematics(Frame())
        assert len(frames) == 47
        # chain of 46 offsets of 0.03 above the 0.9 root
        assert frames[-1].pos[1] == pytest.approx(0.9 + 46 * 0.03, abs=1e-9)

    def test_rig_round_trips_through_json(self, tmp_path):
        from sensorium.skeleton import load_skeleton
        path = tmp_path / "humanlike.json"
        path.write_text(json.dumps(build_humanlike_rig()))
        sk = load_skeleton(str(path))
        assert (sk.n_bones, sk.total_dof) == (47, 82)


CUSTOM_SCENE = {
    "name": "custom-lab",
    "background": [0.1, 0.1, 0.1],
    "rooms": [{"id": "lab", "center": [0.0, 0.0], "size": [5.0, 3.0, 5.0],
               "wall_color": [0.8, 0.9, 0.8]}],
    "props": [
        {"id": "ball", "shape": "sphere", "size": 0.12, "mass": 0.5,
         "color": [0.9, 0.1, 0.1], "position": [1.0, None, 1.0],
         "interactable": True},
        {"id": "bench", "shape": "box", "size": [0.5, 0.3, 0.2], "mass": 50.0,
         "color": [0.4, 0.3, 0.2], "position": [-1.5, None, 0.0],
         "kinematic": True},
    ],
    "spawn": {"agent": [-1.0, -1.0, 1.0, 1.0], "object": [-2.0, -2.0, 2.0, 2.0]},
    "acoustics": {"room_size": [5.0, 3.0, 5.0], "beta": 0.2, "max_order": 1},
}


class TestCustomScene:
    def test_scene_file_loads_through_env(self, tmp_path):
        path = tmp_path / "lab.json"
        path.write_text(json.dumps(CUSTOM_SCENE))
        env = Environment(task="kick_the_ball", sensors=("proprio",),
                          scene_file=str(path), seed=1)
        env.reset()
        assert "bench" in env.scene.world.bodies
        assert env.scene.name == "custom-lab"
        assert env.scene.room.beta == pytest.approx(0.2)
        env.step(np.zeros(6))

    def test_scene_file_via_builder(self, tmp_path):
        from sensorium.scene import load_playground
        path = tmp_path / "lab.json"
        path.write_text(json.dumps(CUSTOM_SCENE))
        scene = load_playground(str(path))
        assert scene.interactable_ids == ["ball"]


class TestGazeRelease:
    def test_release_toward_point_restores_head_gaze(self, flat_world, register_agent):
        from sensorium.avatar import Agent
        agent = register_agent(flat_world, Agent("a"))
        before = agent.eye_frame("left").rot.copy()
        agent.look_toward_point([2.0, 0.3, 2.0])
        locked = agent.eye_frame("left").rot
        assert not np.allclose(locked, before)
        agent.release_toward_point()
        after = agent.eye_frame("left").rot
        assert np.array_equal(after, before)


def test_mirrored_sphere_plane_contact():
    from sensorium.physics import Collider, Plane, RigidBody, Sphere, detect_contacts
    def scene(x):
        bodies = {
            "ground": RigidBody("ground", kinematic=True),
            "s": RigidBody("s", position=[x, 0.3, 0.2]),
        }
        colliders = [Collider(Plane([0, 1, 0], 0.0), "ground"),
                     Collider(Sphere(0.5), "s")]
        return detect_contacts(bodies, colliders)

    (c,) = scene(0.7)
    (cm,) = scene(-0.7)
    assert cm.point[0] == pytest.approx(-c.point[0], abs=1e-12)
    assert cm.point[1] == pytest.approx(c.point[1], abs=1e-12)
    assert cm.point[2] == pytest.approx(c.point[2], abs=1e-12)
    assert np.array_equal(cm.normal, c.normal)  # plane normal unaffected


def test_grayscale_vision_through_env():
    env = Environment(task="kick_the_ball", sensors=("vision",),
                      vision_config=VisionConfig(grayscale=True, blur_sigma=1.0),
                      seed=2)
    frames = env.reset()
    assert frames[0]["vision"].shape == (2, 1, 84, 84)
    spec_shape = env.observation_spec()["vision"][1]
    assert tuple(spec_shape) == (2, 1, 84, 84)
