import csv
import filecmp
import os

import numpy as np
import pytest

from sensorium import dataset
from sensorium.errors import EngineError


def read_labels(out_dir):
    with open(os.path.join(out_dir, "labels.csv"), encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestVten:
    def test_round_trip_f32(self, tmp_path):
        arr = np.random.default_rng(0).random((3, 4, 5)).astype(np.float32)
        path = tmp_path / "t.vten"
        dataset.write_vten(path, arr)
        out = dataset.read_vten(path)
        assert np.array_equal(out, arr)
        assert out.dtype == np.float32

    def test_round_trip_u8(self, tmp_path):
        arr = (np.arange(12, dtype=np.uint8)).reshape(3, 4)
        path = tmp_path / "t.vten"
        dataset.write_vten(path, arr)
        assert np.array_equal(dataset.read_vten(path), arr)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.vten"
        path.write_bytes(b"WHAT\x00\x01" + b"\x00" * 8)
        with pytest.raises(EngineError):
            dataset.read_vten(path)

    def test_truncated_payload_rejected(self, tmp_path):
        arr = np.zeros(10, dtype=np.float32)
        path = tmp_path / "t.vten"
        dataset.write_vten(path, arr)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(EngineError):
            dataset.read_vten(path)


def _dirs_equal(a, b, names):
    for name in names:
        if not filecmp.cmp(os.path.join(a, name), os.path.join(b, name),
                           shallow=False):
            return False
    return True


class TestImageClassification:
    def test_contract_and_balance(self, tmp_path):
        out = str(tmp_path / "imgs")
        manifest = dataset.gen_image_classification(9, seed=4, out_dir=out)
        assert manifest.n == 9
        dataset.validate_manifest(out)
        header, rows = read_labels(out)
        labels = [r[2] for r in rows]
        assert set(labels) <= set(dataset.IMAGE_CLASSES)
        for cls in dataset.IMAGE_CLASSES:
            assert labels.count(cls) == 3  # round-robin
        sample = dataset.read_vten(os.path.join(out, rows[0][1]))
        assert sample.shape == (2, 3, 84, 84)
        assert sample.min() >= 0.0 and sample.max() <= 1.0

    def test_deterministic_bytes(self, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        dataset.gen_image_classification(6, seed=11, out_dir=a)
        dataset.gen_image_classification(6, seed=11, out_dir=b)
        assert _dirs_equal(a, b, [f"data_{i:06d}.vten" for i in range(6)]
                           + ["labels.csv"])

    def test_different_seed_different_bytes(self, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        dataset.gen_image_classification(3, seed=1, out_dir=a)
        dataset.gen_image_classification(3, seed=2, out_dir=b)
        assert not _dirs_equal(a, b, ["data_000000.vten"])


class TestBbox:
    def test_boxes_within_bounds(self, tmp_path):
        out = str(tmp_path / "bbox")
        dataset.gen_bbox(6, seed=3, out_dir=out)
        dataset.validate_manifest(out)
        header, rows = read_labels(out)
        assert header[3:] == ["x", "y", "h", "w"]
        for row in rows:
            x, y, h, w = map(float, row[3:])
            assert 0.0 <= x <= 84.0 and 0.0 <= y <= 84.0
            assert 0.0 < h <= 84.0 and 0.0 < w <= 84.0

    def test_centered_sphere_box_centered(self, tmp_path):
        # direct check of the mask-box oracle on an axis-centered sphere
        from sensorium.avatar import Agent
        from sensorium.dataset import _object_mask_bbox
        from sensorium.physics import Collider, PhysicsWorld, RigidBody, Sphere
        world = PhysicsWorld()
        agent = Agent("cam")
        world.add_body(agent.root_body, agent.colliders)
        world.agent_groups.add("cam")
        eye = agent.eye_frame("left")
        center = eye.pos + eye.forward() * 2.0
        body = RigidBody("object", mass=1.0, kinematic=True, position=center,
                         color=np.array([1.0, 0.2, 0.2]))
        world.add_body(body, [Collider(Sphere(0.2), "object")])

        class FakeScene:
            background = np.zeros(3)
            light_dir = np.array([0.0, -1.0, 0.35]) / np.linalg.norm([0, -1, 0.35])
        FakeScene.world = world
        cx, cy, h, w = _object_mask_bbox(agent, FakeScene, "object")
        assert abs(cx - 42.0) <= 1.0
        assert abs(cy - 42.0) <= 1.0

    def test_doubling_distance_roughly_halves_box(self, tmp_path):
        from sensorium.avatar import Agent
        from sensorium.dataset import _object_mask_bbox
        from sensorium.physics import Collider, PhysicsWorld, RigidBody, Sphere

        def box_at(dist):
            world = PhysicsWorld()
            agent = Agent("cam")
            world.add_body(agent.root_body, agent.colliders)
            world.agent_groups.add("cam")
            eye = agent.eye_frame("left")
            center = eye.pos + eye.forward() * dist
            body = RigidBody("object", mass=1.0, kinematic=True, position=center,
                             color=np.array([1.0, 0.2, 0.2]))
            world.add_body(body, [Collider(Sphere(0.2), "object")])

            class FakeScene:
                background = np.zeros(3)
                light_dir = np.array([0.0, -1.0, 0.35]) / np.linalg.norm([0, -1, 0.35])
            FakeScene.world = world
            return _object_mask_bbox(agent, FakeScene, "object")

        _, _, h1, w1 = box_at(1.5)
        _, _, h2, w2 = box_at(3.0)
        assert h2 == pytest.approx(h1 / 2.0, rel=0.15)
        assert w2 == pytest.approx(w1 / 2.0, rel=0.15)


class TestDistance:
    def test_labels_exact_positive(self, tmp_path):
        out = str(tmp_path / "dist")
        dataset.gen_distance(6, seed=5, out_dir=out)
        dataset.validate_manifest(out)
        _, rows = read_labels(out)
        for row in rows:
            assert float(row[3]) > 0.0


class TestSoundLocalization:
    def test_clip_shape_and_unit_labels(self, tmp_path):
        out = str(tmp_path / "snd")
        dataset.gen_sound_localization(8, seed=6, out_dir=out, mode="stereo")
        dataset.validate_manifest(out)
        _, rows = read_labels(out)
        for row in rows:
            d = np.array([float(row[2]), float(row[3]), float(row[4])])
            assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-6)
        clip = dataset.read_vten(os.path.join(out, rows[0][1]))
        assert clip.shape == (2, 4410)

    def test_mono_mode_channels_identical(self, tmp_path):
        out = str(tmp_path / "sndmono")
        dataset.gen_sound_localization(3, seed=6, out_dir=out, mode="mono")
        clip = dataset.read_vten(os.path.join(out, "data_000000.vten"))
        assert np.array_equal(clip[0], clip[1])

    def test_hard_left_source_left_leads(self, tmp_path):
        out = str(tmp_path / "sndlr")
        dataset.gen_sound_localization(40, seed=7, out_dir=out, mode="stereo")
        _, rows = read_labels(out)
        checked = 0
        for row in rows:
            x = float(row[2])
            if x < -0.8:   # source well to the left
                clip = dataset.read_vten(os.path.join(out, row[1]))
                n = clip.shape[1]
                corr = np.correlate(clip[0], clip[1], mode="full")
                lag = int(np.argmax(corr)) - (n - 1)
                assert lag < 0  # left channel leads
                checked += 1
        assert checked >= 2


class TestTactileClassification:
    def test_contract(self, tmp_path):
        out = str(tmp_path / "tac")
        dataset.gen_tactile_classification(8, seed=8, out_dir=out)
        dataset.validate_manifest(out)
        _, rows = read_labels(out)
        labels = [r[2] for r in rows]
        assert set(labels) <= set(dataset.TACTILE_CLASSES)
        trace = dataset.read_vten(os.path.join(out, rows[0][1]))
        assert trace.shape[0] == 128
        assert trace.min() >= 0.0 and trace.max() <= 1.0

    def test_contact_recorded(self, tmp_path):
        out = str(tmp_path / "tac2")
        dataset.gen_tactile_classification(4, seed=8, out_dir=out)
        _, rows = read_labels(out)
        touched = 0
        for row in rows:
            trace = dataset.read_vten(os.path.join(out, row[1]))
            if trace.max() > 0:
                touched += 1
        assert touched >= 3  # drops land on the palm

    def test_sphere_cube_signatures_differ(self, tmp_path):
        out = str(tmp_path / "tac3")
        dataset.gen_tactile_classification(8, seed=9, out_dir=out)
        _, rows = read_labels(out)
        means = {}
        for row in rows:
            trace = dataset.read_vten(os.path.join(out, row[1]))
            means.setdefault(row[2], []).append(trace.mean(axis=0))
        sphere = np.mean(means["sphere"], axis=0)
        cube = np.mean(means["cube"], axis=0)
        assert np.linalg.norm(sphere - cube) > 0.0


def test_generate_rejects_unknown_kind(tmp_path):
    with pytest.raises(EngineError):
        dataset.generate("dreams", 3, 0, str(tmp_path))


def test_manifest_detects_tampering(tmp_path):
    out = str(tmp_path / "x")
    dataset.gen_distance(3, seed=1, out_dir=out)
    target = os.path.join(out, "data_000001.vten")
    with open(target, "ab") as fh:
        fh.write(b"\x00")
    with pytest.raises(EngineError):
        dataset.validate_manifest(out)
