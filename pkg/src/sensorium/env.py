"""Environment manager: the step loop, observation packing, reset.

One control step (0.02 s) spans K fixed physics substeps (default 5 x
0.004 s). Actions from all agents are applied against the pre-step snapshot
(simultaneous semantics), then physics runs, taxels update, one audio frame
(441 samples) renders per listener, vision renders if enabled, and the task
scores the transition. Everything is deterministic in (seed, actions).
"""
from __future__ import annotations

import numpy as np

from . import tactile, tasks as tasks_mod, vision
from .audio import AudioConfig, AudioSource, Listener, fft_magnitude, load_hrtf, mix_frame
from .avatar import (A_GRAB, A_KICK, A_RELEASE, A_SOUND, A_TURN, A_WALK,
                     PRIMITIVE_ACTION_DIM, Agent, pack_world_colliders)
from .clock import DEFAULT_DT_PHYSICS, DEFAULT_SUBSTEPS, STREAM_TASK, SimClock, derive_stream
from .errors import EpisodeFinishedError, InvalidActionError
from .scene import build_scene, load_playground_spec

SENSOR_KEYS = ("vision", "audio", "tactile", "proprio")


class ObservationFrame:
    """Ordered map of key -> tensor (float32 or uint8, fixed shapes)."""

    def __init__(self):
        self._data: dict[str, np.ndarray] = {}

    def set(self, key: str, value: np.ndarray):
        if key in self._data:
            raise KeyError(f"duplicate observation key {key!r}")
        if value.dtype not in (np.float32, np.uint8):
            raise TypeError(f"observation {key!r} must be float32 or uint8")
        self._data[key] = value

    def __getitem__(self, key: str) -> np.ndarray:
        return self._data[key]

    def __contains__(self, key) -> bool:
        return key in self._data

    def keys(self):
        return self._data.keys()

    def items(self):
        return self._data.items()

    def equals(self, other: "ObservationFrame") -> bool:
        if list(self.keys()) != list(other.keys()):
            return False
        return all(np.array_equal(self._data[k], other._data[k]) for k in self._data)


class EpisodeState:
    def __init__(self, n_agents: int):
        self.step = 0
        self.cumulative_reward = [0.0] * n_agents
        self.done = False
        self.events: list[tuple] = []      # (kind, agent_index, object_id)

    def log(self, kind: str, agent_index: int, object_id: str):
        self.events.append((kind, agent_index, object_id))


class Environment:
    def __init__(self, task: str = "kick_the_ball", playground: str | None = None,
                 n_agents: int | None = None,
                 sensors=("vision", "audio", "tactile", "proprio"),
                 audio_mode: str = "stereo", hrtf_path: str | None = None,
                 audio_fft: bool = False, seed: int = 0,
                 dt_physics: float = DEFAULT_DT_PHYSICS, substeps: int = DEFAULT_SUBSTEPS,
                 interact_distance: float | None = None, helper_rewards: bool = True,
                 max_steps: int | None = None, scene_file: str | None = None,
                 vision_config: vision.VisionConfig | None = None,
                 resolution: int = vision.DEFAULT_RESOLUTION):
        self.task = tasks_mod.make_task(task, helper_rewards=helper_rewards,
                                        max_steps=max_steps)
        self.playground = playground or self.task.default_playground
        self.scene_file = scene_file
        self.sensors = tuple(k for k in SENSOR_KEYS if k in sensors)
        self.audio_mode = audio_mode
        self.audio_fft = bool(audio_fft)
        self.audio_config = AudioConfig()
        self.hrtf = load_hrtf(hrtf_path, target_fs=self.audio_config.fs) if hrtf_path else None
        self.n_agents = n_agents if n_agents is not None else self.task.default_agents
        self.seed = int(seed)
        self.dt_physics = float(dt_physics)
        self.substeps = int(substeps)
        self.dt_control = self.dt_physics * self.substeps
        self.audio_config.frame_samples = int(round(self.audio_config.fs * self.dt_control))
        if interact_distance is not None:
            self.interact_distance = float(interact_distance)
        elif self.task.interact_distance is not None:
            self.interact_distance = float(self.task.interact_distance)
        else:
            self.interact_distance = 1.5
        self.vision_config = vision_config or vision.VisionConfig()
        self.resolution = int(resolution)

        self.clock = SimClock(self.dt_physics)
        self.scene = None
        self.agents: list[Agent] = []
        self.episode: EpisodeState | None = None
        self.transient_sources: list[tuple[AudioSource, int]] = []  # (source, owner agent)

    # -- specs ---------------------------------------------------------------

    def observation_spec(self) -> dict:
        """Key -> (dtype, shape) for one agent, fixed for the whole episode."""
        spec = {}
        res = self.resolution
        channels = 1 if self.vision_config.grayscale else 3
        if "vision" in self.sensors:
            spec["vision"] = ("f32", (2, channels, res, res))
        if "audio" in self.sensors:
            n = self.audio_config.frame_samples
            if self.audio_fft:
                windows = max(1, int(np.ceil(n / self.audio_config.fft_window)))
                spec["audio"] = ("f32", (windows, 2, self.audio_config.fft_window // 2 + 1))
            else:
                spec["audio"] = ("f32", (2, n))
        if "tactile" in self.sensors:
            spec["tactile"] = ("f32", (self._probe_agent().skeleton.n_taxels,))
        if "proprio" in self.sensors:
            spec["proprio"] = ("f32", (self._probe_agent().proprio_length(),))
        return spec

    def action_spec(self) -> dict:
        if self.task.action_mode == "torque":
            return {"kind": 1, "dim": self._probe_agent().skeleton.total_dof,
                    "mode": "torque"}
        return {"kind": 0, "dim": PRIMITIVE_ACTION_DIM, "mode": "animation"}

    def _probe_agent(self) -> Agent:
        if self.agents:
            return self.agents[0]
        if not hasattr(self, "_spec_probe"):
            self._spec_probe = Agent("probe", mode=self.task.action_mode)
        return self._spec_probe

    # -- lifecycle -------------------------------------------------------------

    def reset(self, seed: int | None = None):
        """Rebuild the scene, let the task place everything, return first obs."""
        if seed is not None:
            self.seed = int(seed)
        spec = (load_playground_spec(self.scene_file) if self.scene_file
                else load_playground_spec(self.playground))
        self.scene = build_scene(spec)
        self.clock.reset()
        self.transient_sources = []
        self.agents = []
        rng = derive_stream(self.seed, STREAM_TASK + self.task.stream_offset)
        for i in range(self.n_agents):
            agent = Agent(f"agent{i}", mode=self.task.action_mode,
                          interact_distance=self.interact_distance)
            self.agents.append(agent)
        for agent in self.agents:
            w = self.scene.world
            w.add_body(agent.root_body, agent.colliders)
            for side in ("l", "r"):
                w.add_body(agent.hand_bodies[side])
            for hc in agent.hand_colliders:
                w.add_collider(hc)
            w.agent_groups.add(agent.agent_id)
            if agent.mode == "torque":
                w.joint_groups.append(agent.skeleton.joints)
        self.task.setup(self, rng)
        for agent in self.agents:
            agent.refresh_pose()
        self.episode = EpisodeState(self.n_agents)
        self._prev_snapshot = self.task.snapshot(self)
        return [self._collect_observation(i) for i in range(self.n_agents)]

    def step(self, actions):
        """actions: one array per agent (a single array is fine for 1 agent)."""
        if self.episode is None:
            raise EpisodeFinishedError("reset() must run before step()")
        if self.episode.done:
            raise EpisodeFinishedError("episode is done; call reset()")
        actions = self._validate_actions(actions)
        events_before = len(self.episode.events)

        # simultaneous action application against the pre-step snapshot
        interactables = self._interactable_targets()
        for i, (agent, action) in enumerate(zip(self.agents, actions)):
            self._apply_action(i, agent, action, interactables[i])

        self.task.pre_step(self)

        for _ in range(self.substeps):
            for agent in self.agents:
                agent.carry_grabbed(self.scene.world)
            self.scene.world.step(self.dt_physics)
            self.clock.advance()
            for agent in self.agents:
                if agent.mode == "torque":
                    agent.mark_joints_changed()
                    agent.refresh_pose()
        for agent in self.agents:
            agent.refresh_pose()
            agent.update_hand_velocities(self.dt_control)
            agent.carry_grabbed(self.scene.world)

        self.task.post_physics(self)
        self.episode.step += 1

        snapshot = self.task.snapshot(self)
        new_events = self.episode.events[events_before:]
        rewards = self.task.compute_rewards(self._prev_snapshot, snapshot, actions,
                                            new_events)
        self._prev_snapshot = snapshot
        for i, r in enumerate(rewards):
            self.episode.cumulative_reward[i] += r.total
        self.task.handle_events(self, new_events)

        done = self.task.check_done(self, new_events)
        if self.episode.step >= self.task.max_steps:
            done = True
        self.episode.done = done

        frames = [self._collect_observation(i) for i in range(self.n_agents)]
        info = {
            "step": self.episode.step,
            "events": [[k, i, o] for k, i, o in new_events],
            "task": self.task.debug_info(self),
        }
        return frames, [r.total for r in rewards], done, info

    # -- helpers ---------------------------------------------------------------

    def _validate_actions(self, actions):
        if isinstance(actions, np.ndarray) and self.n_agents == 1 and actions.ndim == 1:
            actions = [actions]
        if len(actions) != self.n_agents:
            raise InvalidActionError(
                f"expected {self.n_agents} action vectors, got {len(actions)}")
        out = []
        dim = self.action_spec()["dim"]
        for i, a in enumerate(actions):
            a = np.asarray(a, dtype=np.float64).reshape(-1)
            if a.shape[0] != dim:
                raise InvalidActionError(
                    f"agent {i}: action length {a.shape[0]}, expected {dim}")
            bad = np.flatnonzero(~np.isfinite(a))
            if bad.size:
                raise InvalidActionError(f"agent {i}: non-finite action component",
                                         index=int(bad[0]))
            out.append(a)
        return out

    def _interactable_targets(self):
        """Pre-step interactable lists (snapshot semantics for kicks/grabs)."""
        out = []
        for agent in self.agents:
            candidates = self.scene.interactable_ids
            out.append(agent.get_interactable_objects(self.scene.world, candidates)
                       if candidates else [])
        return out

    def _apply_action(self, index: int, agent: Agent, action, interactable):
        if agent.mode == "torque":
            agent.set_torques(action)
            return
        agent.walk(float(action[A_WALK]), float(action[A_TURN]), self.dt_control)
        if action[A_KICK] > 0.5 and interactable:
            target = interactable[0]
            if target != agent.grabbed_object:   # cannot kick what the hand holds
                try:
                    agent.kick(self.scene.world, target)
                    self.episode.log("kicked", index, target)
                except Exception:
                    pass
        if action[A_GRAB] > 0.5 and interactable and agent.grabbed_object is None:
            for oid in interactable:
                obj = self.scene.world.bodies[oid]
                if not obj.kinematic and obj.mass < self.scene.world.mass_threshold:
                    try:
                        agent.grab(self.scene.world, oid)
                        self.episode.log("grabbed", index, oid)
                    except Exception:
                        pass
                    break
        if action[A_RELEASE] > 0.5 and agent.grabbed_object is not None:
            released = agent.grabbed_object
            agent.release(self.scene.world)
            self.episode.log("released", index, released)
        if action[A_SOUND] > 0.5:
            agent.make_sound(default_voice_clip(self.audio_config.fs))
        if agent.pending_voice is not None:
            self.register_voice(index, agent.pending_voice)
            agent.pending_voice = None

    def register_voice(self, agent_index: int, samples):
        src = AudioSource(position=self.agents[agent_index].head_frame().pos.copy(),
                          clip=samples, loop=False)
        self.transient_sources.append((src, agent_index))
        self.episode.log("sound", agent_index, "")

    def _active_sources(self):
        self.transient_sources = [(s, i) for s, i in self.transient_sources
                                  if not s.exhausted]
        for src, owner in self.transient_sources:
            src.position = self.agents[owner].head_frame().pos.copy()
        return self.scene.sources + [s for s, _ in self.transient_sources]

    def _collect_observation(self, agent_index: int) -> ObservationFrame:
        agent = self.agents[agent_index]
        frame = ObservationFrame()
        if "vision" in self.sensors:
            pack = self._vision_pack(agent)
            left, right = vision.render_binocular(
                agent, pack, self.vision_config, background=self.scene.background,
                light_dir=self.scene.light_dir, width=self.resolution,
                height=self.resolution)
            stacked = np.stack([left, right]).transpose(0, 3, 1, 2)  # (2, C, H, W)
            frame.set("vision", stacked.astype(np.float32))
        if "audio" in self.sensors:
            buf = self._audio_frames[agent_index]
            if self.audio_fft:
                frame.set("audio", fft_magnitude(buf, self.audio_config.fft_window)
                          .astype(np.float32))
            else:
                frame.set("audio", buf.astype(np.float32))
        if "tactile" in self.sensors:
            frame.set("tactile", tactile.sense(agent, self.scene.world)
                      .astype(np.float32))
        if "proprio" in self.sensors:
            frame.set("proprio", agent.get_proprioception())
        return frame

    def _vision_pack(self, agent: Agent):
        prims, po, tris, to, owners = pack_world_colliders(
            self.scene.world, exclude_group=agent.agent_id, opaque_only=True)
        colors = (np.stack([self.scene.world.bodies[c.body_id].color for c in owners])
                  if owners else np.zeros((0, 3)))
        return prims, po, tris, to, colors

    @property
    def _audio_frames(self):
        if not hasattr(self, "_audio_cache") or self._audio_cache[0] != self.episode.step:
            listeners = []
            for agent in self.agents:
                listeners.append(Listener(frame=agent.head_frame(), mode=self.audio_mode))
            room = self.scene.room if (self.scene.room is not None
                                       and self.scene.room.max_order > 0) else None
            bufs = mix_frame(listeners, self._active_sources(), room,
                             self.audio_config, hrtf=self.hrtf,
                             room_origin=self.scene.room_origin)
            self._audio_cache = (self.episode.step, bufs)
        return self._audio_cache[1]


def default_voice_clip(fs: int, duration: float = 0.2, freq: float = 660.0) -> np.ndarray:
    """Agent voice: a short fixed beep."""
    t = np.arange(int(fs * duration)) / fs
    return 0.5 * np.sin(2 * np.pi * freq * t)
