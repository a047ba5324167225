"""Task suite: KickTheBall, ObjectNav, GrabObject, MultiAgentNav.

Reward shaping follows the exact helper formulas:
  kick      helper = 0.01 * cos(theta)      theta between velocity and the
                                            agent-to-ball displacement
  nav       helper = Vis * (0.05 * a_f + 0.03 * a_l * L)
                                            a_f/a_l: velocity along forward /
                                            left; L = +1 left, -1 right;
                                            Vis gates on target visibility
  grab      helper = d_prev - d_cur         d = |Rh - O| + |Lh - O|
            penalty = -0.004 * |a|^2
  multi-nav per-agent nav helper, +1 sparse at each agent's own arrival

Every reward is a pure function of logged state snapshots, so recomputing a
trajectory's rewards from its snapshots reproduces the logged values
bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioSource
from .errors import NotFoundError
from .scene import add_prop

REACH_RADIUS = 0.5
HOLD_RADIUS = 0.15
BALL_ENTRY_SPEED = 1.5
BUZZ_FREQ = 440.0


@dataclass
class RewardBreakdown:
    sparse: float = 0.0
    helper: float = 0.0
    penalty: float = 0.0

    @property
    def total(self) -> float:
        return self.sparse + self.helper + self.penalty


# ---------------------------------------------------------------------------
# pure reward formulas
# ---------------------------------------------------------------------------

def kick_the_ball_reward(agent_state: dict, ball_state: dict, events,
                         agent_index: int = 0, helper_enabled: bool = True
                         ) -> RewardBreakdown:
    """+1 per kick event; dense 0.01*cos(theta) steering shaping."""
    r = RewardBreakdown()
    for kind, idx, _ in events:
        if kind == "kicked" and idx == agent_index:
            r.sparse += 1.0
    if helper_enabled:
        v = np.asarray(agent_state["velocity"], dtype=float).copy()
        d = (np.asarray(ball_state["position"], dtype=float)
             - np.asarray(agent_state["position"], dtype=float))
        v[1] = 0.0
        d[1] = 0.0
        speed = float(np.linalg.norm(v))
        dist = float(np.linalg.norm(d))
        if speed >= 1e-6 and dist >= 1e-9:
            r.helper = 0.01 * float(v @ d) / (speed * dist)
    return r


def object_nav_reward(agent_state: dict, target_visible: bool, target_left: float,
                      events, target_id: str, agent_index: int = 0,
                      helper_enabled: bool = True) -> RewardBreakdown:
    """+1 reaching the target, -1 reaching anything else; velocity shaping."""
    r = RewardBreakdown()
    for kind, idx, oid in events:
        if kind == "reached" and idx == agent_index:
            r.sparse += 1.0 if oid == target_id else -1.0
    if helper_enabled and target_visible:
        v = np.asarray(agent_state["velocity"], dtype=float)
        a_f = float(v @ np.asarray(agent_state["forward"], dtype=float))
        a_l = float(v @ np.asarray(agent_state["left"], dtype=float))
        big_l = 1.0 if target_left > 0 else -1.0
        r.helper = 0.05 * a_f + 0.03 * a_l * big_l
    return r


def grab_object_reward(prev: dict, cur: dict, action, hold_radius: float = HOLD_RADIUS,
                       helper_enabled: bool = True) -> RewardBreakdown:
    """Vertical-lift sparse reward gated on both hands being at the object."""
    r = RewardBreakdown()
    obj = np.asarray(cur["object"], dtype=float)
    d_cur = (float(np.linalg.norm(np.asarray(cur["hand_r"]) - obj))
             + float(np.linalg.norm(np.asarray(cur["hand_l"]) - obj)))
    obj_prev = np.asarray(prev["object"], dtype=float)
    d_prev = (float(np.linalg.norm(np.asarray(prev["hand_r"]) - obj_prev))
              + float(np.linalg.norm(np.asarray(prev["hand_l"]) - obj_prev)))
    both_close = (float(np.linalg.norm(np.asarray(cur["hand_r"]) - obj)) < hold_radius
                  and float(np.linalg.norm(np.asarray(cur["hand_l"]) - obj)) < hold_radius)
    if both_close:
        r.sparse = float(obj[1] - obj_prev[1])
    if helper_enabled:
        r.helper = d_prev - d_cur
    a = np.asarray(action, dtype=float)
    r.penalty = -0.004 * float(a @ a)
    return r


def multi_agent_nav_reward(agent_state: dict, target_visible: bool, target_left: float,
                           events, agent_index: int, helper_enabled: bool = True
                           ) -> RewardBreakdown:
    """All agents must arrive; each gets +1 at its own arrival step."""
    r = RewardBreakdown()
    for kind, idx, _ in events:
        if kind == "reached" and idx == agent_index:
            r.sparse += 1.0
    if helper_enabled and target_visible:
        v = np.asarray(agent_state["velocity"], dtype=float)
        a_f = float(v @ np.asarray(agent_state["forward"], dtype=float))
        a_l = float(v @ np.asarray(agent_state["left"], dtype=float))
        big_l = 1.0 if target_left > 0 else -1.0
        r.helper = 0.05 * a_f + 0.03 * a_l * big_l
    return r


# ---------------------------------------------------------------------------
# task objects
# ---------------------------------------------------------------------------

def buzz_clip(fs: int, freq: float = BUZZ_FREQ, duration: float = 1.0) -> np.ndarray:
    t = np.arange(int(fs * duration)) / fs
    return 0.6 * np.sin(2 * np.pi * freq * t)


def _agent_axes(agent):
    from .geom import quat_rotate
    fwd = quat_rotate(agent.root_body.orientation, np.array([0.0, 0.0, 1.0]))
    left = quat_rotate(agent.root_body.orientation, np.array([-1.0, 0.0, 0.0]))
    return fwd, left


def _agent_state(agent) -> dict:
    fwd, left = _agent_axes(agent)
    return {
        "position": agent.root_body.position.copy(),
        "velocity": agent.root_body.linear_velocity.copy(),
        "forward": fwd,
        "left": left,
    }


def _place_in_region(rng, region, margin=0.0):
    x0, z0, x1, z1 = region
    x = rng.uniform(x0 + margin, x1 - margin)
    z = rng.uniform(z0 + margin, z1 - margin)
    return x, z


class Task:
    task_id = "base"
    default_playground = "SimpleEnv"
    default_agents = 1
    action_mode = "animation"
    default_max_steps = 400
    stream_offset = 0
    interact_distance = None   # task-preferred reach; None keeps the default

    def __init__(self, helper_rewards=True, max_steps=None):
        self.helper_rewards = bool(helper_rewards)
        self.max_steps = int(max_steps) if max_steps else self.default_max_steps
        self.rng = None

    def setup(self, env, rng):
        raise NotImplementedError

    def pre_step(self, env):
        pass

    def post_physics(self, env):
        pass

    def handle_events(self, env, events):
        pass

    def snapshot(self, env) -> dict:
        raise NotImplementedError

    def compute_rewards(self, prev, cur, actions, events) -> list[RewardBreakdown]:
        raise NotImplementedError

    def check_done(self, env, events) -> bool:
        return False

    def debug_info(self, env) -> dict:
        return {}

    def _bearing_info(self, env, object_id) -> list[dict]:
        """Per-agent bearing (rad, + = left) and distance to an object."""
        out = []
        obj = env.scene.world.bodies[object_id].position
        for agent in env.agents:
            fwd, left = _agent_axes(agent)
            d = obj - agent.root_body.position
            d[1] = 0.0
            bearing = float(np.arctan2(d @ left, d @ fwd))
            out.append({"bearing": round(bearing, 6),
                        "distance": round(float(np.linalg.norm(d)), 6)})
        return out


class KickTheBall(Task):
    task_id = "kick_the_ball"
    default_playground = "SimpleEnv"
    stream_offset = 0
    interact_distance = 2.5    # the larger documented reach: kicks target floor balls

    BALL_RADIUS = 0.12
    BALL_MASS = 0.5

    def setup(self, env, rng):
        self.rng = rng
        region = env.scene.spawn_regions["agent"]
        for agent in env.agents:
            x, z = _place_in_region(rng, region, margin=0.2)
            agent.root_body.position = np.array([x, 0.9, z])
            agent.yaw = float(rng.uniform(0.0, 2 * np.pi))
            from .geom import quat_from_yaw
            agent.root_body.orientation = quat_from_yaw(agent.yaw)
            agent.rotate_head(30.0, 0.0)   # eyes toward the floor: the ball rolls there
            agent.mark_dirty()
        if "ball" not in env.scene.world.bodies:
            add_prop(env.scene, {
                "id": "ball", "shape": "sphere", "size": self.BALL_RADIUS,
                "mass": self.BALL_MASS, "color": [0.95, 0.2, 0.1],
                "position": [0.0, None, 0.0],
            }, interactable=True)
        elif "ball" not in env.scene.interactable_ids:
            env.scene.interactable_ids.append("ball")
        self._respawn_ball(env)
        src = AudioSource(position=env.scene.world.bodies["ball"].position.copy(),
                          clip=buzz_clip(env.audio_config.fs), loop=True)
        env.scene.sources.append(src)
        self._buzz = src

    def _respawn_ball(self, env):
        """Ball re-enters from a random sidewall, heading inward."""
        room = env.scene.rooms[0]
        cx, cz = room["center"]
        hx = room["size"][0] / 2.0 - self.BALL_RADIUS - 0.05
        hz = room["size"][2] / 2.0 - self.BALL_RADIUS - 0.05
        wall = int(self.rng.integers(0, 4))
        u = float(self.rng.uniform(-0.8, 0.8))
        if wall == 0:    # north wall, entering southward
            pos = np.array([cx + u * hx, self.BALL_RADIUS, cz + hz])
            vel = np.array([0.0, 0.0, -BALL_ENTRY_SPEED])
        elif wall == 1:  # south
            pos = np.array([cx + u * hx, self.BALL_RADIUS, cz - hz])
            vel = np.array([0.0, 0.0, BALL_ENTRY_SPEED])
        elif wall == 2:  # east
            pos = np.array([cx + hx, self.BALL_RADIUS, cz + u * hz])
            vel = np.array([-BALL_ENTRY_SPEED, 0.0, 0.0])
        else:            # west
            pos = np.array([cx - hx, self.BALL_RADIUS, cz + u * hz])
            vel = np.array([BALL_ENTRY_SPEED, 0.0, 0.0])
        ball = env.scene.world.bodies["ball"]
        ball.position = pos
        ball.linear_velocity = vel

    def post_physics(self, env):
        self._buzz.position = env.scene.world.bodies["ball"].position.copy()

    def handle_events(self, env, events):
        if any(k == "kicked" for k, _, _ in events):
            self._respawn_ball(env)
            self._buzz.position = env.scene.world.bodies["ball"].position.copy()

    def snapshot(self, env) -> dict:
        return {
            "agents": [_agent_state(a) for a in env.agents],
            "ball": {"position": env.scene.world.bodies["ball"].position.copy()},
        }

    def compute_rewards(self, prev, cur, actions, events):
        return [kick_the_ball_reward(cur["agents"][i], cur["ball"], events, i,
                                     self.helper_rewards)
                for i in range(len(cur["agents"]))]

    def debug_info(self, env):
        return {"agents": self._bearing_info(env, "ball")}


class ObjectNav(Task):
    task_id = "object_nav"
    default_playground = "SingleRoomEnv"
    stream_offset = 1

    target_id = "target_ball"

    def setup(self, env, rng):
        self.rng = rng
        if self.target_id not in env.scene.world.bodies:
            raise NotFoundError(f"playground lacks nav target {self.target_id!r}")
        region = env.scene.spawn_regions["agent"]
        for agent in env.agents:
            x, z = _place_in_region(rng, region, margin=0.2)
            agent.root_body.position = np.array([x, 0.9, z])
            agent.yaw = float(rng.uniform(0.0, 2 * np.pi))
            from .geom import quat_from_yaw
            agent.root_body.orientation = quat_from_yaw(agent.yaw)
            agent.mark_dirty()
        obj_region = env.scene.spawn_regions.get("object", region)
        for oid in env.scene.interactable_ids:
            body = env.scene.world.bodies[oid]
            for _ in range(64):
                x, z = _place_in_region(rng, obj_region, margin=0.3)
                p = np.array([x, body.position[1], z])
                if all(np.linalg.norm((p - a.root_body.position) * [1, 0, 1]) > 1.2
                       for a in env.agents):
                    body.position = p
                    break
        self._reached: set[int] = set()

    def post_physics(self, env):
        for i, agent in enumerate(env.agents):
            if i in self._reached:
                continue
            for oid in env.scene.interactable_ids:
                obj = env.scene.world.bodies[oid]
                d = (obj.position - agent.root_body.position) * np.array([1.0, 0.0, 1.0])
                if float(np.linalg.norm(d)) < REACH_RADIUS:
                    self._reached.add(i)
                    env.episode.log("reached", i, oid)
                    break

    def snapshot(self, env) -> dict:
        target = env.scene.world.bodies[self.target_id]
        snaps = []
        for agent in env.agents:
            state = _agent_state(agent)
            vis = any(agent.is_visible(env.scene.world, self.target_id, eye)
                      for eye in ("left", "right"))
            left_coord = float((target.position - state["position"]) @ state["left"])
            snaps.append({"state": state, "visible": bool(vis), "left": left_coord})
        return {"agents": snaps, "target": target.position.copy()}

    def compute_rewards(self, prev, cur, actions, events):
        return [object_nav_reward(s["state"], s["visible"], s["left"], events,
                                  self.target_id, i, self.helper_rewards)
                for i, s in enumerate(cur["agents"])]

    def check_done(self, env, events) -> bool:
        return any(kind == "reached" for kind, _, _ in events)

    def debug_info(self, env):
        return {"agents": self._bearing_info(env, self.target_id)}


class GrabObject(Task):
    task_id = "grab_object"
    default_playground = "SimpleEnv"
    action_mode = "torque"
    default_max_steps = 200
    stream_offset = 2

    object_id = "grab_target"

    def setup(self, env, rng):
        self.rng = rng
        agent = env.agents[0]
        agent.root_body.position = np.array([0.0, 0.9, 0.0])
        x = float(rng.uniform(-0.05, 0.05))
        add_prop(env.scene, {
            "id": self.object_id, "shape": "box", "size": [0.05, 0.05, 0.05],
            "mass": 0.4, "color": [0.9, 0.6, 0.1],
            "position": [x, None, 0.42],
        }, interactable=True)

    def pre_step(self, env):
        # gaze stays locked on the object for the whole episode
        obj = env.scene.world.bodies[self.object_id]
        for agent in env.agents:
            agent.look_toward_point(obj.position)

    def snapshot(self, env) -> dict:
        agent = env.agents[0]
        obj = env.scene.world.bodies[self.object_id]
        return {
            "object": obj.position.copy(),
            "hand_l": agent.hand_bodies["l"].position.copy(),
            "hand_r": agent.hand_bodies["r"].position.copy(),
        }

    def compute_rewards(self, prev, cur, actions, events):
        return [grab_object_reward(prev, cur, actions[0],
                                   helper_enabled=self.helper_rewards)]

    def debug_info(self, env):
        return {"agents": self._bearing_info(env, self.object_id)}


class MultiAgentNav(Task):
    task_id = "multi_agent_nav"
    default_playground = "HouseEnv"
    default_agents = 3
    default_max_steps = 600
    stream_offset = 3

    object_id = "nav_target"
    rooms = ("north", "east", "west")

    def setup(self, env, rng):
        self.rng = rng
        from .errors import ConfigurationError
        missing = [r for r in self.rooms if r not in env.scene.spawn_regions]
        if missing:
            raise ConfigurationError(
                f"playground {env.scene.name!r} lacks spawn regions {missing}; "
                f"multi_agent_nav needs a multi-room layout")
        from .geom import quat_from_yaw
        for agent, room in zip(env.agents, self.rooms):
            region = env.scene.spawn_regions[room]
            x, z = _place_in_region(rng, region, margin=0.3)
            agent.root_body.position = np.array([x, 0.9, z])
            agent.yaw = float(rng.uniform(0.0, 2 * np.pi))
            agent.root_body.orientation = quat_from_yaw(agent.yaw)
            agent.mark_dirty()
        room = self.rooms[int(rng.integers(0, len(self.rooms)))]
        x, z = _place_in_region(rng, env.scene.spawn_regions[room], margin=0.4)
        add_prop(env.scene, {
            "id": self.object_id, "shape": "sphere", "size": 0.16,
            "mass": 0.8, "color": [0.95, 0.2, 0.1], "position": [x, None, z],
        }, interactable=True)
        self._reached: set[int] = set()

    def post_physics(self, env):
        obj = env.scene.world.bodies[self.object_id]
        for i, agent in enumerate(env.agents):
            if i in self._reached:
                continue
            d = (obj.position - agent.root_body.position) * np.array([1.0, 0.0, 1.0])
            if float(np.linalg.norm(d)) < REACH_RADIUS:
                self._reached.add(i)
                env.episode.log("reached", i, self.object_id)

    def snapshot(self, env) -> dict:
        obj = env.scene.world.bodies[self.object_id]
        snaps = []
        for agent in env.agents:
            state = _agent_state(agent)
            vis = any(agent.is_visible(env.scene.world, self.object_id, eye)
                      for eye in ("left", "right"))
            left_coord = float((obj.position - state["position"]) @ state["left"])
            snaps.append({"state": state, "visible": bool(vis), "left": left_coord})
        return {"agents": snaps, "target": obj.position.copy()}

    def compute_rewards(self, prev, cur, actions, events):
        return [multi_agent_nav_reward(s["state"], s["visible"], s["left"], events,
                                       i, self.helper_rewards)
                for i, s in enumerate(cur["agents"])]

    def check_done(self, env, events) -> bool:
        return len(self._reached) == len(env.agents)

    def debug_info(self, env):
        return {"agents": self._bearing_info(env, self.object_id)}


TASKS = {t.task_id: t for t in (KickTheBall, ObjectNav, GrabObject, MultiAgentNav)}


def make_task(task_id: str, helper_rewards=True, max_steps=None) -> Task:
    if task_id not in TASKS:
        raise NotFoundError(f"unknown task {task_id!r} (have {', '.join(sorted(TASKS))})")
    return TASKS[task_id](helper_rewards=helper_rewards, max_steps=max_steps)


# ---------------------------------------------------------------------------
# scripted policies (used by the acceptance suite and examples)
# ---------------------------------------------------------------------------

def go_to_ball_policy(env, agent_index: int = 0, walk_speed: float = 1.2) -> np.ndarray:
    """Privileged heuristic: turn toward the ball, walk, kick in range."""
    agent = env.agents[agent_index]
    ball = env.scene.world.bodies["ball"]
    fwd, left = _agent_axes(agent)
    d = ball.position - agent.root_body.position
    d[1] = 0.0
    bearing = float(np.arctan2(d @ left, d @ fwd))
    dist = float(np.linalg.norm(d))
    turn = np.clip(-bearing * 6.0, -3.0, 3.0)   # positive yaw turns right
    walk = walk_speed if abs(bearing) < 0.6 else 0.2
    if dist < 1.0:
        walk = 0.0             # hold the kickable window instead of overrunning
    kick = 1.0 if dist < 1.7 and abs(bearing) < 0.5 else 0.0
    return np.array([walk, turn, kick, 0.0, 0.0, 0.0])


def random_policy(rng, dim: int = 6) -> np.ndarray:
    a = rng.uniform(-1.0, 1.0, size=dim)
    a[0] *= 1.5   # walk speed range comparable to the scripted policy
    a[1] *= 3.0
    return a
