"""TCP protocol server exposing reset/step to remote learning agents.

One connection may multiplex several environments (one per env_id), created
from the HELLO config document merged over the server's defaults. Requests
are strict request/response per env_id; frames are handled in arrival order,
which keeps responses ordered and the whole session deterministic. Protocol
violations answer with an ERROR frame and leave the connection open.
"""
from __future__ import annotations

import logging
import socket
import threading

import numpy as np

from . import wire
from .env import Environment
from .errors import EngineError, EpisodeFinishedError, InvalidActionError

log = logging.getLogger("engine.server")


def default_env_factory(config: dict) -> Environment:
    """Build an Environment from a HELLO/CLI config document."""
    sensors = config.get("sensors", ["vision", "audio", "tactile", "proprio"])
    if isinstance(sensors, str):
        sensors = [s for s in sensors.split(",") if s]
    return Environment(
        task=config.get("task", "kick_the_ball"),
        playground=config.get("playground"),
        scene_file=config.get("scene"),
        n_agents=config.get("agents"),
        sensors=tuple(sensors),
        audio_mode=config.get("audio_mode", "stereo"),
        hrtf_path=config.get("hrtf_file"),
        audio_fft=bool(config.get("audio_fft", False)),
        seed=int(config.get("seed", 0)),
        helper_rewards=bool(config.get("helper_rewards", True)),
        max_steps=config.get("max_steps"),
    )


class _Session:
    """Per-connection state: config negotiation plus env_id -> Environment."""

    def __init__(self, defaults: dict, max_envs: int, env_factory):
        self.defaults = dict(defaults)
        self.max_envs = max_envs
        self.env_factory = env_factory
        self.envs: dict[int, Environment] = {}
        self.was_reset: set[int] = set()
        self.config: dict | None = None

    def handle(self, env_id: int, msg_type: int, payload: bytes) -> list[bytes]:
        try:
            return self._dispatch(env_id, msg_type, payload)
        except EngineError as exc:
            return [wire.encode_frame(env_id, wire.MSG_ERROR, str(exc).encode("utf-8"))]

    def _dispatch(self, env_id, msg_type, payload):
        if msg_type == wire.MSG_HELLO:
            return self._hello(env_id, payload)
        if msg_type == wire.MSG_RESET:
            return self._reset(env_id, payload)
        if msg_type == wire.MSG_STEP:
            return self._step(env_id, payload)
        if msg_type == wire.MSG_CLOSE:
            return []
        return [wire.encode_frame(env_id, wire.MSG_ERROR,
                                  f"unknown message type {msg_type}".encode("utf-8"))]

    def _hello(self, env_id, payload):
        config = dict(self.defaults)
        config.update(wire.decode_json(payload))
        n_envs = int(config.get("envs", 1))
        if n_envs < 1 or n_envs > self.max_envs:
            return [wire.encode_frame(env_id, wire.MSG_ERROR,
                                      f"envs must be in [1, {self.max_envs}]".encode())]
        self.config = config
        self.envs = {i: self.env_factory(config) for i in range(n_envs)}
        self.was_reset = set()
        probe = self.envs[0]
        ack = {
            "envs": n_envs,
            "agents": probe.n_agents,
            "keys": {k: {"dtype": dt, "shape": list(shape)}
                     for k, (dt, shape) in probe.observation_spec().items()},
            "action": probe.action_spec(),
        }
        return [wire.encode_frame(env_id, wire.MSG_HELLO_ACK, wire.encode_json(ack))]

    def _env_of(self, env_id):
        if self.config is None:
            raise EngineError("HELLO required before RESET/STEP")
        if env_id not in self.envs:
            raise EngineError(f"env_id {env_id} out of range (have {len(self.envs)})")
        return self.envs[env_id]

    def _reset(self, env_id, payload):
        env = self._env_of(env_id)
        seed = wire.decode_reset(payload)
        frames = env.reset(seed)
        self.was_reset.add(env_id)
        payload = wire.encode_step_result(
            frames, np.zeros(env.n_agents, dtype="<f4"), False, {"reset": True})
        return [wire.encode_frame(env_id, wire.MSG_STEP_RESULT, payload)]

    def _step(self, env_id, payload):
        env = self._env_of(env_id)
        if env_id not in self.was_reset:
            raise EngineError("not reset")
        decoded = wire.decode_actions(payload)
        expected_kind = env.action_spec()["kind"]
        actions = []
        for i, (kind, vec) in enumerate(decoded):
            if kind != expected_kind:
                raise InvalidActionError(
                    f"agent {i}: action kind {kind}, expected {expected_kind}")
            actions.append(np.asarray(vec, dtype=np.float64))
        try:
            frames, rewards, done, info = env.step(actions)
        except EpisodeFinishedError as exc:
            raise EngineError(str(exc)) from exc
        payload = wire.encode_step_result(frames, rewards, done, info)
        return [wire.encode_frame(env_id, wire.MSG_STEP_RESULT, payload)]


class EngineServer:
    def __init__(self, host: str = "127.0.0.1", port: int = 0, defaults: dict | None = None,
                 max_envs: int = 8, env_factory=default_env_factory):
        self.host = host
        self.port = port
        self.defaults = defaults or {}
        self.max_envs = max_envs
        self.env_factory = env_factory
        self._sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()

    def start(self):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((self.host, self.port))
        self.port = self._sock.getsockname()[1]
        self._sock.listen(8)
        self._sock.settimeout(0.2)
        accept = threading.Thread(target=self._accept_loop, daemon=True)
        accept.start()
        self._threads.append(accept)
        log.info("listening on %s:%d", self.host, self.port)
        return self

    def serve_forever(self):
        if self._sock is None:
            self.start()
        try:
            while not self._stop.is_set():
                self._stop.wait(0.5)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def stop(self):
        self._stop.set()
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            log.info("connection from %s:%d", *addr)
            t = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
            t.start()
            self._threads = [x for x in self._threads if x.is_alive()]
            self._threads.append(t)

    def _serve_connection(self, conn: socket.socket):
        session = _Session(self.defaults, self.max_envs, self.env_factory)
        reader = wire.FrameReader()
        try:
            with conn:
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                while not self._stop.is_set():
                    try:
                        data = conn.recv(1 << 16)
                    except (ConnectionResetError, OSError):
                        break
                    if not data:
                        break
                    try:
                        frames = reader.feed(data)
                    except EngineError as exc:
                        conn.sendall(wire.encode_frame(0, wire.MSG_ERROR,
                                                       str(exc).encode("utf-8")))
                        break
                    closing = False
                    for env_id, msg_type, payload in frames:
                        for response in session.handle(env_id, msg_type, payload):
                            conn.sendall(response)
                        if msg_type == wire.MSG_CLOSE:
                            closing = True
                    if closing:
                        break
        finally:
            log.info("connection closed")


def serve_session(port: int, defaults: dict | None = None, max_envs: int = 8,
                  host: str = "127.0.0.1"):
    """Blocking entry point used by the CLI. Port 0 binds an ephemeral port;
    the chosen port is announced on stdout for tooling."""
    server = EngineServer(host=host, port=port, defaults=defaults, max_envs=max_envs)
    server.start()
    print(f"LISTENING {server.port}", flush=True)
    log.info("engine serving on %s:%d", host, server.port)
    server.serve_forever()
