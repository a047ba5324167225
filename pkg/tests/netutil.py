"""Minimal blocking test client for the engine protocol (test-suite helper)."""
import socket

import numpy as np

from sensorium import wire


class TestClient:
    __test__ = False  # not a pytest class

    def __init__(self, host, port, timeout=20.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.reader = wire.FrameReader()
        self.transcript = []   # raw response frames, in order

    def close(self):
        try:
            self.sock.sendall(wire.encode_frame(0, wire.MSG_CLOSE))
        except OSError:
            pass
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, env_id, msg_type, payload=b""):
        self.sock.sendall(wire.encode_frame(env_id, msg_type, payload))
        return self.read_frame()

    def read_frame(self):
        while True:
            frames = self.reader.feed(self.sock.recv(1 << 16))
            if frames:
                assert len(frames) == 1
                raw = wire.encode_frame(*frames[0])
                self.transcript.append(raw)
                return frames[0]

    def hello(self, config):
        env_id, msg_type, payload = self.request(0, wire.MSG_HELLO,
                                                 wire.encode_json(config))
        assert msg_type == wire.MSG_HELLO_ACK, payload
        return wire.decode_json(payload)

    def reset(self, env_id, seed):
        rid, msg_type, payload = self.request(env_id, wire.MSG_RESET,
                                              wire.encode_reset(seed))
        if msg_type == wire.MSG_ERROR:
            raise RuntimeError(payload.decode())
        return wire.decode_step_result(payload)

    def step(self, env_id, actions, kind):
        rid, msg_type, payload = self.request(
            env_id, wire.MSG_STEP,
            wire.encode_actions([np.asarray(a, dtype=np.float32) for a in actions],
                                kind))
        if msg_type == wire.MSG_ERROR:
            raise RuntimeError(payload.decode())
        return wire.decode_step_result(payload)
