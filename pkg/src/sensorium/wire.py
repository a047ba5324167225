"""Binary wire protocol: length-prefixed frames carrying typed payloads.

Frame layout (little-endian throughout):

    u32 length     covers everything after this field (= 3 + payload bytes)
    u16 env_id
    u8  msg_type   HELLO=0 HELLO_ACK=1 RESET=2 STEP=3 STEP_RESULT=4
                   ERROR=5 CLOSE=6
    ... payload

Payloads:
    HELLO / HELLO_ACK / ERROR   UTF-8 (JSON for the first two, text for ERROR)
    RESET                       u64 seed
    STEP                        per agent: u8 action kind, u32 count,
                                count * f32
    STEP_RESULT                 u16 n_agents; per agent an observation block
                                (u32 n_keys, then per key: u16 key length,
                                key bytes, u8 element type {f32=0, u8=1},
                                u8 ndim, ndim * u32 dims, row-major payload);
                                then n_agents * f32 rewards; u8 done;
                                u32 info length, info UTF-8 JSON
    CLOSE                       empty

Tensors decode back to numpy arrays bit-exactly; encode/decode is an
identity for every valid frame.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ProtocolError

MSG_HELLO = 0
MSG_HELLO_ACK = 1
MSG_RESET = 2
MSG_STEP = 3
MSG_STEP_RESULT = 4
MSG_ERROR = 5
MSG_CLOSE = 6

MSG_NAMES = {0: "HELLO", 1: "HELLO_ACK", 2: "RESET", 3: "STEP", 4: "STEP_RESULT",
             5: "ERROR", 6: "CLOSE"}

MAX_PAYLOAD = 64 * 1024 * 1024

ETYPE_F32 = 0
ETYPE_U8 = 1
_DTYPES = {ETYPE_F32: np.dtype("<f4"), ETYPE_U8: np.dtype("u1")}

ACTION_PRIMITIVE = 0
ACTION_TORQUE = 1

_HEADER = struct.Struct("<IHB")


def encode_frame(env_id: int, msg_type: int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds the 64 MiB cap")
    if not 0 <= env_id <= 0xFFFF:
        raise ProtocolError(f"env_id {env_id} outside u16")
    return _HEADER.pack(3 + len(payload), env_id, msg_type) + payload


class FrameReader:
    """Incremental frame decoder; feed() bytes, iterate complete frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes):
        self._buf.extend(data)
        frames = []
        while True:
            if len(self._buf) < 4:
                break
            (length,) = struct.unpack_from("<I", self._buf, 0)
            if length < 3:
                raise ProtocolError(f"declared length {length} below the 3-byte header")
            if length - 3 > MAX_PAYLOAD:
                raise ProtocolError(f"declared payload {length - 3} exceeds the 64 MiB cap")
            if len(self._buf) < 4 + length:
                break
            env_id, msg_type = struct.unpack_from("<HB", self._buf, 4)
            payload = bytes(self._buf[7:4 + length])
            del self._buf[:4 + length]
            frames.append((env_id, msg_type, payload))
        return frames

    @property
    def pending(self) -> int:
        return len(self._buf)


def decode_frame(data: bytes):
    """Decode exactly one frame; raises on trailing or missing bytes."""
    frames = FrameReader().feed(data)
    if len(frames) != 1:
        raise ProtocolError(f"expected exactly one frame, got {len(frames)}")
    (length,) = struct.unpack_from("<I", data, 0)
    if 4 + length != len(data):
        raise ProtocolError("declared length does not match buffer size")
    return frames[0]


# ---------------------------------------------------------------------------
# tensors and observation frames
# ---------------------------------------------------------------------------

def encode_tensor(key: str, value: np.ndarray) -> bytes:
    kb = key.encode("utf-8")
    if value.dtype == np.float32:
        etype = ETYPE_F32
    elif value.dtype == np.uint8:
        etype = ETYPE_U8
    else:
        raise ProtocolError(f"tensor {key!r} has unsupported dtype {value.dtype}")
    head = struct.pack("<H", len(kb)) + kb + struct.pack("<BB", etype, value.ndim)
    dims = struct.pack(f"<{value.ndim}I", *value.shape)
    return head + dims + np.ascontiguousarray(value).tobytes()


def decode_tensor(buf: bytes, offset: int):
    (klen,) = struct.unpack_from("<H", buf, offset)
    offset += 2
    key = buf[offset:offset + klen].decode("utf-8")
    offset += klen
    etype, ndim = struct.unpack_from("<BB", buf, offset)
    offset += 2
    if etype not in _DTYPES:
        raise ProtocolError(f"unknown element type {etype}")
    dims = struct.unpack_from(f"<{ndim}I", buf, offset)
    offset += 4 * ndim
    dtype = _DTYPES[etype]
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    nbytes = count * dtype.itemsize
    if offset + nbytes > len(buf):
        raise ProtocolError(f"tensor {key!r} truncated")
    arr = np.frombuffer(buf[offset:offset + nbytes], dtype=dtype).reshape(dims)
    offset += nbytes
    return key, arr, offset


def encode_observation(frame) -> bytes:
    """One agent's observation block (ObservationFrame or dict of arrays)."""
    items = list(frame.items())
    out = [struct.pack("<I", len(items))]
    for key, value in items:
        out.append(encode_tensor(key, value))
    return b"".join(out)


def decode_observation(buf: bytes, offset: int):
    (n_keys,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    obs = {}
    for _ in range(n_keys):
        key, arr, offset = decode_tensor(buf, offset)
        if key in obs:
            raise ProtocolError(f"duplicate observation key {key!r}")
        obs[key] = arr
    return obs, offset


# ---------------------------------------------------------------------------
# message payloads
# ---------------------------------------------------------------------------

def encode_json(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_json(payload: bytes) -> dict:
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed JSON payload: {exc}") from exc


def encode_reset(seed: int) -> bytes:
    return struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF)


def decode_reset(payload: bytes) -> int:
    if len(payload) != 8:
        raise ProtocolError(f"RESET payload must be 8 bytes, got {len(payload)}")
    return struct.unpack("<Q", payload)[0]


def encode_actions(actions, kind: int) -> bytes:
    out = []
    for a in actions:
        a = np.asarray(a, dtype="<f4").reshape(-1)
        out.append(struct.pack("<BI", kind, a.shape[0]) + a.tobytes())
    return b"".join(out)


def decode_actions(payload: bytes):
    offset = 0
    actions = []
    while offset < len(payload):
        if offset + 5 > len(payload):
            raise ProtocolError("truncated action header")
        kind, count = struct.unpack_from("<BI", payload, offset)
        offset += 5
        nbytes = 4 * count
        if offset + nbytes > len(payload):
            raise ProtocolError("truncated action vector")
        vec = np.frombuffer(payload[offset:offset + nbytes], dtype="<f4")
        offset += nbytes
        actions.append((kind, vec))
    return actions


def encode_step_result(observations, rewards, done: bool, info: dict) -> bytes:
    out = [struct.pack("<H", len(observations))]
    for frame in observations:
        out.append(encode_observation(frame))
    out.append(np.asarray(rewards, dtype="<f4").tobytes())
    out.append(struct.pack("<B", 1 if done else 0))
    info_b = encode_json(info)
    out.append(struct.pack("<I", len(info_b)))
    out.append(info_b)
    return b"".join(out)


def decode_step_result(payload: bytes):
    try:
        (n_agents,) = struct.unpack_from("<H", payload, 0)
        offset = 2
        observations = []
        for _ in range(n_agents):
            obs, offset = decode_observation(payload, offset)
            observations.append(obs)
        rewards = np.frombuffer(payload[offset:offset + 4 * n_agents], dtype="<f4")
        if rewards.shape[0] != n_agents:
            raise ProtocolError("truncated rewards")
        offset += 4 * n_agents
        if offset >= len(payload):
            raise ProtocolError("truncated done flag")
        done = payload[offset] != 0
        offset += 1
        (info_len,) = struct.unpack_from("<I", payload, offset)
        offset += 4
        if offset + info_len > len(payload):
            raise ProtocolError("truncated info document")
        info = decode_json(payload[offset:offset + info_len])
        offset += info_len
    except struct.error as exc:
        raise ProtocolError(f"truncated STEP_RESULT: {exc}") from exc
    if offset != len(payload):
        raise ProtocolError("trailing bytes after STEP_RESULT")
    return list(observations), rewards, done, info
