/**
 * Binary wire protocol (little-endian throughout).
 *
 * Frame: u32 length (3 + payload bytes) | u16 env_id | u8 msg_type | payload
 *
 * STEP_RESULT payload: u16 n_agents; per agent u32 n_keys then tensors
 * (u16 key length, key, u8 element type {f32=0, u8=1}, u8 ndim, ndim * u32
 * dims, row-major payload); n_agents * f32 rewards; u8 done; u32 info
 * length, info JSON.
 */

export enum MsgType {
  HELLO = 0,
  HELLO_ACK = 1,
  RESET = 2,
  STEP = 3,
  STEP_RESULT = 4,
  ERROR = 5,
  CLOSE = 6,
}

export const ACTION_PRIMITIVE = 0;
export const ACTION_TORQUE = 1;

export const MAX_PAYLOAD = 64 * 1024 * 1024;

export class ProtocolError extends Error {}

export interface Frame {
  envId: number;
  msgType: MsgType;
  payload: Buffer;
}

export function encodeFrame(envId: number, msgType: MsgType, payload: Buffer = Buffer.alloc(0)): Buffer {
  if (payload.length > MAX_PAYLOAD) {
    throw new ProtocolError(`payload of ${payload.length} bytes exceeds the 64 MiB cap`);
  }
  const head = Buffer.alloc(7);
  head.writeUInt32LE(3 + payload.length, 0);
  head.writeUInt16LE(envId, 4);
  head.writeUInt8(msgType, 6);
  return Buffer.concat([head, payload]);
}

/** Incremental decoder: feed() raw socket chunks, collect complete frames. */
export class FrameReader {
  private buf: Buffer = Buffer.alloc(0);

  feed(data: Buffer): Frame[] {
    this.buf = this.buf.length ? Buffer.concat([this.buf, data]) : data;
    const frames: Frame[] = [];
    for (;;) {
      if (this.buf.length < 4) break;
      const length = this.buf.readUInt32LE(0);
      if (length < 3) throw new ProtocolError(`declared length ${length} below header`);
      if (length - 3 > MAX_PAYLOAD) throw new ProtocolError("declared payload exceeds cap");
      if (this.buf.length < 4 + length) break;
      const envId = this.buf.readUInt16LE(4);
      const msgType = this.buf.readUInt8(6) as MsgType;
      const payload = Buffer.from(this.buf.subarray(7, 4 + length));
      this.buf = Buffer.from(this.buf.subarray(4 + length));
      frames.push({ envId, msgType, payload });
    }
    return frames;
  }

  get pending(): number {
    return this.buf.length;
  }
}

export type TensorData = Float32Array | Uint8Array;

export interface Tensor {
  dtype: "f32" | "u8";
  shape: number[];
  data: TensorData;
}

export type Observation = Map<string, Tensor>;

export function decodeTensor(buf: Buffer, offset: number): [string, Tensor, number] {
  const klen = buf.readUInt16LE(offset);
  offset += 2;
  const key = buf.subarray(offset, offset + klen).toString("utf-8");
  offset += klen;
  const etype = buf.readUInt8(offset);
  const ndim = buf.readUInt8(offset + 1);
  offset += 2;
  const shape: number[] = [];
  for (let i = 0; i < ndim; i++) {
    shape.push(buf.readUInt32LE(offset));
    offset += 4;
  }
  const count = shape.reduce((a, b) => a * b, 1);
  let data: TensorData;
  let dtype: "f32" | "u8";
  if (etype === 0) {
    dtype = "f32";
    const bytes = count * 4;
    if (offset + bytes > buf.length) throw new ProtocolError(`tensor ${key} truncated`);
    // copy out: the source buffer may not be 4-byte aligned
    data = new Float32Array(count);
    for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(offset + 4 * i);
    offset += bytes;
  } else if (etype === 1) {
    dtype = "u8";
    if (offset + count > buf.length) throw new ProtocolError(`tensor ${key} truncated`);
    data = new Uint8Array(buf.subarray(offset, offset + count));
    offset += count;
  } else {
    throw new ProtocolError(`unknown element type ${etype}`);
  }
  return [key, { dtype, shape, data }, offset];
}

export function decodeObservation(buf: Buffer, offset: number): [Observation, number] {
  const nKeys = buf.readUInt32LE(offset);
  offset += 4;
  const obs: Observation = new Map();
  for (let i = 0; i < nKeys; i++) {
    const [key, tensor, next] = decodeTensor(buf, offset);
    if (obs.has(key)) throw new ProtocolError(`duplicate key ${key}`);
    obs.set(key, tensor);
    offset = next;
  }
  return [obs, offset];
}

export interface StepResult {
  observations: Observation[];
  rewards: Float32Array;
  done: boolean;
  info: Record<string, unknown>;
}

export function decodeStepResult(payload: Buffer): StepResult {
  let offset = 0;
  const nAgents = payload.readUInt16LE(offset);
  offset += 2;
  const observations: Observation[] = [];
  for (let i = 0; i < nAgents; i++) {
    const [obs, next] = decodeObservation(payload, offset);
    observations.push(obs);
    offset = next;
  }
  const rewards = new Float32Array(nAgents);
  for (let i = 0; i < nAgents; i++) {
    rewards[i] = payload.readFloatLE(offset);
    offset += 4;
  }
  const done = payload.readUInt8(offset) !== 0;
  offset += 1;
  const infoLen = payload.readUInt32LE(offset);
  offset += 4;
  if (offset + infoLen > payload.length) throw new ProtocolError("truncated info");
  const info = JSON.parse(payload.subarray(offset, offset + infoLen).toString("utf-8"));
  offset += infoLen;
  if (offset !== payload.length) throw new ProtocolError("trailing bytes in STEP_RESULT");
  return { observations, rewards, done, info };
}

export function encodeJson(doc: unknown): Buffer {
  return Buffer.from(JSON.stringify(doc), "utf-8");
}

export function encodeReset(seed: bigint | number): Buffer {
  const buf = Buffer.alloc(8);
  buf.writeBigUInt64LE(BigInt(seed) & 0xffffffffffffffffn, 0);
  return buf;
}

export function encodeActions(actions: ArrayLike<number>[], kind: number): Buffer {
  const parts: Buffer[] = [];
  for (const action of actions) {
    const head = Buffer.alloc(5);
    head.writeUInt8(kind, 0);
    head.writeUInt32LE(action.length, 1);
    const body = Buffer.alloc(4 * action.length);
    for (let i = 0; i < action.length; i++) body.writeFloatLE(action[i], 4 * i);
    parts.push(head, body);
  }
  return Buffer.concat(parts);
}
