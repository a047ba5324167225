/**
 * Remote environment handle over the engine's TCP protocol.
 *
 * Deliberately logic-free: values returned to the caller are exactly the
 * engine's bytes, decoded. Strict request/response per env_id; server ERROR
 * frames surface as EngineError with the server's text.
 */
import * as net from "node:net";

import {
  ACTION_PRIMITIVE,
  FrameReader,
  MsgType,
  Observation,
  StepResult,
  decodeStepResult,
  encodeActions,
  encodeFrame,
  encodeJson,
  encodeReset,
} from "./protocol";

export class EngineError extends Error {}

export interface KeySpec {
  dtype: string;
  shape: number[];
}

export interface Negotiated {
  envs: number;
  agents: number;
  keys: Record<string, KeySpec>;
  action: { kind: number; dim: number; mode: string };
}

interface Pending {
  resolve: (frame: { envId: number; msgType: MsgType; payload: Buffer }) => void;
  reject: (err: Error) => void;
}

export class Connection {
  private socket: net.Socket;
  private reader = new FrameReader();
  private queue: Pending[] = [];
  private transcriptChunks: Buffer[] = [];
  recordTranscript = false;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on("data", (data) => this.onData(data));
    socket.on("error", (err) => this.failAll(err));
    socket.on("close", () => this.failAll(new EngineError("connection closed")));
  }

  static connect(host: string, port: number): Promise<Connection> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port, noDelay: true });
      socket.once("connect", () => resolve(new Connection(socket)));
      socket.once("error", reject);
    });
  }

  private onData(data: Buffer) {
    let frames;
    try {
      frames = this.reader.feed(data);
    } catch (err) {
      this.failAll(err as Error);
      return;
    }
    for (const frame of frames) {
      if (this.recordTranscript) {
        this.transcriptChunks.push(encodeFrame(frame.envId, frame.msgType, frame.payload));
      }
      const pending = this.queue.shift();
      if (pending) pending.resolve(frame);
    }
  }

  private failAll(err: Error) {
    const queue = this.queue;
    this.queue = [];
    for (const pending of queue) pending.reject(err);
  }

  request(envId: number, msgType: MsgType, payload: Buffer = Buffer.alloc(0)) {
    return new Promise<{ envId: number; msgType: MsgType; payload: Buffer }>(
      (resolve, reject) => {
        this.queue.push({ resolve, reject });
        this.socket.write(encodeFrame(envId, msgType, payload));
      },
    );
  }

  transcript(): Buffer {
    return Buffer.concat(this.transcriptChunks);
  }

  close() {
    try {
      this.socket.write(encodeFrame(0, MsgType.CLOSE));
    } catch {
      /* already gone */
    }
    this.socket.end();
    this.socket.destroy();
  }
}

export interface RemoteEnvConfig {
  task?: string;
  playground?: string;
  sensors?: string;
  audio_mode?: "mono" | "stereo" | "hrtf";
  seed?: number;
  agents?: number;
  envs?: number;
  max_steps?: number;
  [extra: string]: unknown;
}

export class RemoteEnv {
  readonly connection: Connection;
  readonly envId: number;
  readonly spec: Negotiated;
  private doneFlag = false;

  private constructor(connection: Connection, envId: number, spec: Negotiated) {
    this.connection = connection;
    this.envId = envId;
    this.spec = spec;
  }

  /** HELLO/HELLO_ACK handshake; returns a handle for env_id 0. */
  static async connect(host: string, port: number, config: RemoteEnvConfig = {}): Promise<RemoteEnv> {
    const connection = await Connection.connect(host, port);
    const reply = await connection.request(0, MsgType.HELLO, encodeJson(config));
    if (reply.msgType === MsgType.ERROR) {
      connection.close();
      throw new EngineError(reply.payload.toString("utf-8"));
    }
    if (reply.msgType !== MsgType.HELLO_ACK) {
      connection.close();
      throw new EngineError(`unexpected reply type ${reply.msgType}`);
    }
    const spec = JSON.parse(reply.payload.toString("utf-8")) as Negotiated;
    return new RemoteEnv(connection, 0, spec);
  }

  /** Additional handle on the same connection (env_id < negotiated envs). */
  handleFor(envId: number): RemoteEnv {
    if (envId < 0 || envId >= this.spec.envs) {
      throw new EngineError(`env_id ${envId} outside negotiated range`);
    }
    return new RemoteEnv(this.connection, envId, this.spec);
  }

  get done(): boolean {
    return this.doneFlag;
  }

  private checkShapes(observations: Observation[]) {
    for (const obs of observations) {
      for (const [key, tensor] of obs) {
        const spec = this.spec.keys[key];
        if (!spec) throw new EngineError(`unnegotiated observation key ${key}`);
        if (spec.shape.length !== tensor.shape.length ||
            spec.shape.some((d, i) => d !== tensor.shape[i])) {
          throw new EngineError(
            `key ${key}: shape ${tensor.shape} differs from negotiated ${spec.shape}`);
        }
      }
    }
  }

  async reset(seed: bigint | number): Promise<StepResult> {
    const reply = await this.connection.request(this.envId, MsgType.RESET, encodeReset(seed));
    if (reply.msgType === MsgType.ERROR) throw new EngineError(reply.payload.toString("utf-8"));
    const result = decodeStepResult(reply.payload);
    this.checkShapes(result.observations);
    this.doneFlag = false;
    return result;
  }

  async step(actions: ArrayLike<number>[]): Promise<StepResult> {
    if (this.doneFlag) throw new EngineError("episode is done; call reset()");
    const payload = encodeActions(actions, this.spec.action.kind ?? ACTION_PRIMITIVE);
    const reply = await this.connection.request(this.envId, MsgType.STEP, payload);
    if (reply.msgType === MsgType.ERROR) throw new EngineError(reply.payload.toString("utf-8"));
    const result = decodeStepResult(reply.payload);
    this.checkShapes(result.observations);
    this.doneFlag = result.done;
    return result;
  }

  close() {
    this.connection.close();
  }
}
