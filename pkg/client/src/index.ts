export { Connection, EngineError, RemoteEnv } from "./client";
export type { KeySpec, Negotiated, RemoteEnvConfig } from "./client";
export {
  ACTION_PRIMITIVE,
  ACTION_TORQUE,
  FrameReader,
  MsgType,
  ProtocolError,
  decodeObservation,
  decodeStepResult,
  decodeTensor,
  encodeActions,
  encodeFrame,
  encodeJson,
  encodeReset,
} from "./protocol";
export type { Frame, Observation, StepResult, Tensor } from "./protocol";
export {
  crossCorrelationLag,
  inverseWoodworth,
  localize,
  stackStereo,
  woodworthDelay,
} from "./itd";
export type { ItdEstimate } from "./itd";
