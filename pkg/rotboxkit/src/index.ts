// Types
export type {
  Box,
  BoxArray,
  BoxTuple,
  DecodeOptions,
  Delta,
  EvalImage,
  EvalOptions,
  EvalSummary,
  KeptDetection,
  NmsResult,
  RoiAlignOptions,
  Tensor,
} from "./types.js";

// Operations
export {
  batchIou,
  batchNms,
  decodeBoxes,
  encodeDeltas,
  evaluateDetections,
  roiAlign,
  toBoxes,
} from "./kernels.js";

// Plumbing
export { CliError, cliCommand, runCli, runCliJson } from "./cli.js";

// Tensor files
export { decodeTensor, encodeTensor, readTensorFile, writeTensorFile } from "./rbt.js";
