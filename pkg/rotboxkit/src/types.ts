// ── Shared types crossing the rotbox CLI boundary ──

/**
 * A rotated box: center (x, y) with x = column and y = row (origin
 * top-left), side lengths (w, h) and angle theta in degrees.  The core
 * canonicalizes theta into [-90, 0) on ingestion, swapping w/h as needed,
 * so any equivalent parameterization is accepted here.
 *
 * JSON form: `{"x": 0, "y": 0, "w": 10, "h": 70, "theta": -75}`
 */
export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
  theta: number;
}

/** One box as a plain `[x, y, w, h, theta]` row. */
export type BoxTuple = readonly [number, number, number, number, number];

/**
 * A batch of N boxes in any of three layouts:
 *
 * - an array of {@link Box} objects,
 * - an array of `[x, y, w, h, theta]` rows,
 * - a flat contiguous row-major buffer of length 5 N (`Float64Array` or
 *   `Float32Array`; 32-bit values are widened to double before they cross
 *   the boundary, so a `Float32Array` behaves exactly like the array of
 *   its widened values).
 */
export type BoxArray =
  | readonly Box[]
  | readonly BoxTuple[]
  | Float64Array
  | Float32Array;

/**
 * Regression offsets relating a box to its anchor.
 *
 * JSON form: `{"t_x": 0, "t_y": 0, "t_w": 0, "t_h": 0, "t_theta": 0}`
 */
export interface Delta {
  t_x: number;
  t_y: number;
  t_w: number;
  t_h: number;
  t_theta: number;
}

/** A detection retained by NMS, echoed back in kept order. */
export interface KeptDetection {
  box: Box;
  score: number;
  image_id: string;
}

/** Result of {@link batchNms}: kept input indices plus the survivors. */
export interface NmsResult {
  /** Indices into the input batch, highest score first. */
  keep: number[];
  detections: KeptDetection[];
}

/** One evaluated image: ground truths, scored detections, ignore zones. */
export interface EvalImage {
  id: string;
  gts: Box[];
  dets: { box: Box; score: number }[];
  ignores?: Box[];
}

/**
 * Counts and derived ratios from greedy detection/ground-truth matching.
 *
 * JSON form: `{"recall": 0.66, "precision": 0.5, "f_measure": 0.57,
 * "tp": 2, "fp": 2, "fn": 1}`
 */
export interface EvalSummary {
  recall: number;
  precision: number;
  f_measure: number;
  tp: number;
  fp: number;
  fn: number;
}

export interface EvalOptions {
  /** Minimum overlap for a detection to claim a ground truth (default 0.5). */
  iouThreshold?: number;
  /** Detections scoring below this are dropped up front (default 0.5). */
  scoreThreshold?: number;
  /** Overlap measured on true hulls or circumscribed rectangles. */
  criterion?: "rotated" | "circumscribed";
}

/** A dense tensor: row-major values with an explicit shape. */
export interface Tensor {
  shape: number[];
  /** `shape` product values, row-major, float32 precision. */
  data: Float32Array;
}

export interface RoiAlignOptions {
  /** Output grid height (default 7). */
  outH?: number;
  /** Output grid width (default 7). */
  outW?: number;
  /** Sampling points per bin side (default 2). */
  samples?: number;
}

export interface DecodeOptions {
  /** Cap |t_w|, |t_h| at this value before exponentiation (default 8). */
  clamp?: number;
  /** Reject out-of-range size deltas instead of clamping. */
  noClamp?: boolean;
}
