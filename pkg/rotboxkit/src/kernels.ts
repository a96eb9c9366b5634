// ── The six exposed operations ──
//
// Each call serializes its arguments into the rotbox file formats, runs
// one CLI subcommand in a child process, and parses the rotbox/1 JSON
// document back.  The functions hold no state; concurrent calls are
// independent.

import { writeFile } from "node:fs/promises";
import { join } from "node:path";
import { runCliJson, withScratchDir } from "./cli.js";
import { readTensorFile, writeTensorFile } from "./rbt.js";
import type {
  Box,
  BoxArray,
  DecodeOptions,
  Delta,
  EvalImage,
  EvalOptions,
  EvalSummary,
  NmsResult,
  RoiAlignOptions,
  Tensor,
} from "./types.js";

// ── Input normalization ──

function rowToBox(row: ArrayLike<number>, offset: number): Box {
  return {
    x: Number(row[offset + 0]),
    y: Number(row[offset + 1]),
    w: Number(row[offset + 2]),
    h: Number(row[offset + 3]),
    theta: Number(row[offset + 4]),
  };
}

/**
 * Accept any {@link BoxArray} layout and return plain box objects.  Flat
 * buffers must have length 5 N; `Float32Array` values widen to the exact
 * double each 32-bit value represents (`Math.fround` round trip), which is
 * the value the core receives.
 */
export function toBoxes(boxes: BoxArray): Box[] {
  if (boxes instanceof Float64Array || boxes instanceof Float32Array) {
    if (boxes.length % 5 !== 0) {
      throw new RangeError(`flat box buffer length ${boxes.length} is not a multiple of 5`);
    }
    const out: Box[] = [];
    for (let i = 0; i < boxes.length; i += 5) {
      out.push(rowToBox(boxes, i));
    }
    return out;
  }
  return boxes.map((entry) => {
    if (Array.isArray(entry)) {
      if (entry.length !== 5) {
        throw new RangeError(`box row has ${entry.length} fields, expected 5`);
      }
      return rowToBox(entry, 0);
    }
    const box = entry as Box;
    return { x: box.x, y: box.y, w: box.w, h: box.h, theta: box.theta };
  });
}

async function writeBoxesFile(dir: string, name: string, boxes: Box[]): Promise<string> {
  const path = join(dir, name);
  await writeFile(path, JSON.stringify({ boxes }));
  return path;
}

// ── Operations ──

/**
 * Overlap matrix between two box batches: entry (i, j) is the skew IoU of
 * `a[i]` and `b[j]`, computed on the true rotated hulls.
 *
 * CLI equivalent: `rotbox iou --batch-a a.json --batch-b b.json` with
 * `{"boxes": [{"x", "y", "w", "h", "theta"}, ...]}` files; the result is
 * the document's `iou_matrix`.
 */
export async function batchIou(a: BoxArray, b: BoxArray): Promise<number[][]> {
  const boxesA = toBoxes(a);
  const boxesB = toBoxes(b);
  return withScratchDir(async (dir) => {
    const pathA = await writeBoxesFile(dir, "a.json", boxesA);
    const pathB = await writeBoxesFile(dir, "b.json", boxesB);
    const doc = await runCliJson(["iou", "--batch-a", pathA, "--batch-b", pathB]);
    return doc.iou_matrix as number[][];
  });
}

/**
 * Greedy non-maximum suppression over scored rotated boxes.  Returns the
 * kept input indices (highest score first, ties by input order) and the
 * surviving detections; the keep list and order are identical to the
 * core's `rotated_nms`.
 *
 * CLI equivalent: `rotbox nms --in dets.json --iou <t> --mode rotated`
 * with `{"detections": [{"box": {...}, "score": s}, ...]}`; `keep` and
 * `detections` are echoed from the document.  Both top-k caps are pinned
 * to the batch size so they never bind and the result depends only on the
 * threshold.
 */
export async function batchNms(
  boxes: BoxArray,
  scores: ArrayLike<number>,
  iouThreshold: number,
): Promise<NmsResult> {
  const plain = toBoxes(boxes);
  if (plain.length !== scores.length) {
    throw new RangeError(`${plain.length} boxes but ${scores.length} scores`);
  }
  const detections = plain.map((box, i) => ({ box, score: Number(scores[i]) }));
  return withScratchDir(async (dir) => {
    const path = join(dir, "dets.json");
    await writeFile(path, JSON.stringify({ detections }));
    const doc = await runCliJson([
      "nms",
      "--in", path,
      "--iou", String(iouThreshold),
      "--mode", "rotated",
      "--pre-topk", String(detections.length),
      "--post-topk", String(detections.length),
    ]);
    return { keep: doc.keep, detections: doc.detections };
  });
}

/**
 * Regression targets relating each target box to its anchor; inverse of
 * {@link decodeBoxes}.  The two batches pair up positionally and must have
 * equal length.
 *
 * CLI equivalent: `rotbox encode --anchors a.json --targets t.json`; the
 * result is the document's `deltas`
 * (`[{"t_x", "t_y", "t_w", "t_h", "t_theta"}, ...]`).
 */
export async function encodeDeltas(anchors: BoxArray, targets: BoxArray): Promise<Delta[]> {
  const anchorBoxes = toBoxes(anchors);
  const targetBoxes = toBoxes(targets);
  return withScratchDir(async (dir) => {
    const pathA = await writeBoxesFile(dir, "anchors.json", anchorBoxes);
    const pathT = await writeBoxesFile(dir, "targets.json", targetBoxes);
    const doc = await runCliJson(["encode", "--anchors", pathA, "--targets", pathT]);
    return doc.deltas as Delta[];
  });
}

/**
 * Apply regression deltas to anchors, producing canonicalized boxes.
 * Size deltas are capped at `clamp` (default 8) before exponentiation;
 * with `noClamp` an out-of-range delta rejects instead (error code
 * `decode-overflow`).
 *
 * CLI equivalent: `rotbox decode --anchors a.json --deltas d.json
 * [--clamp C | --no-clamp]`; the result is the document's `boxes`.
 */
export async function decodeBoxes(
  anchors: BoxArray,
  deltas: readonly Delta[],
  options: DecodeOptions = {},
): Promise<Box[]> {
  const anchorBoxes = toBoxes(anchors);
  return withScratchDir(async (dir) => {
    const pathA = await writeBoxesFile(dir, "anchors.json", anchorBoxes);
    const pathD = join(dir, "deltas.json");
    await writeFile(pathD, JSON.stringify({ deltas }));
    const args = ["decode", "--anchors", pathA, "--deltas", pathD];
    if (options.noClamp) {
      args.push("--no-clamp");
    } else if (options.clamp !== undefined) {
      args.push("--clamp", String(options.clamp));
    }
    const doc = await runCliJson(args);
    return doc.boxes as Box[];
  });
}

/**
 * Precision/recall over per-image detections and ground truths using
 * greedy one-to-one matching.
 *
 * CLI equivalent: `rotbox eval --in eval.json --iou-threshold T
 * --score-threshold S --criterion rotated|circumscribed` with
 * `{"images": [{"id", "gts": [box...], "dets": [{"box", "score"}...],
 * "ignores": [box...]}]}`; the summary document is returned as is.
 */
export async function evaluateDetections(
  images: readonly EvalImage[],
  options: EvalOptions = {},
): Promise<EvalSummary> {
  return withScratchDir(async (dir) => {
    const path = join(dir, "eval.json");
    await writeFile(path, JSON.stringify({ images }));
    const args = ["eval", "--in", path];
    if (options.iouThreshold !== undefined) {
      args.push("--iou-threshold", String(options.iouThreshold));
    }
    if (options.scoreThreshold !== undefined) {
      args.push("--score-threshold", String(options.scoreThreshold));
    }
    if (options.criterion) {
      args.push("--criterion", options.criterion);
    }
    const doc = await runCliJson(args);
    return {
      recall: doc.recall,
      precision: doc.precision,
      f_measure: doc.f_measure,
      tp: doc.tp,
      fp: doc.fp,
      fn: doc.fn,
    };
  });
}

/**
 * Pool a rotated proposal's circumscribed rectangle from a feature map
 * with bilinear ROI Align.  `feature` is a (C, H, W) tensor at `stride`
 * feature pixels per image pixel; the result is (C, outH, outW) float32.
 *
 * CLI equivalent: `rotbox roialign --feature f.rbt --proposal '{box}'
 * --stride S --out-h H --out-w W --samples K --out-tensor out.rbt`; the
 * pooled tensor round-trips through the RBT1 file.
 */
export async function roiAlign(
  feature: Tensor,
  proposal: Box,
  stride: number,
  options: RoiAlignOptions = {},
): Promise<Tensor> {
  if (feature.shape.length !== 3) {
    throw new RangeError(`feature must be rank 3 (C, H, W), got rank ${feature.shape.length}`);
  }
  return withScratchDir(async (dir) => {
    const featurePath = join(dir, "feature.rbt");
    const outPath = join(dir, "pooled.rbt");
    await writeTensorFile(featurePath, feature);
    const args = [
      "roialign",
      "--feature", featurePath,
      "--proposal", JSON.stringify(proposal),
      "--stride", String(stride),
      "--out-tensor", outPath,
    ];
    if (options.outH !== undefined) {
      args.push("--out-h", String(options.outH));
    }
    if (options.outW !== undefined) {
      args.push("--out-w", String(options.outW));
    }
    if (options.samples !== undefined) {
      args.push("--samples", String(options.samples));
    }
    await runCliJson(args);
    return readTensorFile(outPath);
  });
}
