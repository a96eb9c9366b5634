// ── RBT1 tensor codec ──
//
// Layout: 4 magic bytes "RBT1", one u8 rank (1..8), `rank` little-endian
// u32 dims, then the float32 values row-major.  Values must be finite.

import { readFile, writeFile } from "node:fs/promises";
import type { Tensor } from "./types.js";

const MAGIC = Buffer.from("RBT1", "ascii");
const MAX_RANK = 8;

/** Serialize a tensor into the RBT1 byte layout. */
export function encodeTensor(tensor: Tensor): Buffer {
  const { shape, data } = tensor;
  if (shape.length < 1 || shape.length > MAX_RANK) {
    throw new RangeError(`tensor rank must be 1..${MAX_RANK}, got ${shape.length}`);
  }
  let count = 1;
  for (const dim of shape) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new RangeError(`dims must be positive integers, got ${shape.join("x")}`);
    }
    count *= dim;
  }
  if (data.length !== count) {
    throw new RangeError(`shape ${shape.join("x")} needs ${count} values, got ${data.length}`);
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new RangeError(`non-finite value at flat index ${i}`);
    }
  }

  const header = Buffer.alloc(MAGIC.length + 1 + 4 * shape.length);
  MAGIC.copy(header, 0);
  header.writeUInt8(shape.length, MAGIC.length);
  shape.forEach((dim, i) => header.writeUInt32LE(dim, MAGIC.length + 1 + 4 * i));

  const payload = Buffer.alloc(4 * count);
  for (let i = 0; i < count; i++) {
    payload.writeFloatLE(data[i] as number, 4 * i);
  }
  return Buffer.concat([header, payload]);
}

/** Parse RBT1 bytes back into a tensor, validating every field. */
export function decodeTensor(bytes: Buffer): Tensor {
  if (bytes.length < MAGIC.length + 1 || !bytes.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new RangeError("not an RBT1 tensor (bad magic)");
  }
  const rank = bytes.readUInt8(MAGIC.length);
  if (rank < 1 || rank > MAX_RANK) {
    throw new RangeError(`rank must be 1..${MAX_RANK}, got ${rank}`);
  }
  const headerLen = MAGIC.length + 1 + 4 * rank;
  if (bytes.length < headerLen) {
    throw new RangeError("truncated RBT1 header");
  }
  const shape: number[] = [];
  let count = 1;
  for (let i = 0; i < rank; i++) {
    const dim = bytes.readUInt32LE(MAGIC.length + 1 + 4 * i);
    if (dim < 1) {
      throw new RangeError("zero dim in RBT1 header");
    }
    shape.push(dim);
    count *= dim;
  }
  if (bytes.length !== headerLen + 4 * count) {
    throw new RangeError(
      `RBT1 payload is ${bytes.length - headerLen} bytes, expected ${4 * count}`,
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    const v = bytes.readFloatLE(headerLen + 4 * i);
    if (!Number.isFinite(v)) {
      throw new RangeError(`non-finite value at flat index ${i}`);
    }
    data[i] = v;
  }
  return { shape, data };
}

/** Write a tensor as an `.rbt` file. */
export async function writeTensorFile(path: string, tensor: Tensor): Promise<void> {
  await writeFile(path, encodeTensor(tensor));
}

/** Read an `.rbt` file back into a tensor. */
export async function readTensorFile(path: string): Promise<Tensor> {
  return decodeTensor(await readFile(path));
}
