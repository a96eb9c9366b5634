import { describe, expect, it } from "vitest";
import { decodeTensor, encodeTensor } from "../src/rbt.js";

describe("RBT1 codec", () => {
  it("round-trips a rank-3 tensor", () => {
    const data = new Float32Array([1, -2, 3.5, 0.25, 1e-3, 42, -0.125, 7, 0.5, 9, 10, 11]);
    const bytes = encodeTensor({ shape: [2, 2, 3], data });
    const back = decodeTensor(bytes);
    expect(back.shape).toStrictEqual([2, 2, 3]);
    expect(Array.from(back.data)).toStrictEqual(Array.from(data));
  });

  it("stores float32: doubles are rounded on encode", () => {
    const bytes = encodeTensor({ shape: [1], data: new Float32Array([0.1]) });
    const back = decodeTensor(bytes);
    expect(back.data[0]).toBe(Math.fround(0.1));
  });

  it("has the documented header layout", () => {
    const bytes = encodeTensor({ shape: [3], data: new Float32Array([0, 0, 0]) });
    expect(bytes.subarray(0, 4).toString("ascii")).toBe("RBT1");
    expect(bytes.readUInt8(4)).toBe(1);
    expect(bytes.readUInt32LE(5)).toBe(3);
    expect(bytes.length).toBe(4 + 1 + 4 + 12);
  });

  it("rejects bad magic", () => {
    const bytes = encodeTensor({ shape: [1], data: new Float32Array([1]) });
    bytes[0] = 0x58;
    expect(() => decodeTensor(bytes)).toThrow(/magic/);
  });

  it("rejects truncated payloads", () => {
    const bytes = encodeTensor({ shape: [4], data: new Float32Array([1, 2, 3, 4]) });
    expect(() => decodeTensor(bytes.subarray(0, bytes.length - 4))).toThrow(/payload/);
  });

  it("rejects shape/data mismatch and non-finite values", () => {
    expect(() => encodeTensor({ shape: [3], data: new Float32Array([1, 2]) })).toThrow(/3 values/);
    expect(() => encodeTensor({ shape: [1], data: new Float32Array([Infinity]) })).toThrow(
      /non-finite/,
    );
    expect(() => encodeTensor({ shape: [], data: new Float32Array([]) })).toThrow(/rank/);
    expect(() => encodeTensor({ shape: [0], data: new Float32Array([]) })).toThrow(/positive/);
  });
});
