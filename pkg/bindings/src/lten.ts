/**
 * LTEN tensor files, the toolkit's on-disk array format.
 *
 * Layout (little-endian): magic "LTEN", u16 version = 1, u8 dtype (0 =
 * float32), u8 ndim, u32 dims each, float32 payload row-major.  Values are
 * stored as float32; callers holding float64 data accept that conversion at
 * this boundary.
 */

import * as fs from "node:fs";

const MAGIC = Buffer.from("LTEN", "ascii");
const VERSION = 1;
const DTYPE_FLOAT32 = 0;

export interface Tensor {
  /** row-major float64 view of the decoded float32 payload */
  data: Float64Array;
  shape: number[];
}

export function writeLten(path: string, data: ArrayLike<number>, shape: number[]): void {
  const count = shape.reduce((a, b) => a * b, 1);
  if (shape.length === 0 || shape.some((d) => !Number.isInteger(d) || d <= 0)) {
    throw new Error(`writeLten: invalid shape [${shape}]`);
  }
  if (data.length !== count) {
    throw new Error(`writeLten: data length ${data.length} does not match shape [${shape}]`);
  }
  const header = Buffer.alloc(8 + 4 * shape.length);
  MAGIC.copy(header, 0);
  header.writeUInt16LE(VERSION, 4);
  header.writeUInt8(DTYPE_FLOAT32, 6);
  header.writeUInt8(shape.length, 7);
  shape.forEach((dim, index) => header.writeUInt32LE(dim, 8 + 4 * index));

  const payload = Buffer.alloc(4 * count);
  for (let i = 0; i < count; i++) {
    payload.writeFloatLE(data[i], 4 * i);
  }
  fs.writeFileSync(path, Buffer.concat([header, payload]));
}

export function readLten(path: string): Tensor {
  const raw = fs.readFileSync(path);
  if (raw.length < 8 || !raw.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`readLten: ${path} is not an LTEN file`);
  }
  const version = raw.readUInt16LE(4);
  const dtype = raw.readUInt8(6);
  const ndim = raw.readUInt8(7);
  if (version !== VERSION) throw new Error(`readLten: unsupported version ${version}`);
  if (dtype !== DTYPE_FLOAT32) throw new Error(`readLten: unsupported dtype ${dtype}`);
  const shape: number[] = [];
  for (let i = 0; i < ndim; i++) {
    shape.push(raw.readUInt32LE(8 + 4 * i));
  }
  const offset = 8 + 4 * ndim;
  const count = shape.reduce((a, b) => a * b, 1);
  if (raw.length - offset !== 4 * count) {
    throw new Error(
      `readLten: payload is ${raw.length - offset} bytes, expected ${4 * count}`
    );
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = raw.readFloatLE(offset + 4 * i);
  }
  return { data, shape };
}
