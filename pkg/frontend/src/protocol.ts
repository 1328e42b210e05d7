/**
 * Wire protocol for the pose websocket.
 *
 * Requests are JSON: { seq, root_translation: [x,y,z], rotations: [[w,x,y,z], ...] }.
 * Replies are binary: a 12-byte little-endian header (u64 sequence number,
 * u32 vertex count) followed by count*3 float32 positions, or a JSON error
 * object { seq, message } when the pose could not be solved.
 */

import type { Quat, Vec3 } from "./quat.js";

export const HEADER_BYTES = 12;

export interface FramePayload {
  seq: number;
  count: number;
  /** View into the received buffer; uploaded to the GPU as-is. */
  positions: Float32Array;
}

export function decodeFrame(buffer: ArrayBuffer): FramePayload {
  if (buffer.byteLength < HEADER_BYTES) {
    throw new Error(`truncated frame: ${buffer.byteLength} bytes, header needs ${HEADER_BYTES}`);
  }
  const view = new DataView(buffer);
  const seqBig = view.getBigUint64(0, true);
  if (seqBig > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new Error(`sequence number ${seqBig} exceeds the safe integer range`);
  }
  const count = view.getUint32(8, true);
  const expected = HEADER_BYTES + count * 12;
  if (buffer.byteLength < expected) {
    throw new Error(`truncated frame: ${buffer.byteLength} bytes, expected ${expected}`);
  }
  return {
    seq: Number(seqBig),
    count,
    positions: new Float32Array(buffer, HEADER_BYTES, count * 3),
  };
}

export function encodePose(seq: number, rootTranslation: Vec3, rotations: Quat[]): string {
  return JSON.stringify({
    seq,
    root_translation: rootTranslation,
    rotations,
  });
}

export interface ServerError {
  seq: number | null;
  message: string;
}

/** Parse a text reply; the service only sends text on errors. */
export function decodeError(text: string): ServerError {
  const parsed = JSON.parse(text);
  if (typeof parsed !== "object" || parsed === null || typeof parsed.message !== "string") {
    throw new Error(`unexpected text frame: ${text.slice(0, 120)}`);
  }
  return { seq: parsed.seq ?? null, message: parsed.message };
}
