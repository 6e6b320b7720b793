/**
 * Binary frame packets from the gateway:
 * [u32 frame_index][u64 timestamp_ns][u16 width][u16 height][u8 encoding][payload]
 * little-endian; encoding 0 = rgba8_raw, 1 = png; bit 0x80 flags an appended
 * width*height byte depth preview (rgba8_raw only).
 */

export const HEADER_BYTES = 17;
const FLAG_DEPTH = 0x80;

export type FrameEncoding = "rgba8_raw" | "png";

export interface FramePacket {
  frameIndex: number;
  timestampNs: bigint;
  width: number;
  height: number;
  encoding: FrameEncoding;
  /** raw RGBA bytes for rgba8_raw, PNG bytes for png */
  payload: Uint8Array;
  depthPreview: Uint8Array | null;
}

export class PacketError extends Error {}

export function decodePacket(buffer: ArrayBuffer): FramePacket {
  if (buffer.byteLength < HEADER_BYTES) {
    throw new PacketError(`packet too short: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  const frameIndex = view.getUint32(0, true);
  const timestampNs = view.getBigUint64(4, true);
  const width = view.getUint16(12, true);
  const height = view.getUint16(14, true);
  const code = view.getUint8(16);
  const hasDepth = (code & FLAG_DEPTH) !== 0;
  const base = code & 0x7f;

  const body = new Uint8Array(buffer, HEADER_BYTES);
  if (base === 0) {
    const colorLen = 4 * width * height;
    const expected = colorLen + (hasDepth ? width * height : 0);
    if (body.byteLength !== expected) {
      throw new PacketError(`payload is ${body.byteLength} bytes, expected ${expected}`);
    }
    return {
      frameIndex,
      timestampNs,
      width,
      height,
      encoding: "rgba8_raw",
      payload: body.subarray(0, colorLen),
      depthPreview: hasDepth ? body.subarray(colorLen) : null,
    };
  }
  if (base === 1) {
    if (hasDepth) {
      throw new PacketError("depth preview flag is invalid for png packets");
    }
    if (body.byteLength === 0) {
      throw new PacketError("empty png payload");
    }
    return { frameIndex, timestampNs, width, height, encoding: "png", payload: body, depthPreview: null };
  }
  throw new PacketError(`unknown encoding byte 0x${code.toString(16)}`);
}

/** Test helper and scripted-client encoder; mirrors the gateway layout. */
export function encodePacket(
  frameIndex: number,
  timestampNs: bigint,
  width: number,
  height: number,
  encoding: FrameEncoding,
  payload: Uint8Array,
  depthPreview: Uint8Array | null = null,
): ArrayBuffer {
  const total = HEADER_BYTES + payload.byteLength + (depthPreview ? depthPreview.byteLength : 0);
  const buffer = new ArrayBuffer(total);
  const view = new DataView(buffer);
  view.setUint32(0, frameIndex, true);
  view.setBigUint64(4, timestampNs, true);
  view.setUint16(12, width, true);
  view.setUint16(14, height, true);
  let code = encoding === "rgba8_raw" ? 0 : 1;
  if (depthPreview) code |= FLAG_DEPTH;
  view.setUint8(16, code);
  new Uint8Array(buffer, HEADER_BYTES, payload.byteLength).set(payload);
  if (depthPreview) {
    new Uint8Array(buffer, HEADER_BYTES + payload.byteLength).set(depthPreview);
  }
  return buffer;
}
