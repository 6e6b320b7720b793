import { describe, expect, it } from "vitest";

import { decodePacket, encodePacket, HEADER_BYTES, PacketError } from "../src/packet.js";

function rgba(width: number, height: number, seed = 1): Uint8Array {
  const out = new Uint8Array(4 * width * height);
  for (let i = 0; i < out.length; i++) out[i] = (i * seed * 2654435761) & 0xff;
  return out;
}

describe("packet codec", () => {
  it("round-trips rgba8_raw", () => {
    const color = rgba(32, 24);
    const buf = encodePacket(7, 123456789n, 32, 24, "rgba8_raw", color);
    const pkt = decodePacket(buf);
    expect(pkt.frameIndex).toBe(7);
    expect(pkt.timestampNs).toBe(123456789n);
    expect(pkt.width).toBe(32);
    expect(pkt.height).toBe(24);
    expect(pkt.encoding).toBe("rgba8_raw");
    expect(Array.from(pkt.payload)).toEqual(Array.from(color));
    expect(pkt.depthPreview).toBeNull();
  });

  it("round-trips a depth preview", () => {
    const color = rgba(8, 8);
    const depth = new Uint8Array(64).fill(128);
    const pkt = decodePacket(encodePacket(1, 2n, 8, 8, "rgba8_raw", color, depth));
    expect(pkt.depthPreview).not.toBeNull();
    expect(Array.from(pkt.depthPreview!)).toEqual(Array.from(depth));
  });

  it("carries png payloads opaquely", () => {
    const fakePng = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 1, 2, 3]);
    const pkt = decodePacket(encodePacket(3, 4n, 16, 16, "png", fakePng));
    expect(pkt.encoding).toBe("png");
    expect(Array.from(pkt.payload)).toEqual(Array.from(fakePng));
  });

  it("rejects truncated packets", () => {
    const buf = encodePacket(1, 1n, 8, 8, "rgba8_raw", rgba(8, 8));
    expect(() => decodePacket(buf.slice(0, HEADER_BYTES - 2))).toThrow(PacketError);
    expect(() => decodePacket(buf.slice(0, buf.byteLength - 3))).toThrow(PacketError);
  });

  it("rejects unknown encodings and bad flags", () => {
    const buf = new Uint8Array(encodePacket(1, 1n, 2, 2, "rgba8_raw", rgba(2, 2)));
    buf[16] = 0x55;
    expect(() => decodePacket(buf.buffer)).toThrow(PacketError);
    const png = new Uint8Array(encodePacket(1, 1n, 2, 2, "png", new Uint8Array([1, 2, 3])));
    png[16] = 0x81; // png with depth flag is invalid
    expect(() => decodePacket(png.buffer)).toThrow(PacketError);
  });

  it("never throws anything but PacketError on fuzz", () => {
    let failures = 0;
    for (let n = 0; n < 2000; n++) {
      const len = n % 97;
      const junk = new Uint8Array(len);
      for (let i = 0; i < len; i++) junk[i] = (n * 31 + i * 7) & 0xff;
      try {
        decodePacket(junk.buffer);
      } catch (err) {
        if (!(err instanceof PacketError)) failures += 1;
      }
    }
    expect(failures).toBe(0);
  });
});
