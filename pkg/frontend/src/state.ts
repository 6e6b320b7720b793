/** Connection-level viewer state and the text-message reducer (DOM-free). */

import { RingBuffer } from "./ring.js";

export type ConnectionState = "connecting" | "connected" | "retrying" | "rejected" | "closed";

export interface StatusInfo {
  state: ConnectionState;
  objectIds: string[];
  serverLabel: string;
  clockOffsetNs: bigint;
  width: number | null;
  height: number | null;
  error: string | null;
}

export class ViewerState {
  status: StatusInfo = {
    state: "connecting",
    objectIds: [],
    serverLabel: "",
    clockOffsetNs: 0n,
    width: null,
    height: null,
    error: null,
  };
  selectedObjectId: string | null = null;
  lastFrameIndex = 0;
  telemetry = new Map<string, RingBuffer>();
  banner: string | null = null;

  constructor(public readonly ringCapacity: number = 2048) {}

  series(name: string): RingBuffer {
    let ring = this.telemetry.get(name);
    if (!ring) {
      ring = new RingBuffer(this.ringCapacity);
      this.telemetry.set(name, ring);
    }
    return ring;
  }
}

export type TextEffect = "status" | "telemetry" | "ignored" | "malformed";

/** Apply one text message from the gateway; returns what it was. */
export function applyTextMessage(state: ViewerState, text: string): TextEffect {
  let doc: any;
  try {
    doc = JSON.parse(text);
  } catch {
    state.banner = "undecodable message from gateway";
    return "malformed";
  }
  if (typeof doc !== "object" || doc === null || typeof doc.type !== "string") {
    state.banner = "malformed message from gateway";
    return "malformed";
  }
  if (doc.type === "status") {
    if (typeof doc.state === "string") state.status.state = doc.state as ConnectionState;
    if (Array.isArray(doc.object_ids)) {
      state.status.objectIds = doc.object_ids.filter((v: unknown) => typeof v === "string");
      if (state.selectedObjectId === null && state.status.objectIds.length > 0) {
        state.selectedObjectId = state.status.objectIds[0];
      }
    }
    if (typeof doc.server === "string") state.status.serverLabel = doc.server;
    if (typeof doc.clock_offset_ns === "number") {
      state.status.clockOffsetNs = BigInt(Math.round(doc.clock_offset_ns));
    }
    if (typeof doc.width === "number") state.status.width = doc.width;
    if (typeof doc.height === "number") state.status.height = doc.height;
    state.status.error = typeof doc.error === "string" ? doc.error : null;
    return "status";
  }
  if (doc.type === "telemetry") {
    if (typeof doc.series === "string" && typeof doc.t === "number" && typeof doc.value === "number") {
      state.series(doc.series).push({ t: doc.t, value: doc.value });
      return "telemetry";
    }
    state.banner = "malformed telemetry message";
    return "malformed";
  }
  if (doc.type === "error") {
    state.banner = `server error: ${doc.code ?? "?"} ${doc.detail ?? ""}`;
    return "status";
  }
  return "ignored";
}

/** End-to-end latency estimate for a frame timestamp (same-host clocks). */
export function frameLatencyMs(state: ViewerState, timestampNs: bigint, nowEpochMs: number): number {
  const frameEpochNs = timestampNs + state.status.clockOffsetNs;
  return nowEpochMs - Number(frameEpochNs / 1_000_000n);
}
