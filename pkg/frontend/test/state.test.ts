import { describe, expect, it } from "vitest";

import { applyTextMessage, frameLatencyMs, ViewerState } from "../src/state.js";

describe("viewer state reducer", () => {
  it("applies status messages", () => {
    const state = new ViewerState();
    const effect = applyTextMessage(
      state,
      JSON.stringify({
        type: "status",
        state: "connected",
        object_ids: ["scene", "extra"],
        server: "127.0.0.1:7420",
        clock_offset_ns: 12345,
        width: 64,
        height: 48,
      }),
    );
    expect(effect).toBe("status");
    expect(state.status.state).toBe("connected");
    expect(state.status.objectIds).toEqual(["scene", "extra"]);
    expect(state.selectedObjectId).toBe("scene");
    expect(state.status.width).toBe(64);
  });

  it("routes telemetry into per-series rings", () => {
    const state = new ViewerState();
    for (let i = 0; i < 5; i++) {
      applyTextMessage(state, JSON.stringify({ type: "telemetry", series: "fps", t: i, value: 60 }));
      applyTextMessage(state, JSON.stringify({ type: "telemetry", series: "render_ms", t: i, value: 2.5 }));
    }
    expect(state.telemetry.size).toBe(2);
    expect(state.series("fps").length).toBe(5);
    expect(state.series("fps").stats().mean).toBe(60);
  });

  it("flags malformed messages without throwing", () => {
    const state = new ViewerState();
    expect(applyTextMessage(state, "not json")).toBe("malformed");
    expect(state.banner).not.toBeNull();
    expect(applyTextMessage(state, '{"no_type":1}')).toBe("malformed");
    expect(applyTextMessage(state, '{"type":"telemetry","series":7}')).toBe("malformed");
    // unknown types are tolerated quietly
    expect(applyTextMessage(state, '{"type":"future_thing"}')).toBe("ignored");
  });

  it("estimates latency with the advertised clock offset", () => {
    const state = new ViewerState();
    applyTextMessage(state, JSON.stringify({ type: "status", clock_offset_ns: 1_000_000_000 }));
    // frame stamped at monotonic 2s; offset 1s; now = 3.5s epoch
    const latency = frameLatencyMs(state, 2_000_000_000n, 3500);
    expect(latency).toBeCloseTo(500, 6);
  });
});
