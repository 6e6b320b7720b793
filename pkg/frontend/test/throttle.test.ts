import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { LatestWinsThrottle } from "../src/throttle.js";

describe("latest-wins throttle", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("limits a 1 kHz event stream to at most 61 sends per second", () => {
    const sent: string[] = [];
    const throttle = new LatestWinsThrottle<string>(60, (v) => sent.push(v));
    const seconds = 5;
    for (let i = 0; i < seconds * 1000; i++) {
      throttle.push(`m${i}`);
      vi.advanceTimersByTime(1); // one event per simulated millisecond
    }
    vi.runAllTimers();
    // fencepost send plus at most 60/s sustained
    expect(sent.length).toBeLessThanOrEqual(seconds * 60 + 1);
    expect(sent.length).toBeGreaterThanOrEqual(seconds * 55);
    // the final value is never lost
    expect(sent[sent.length - 1]).toBe(`m${seconds * 1000 - 1}`);
  });

  it("delivers a burst's newest value once the window opens", () => {
    const sent: string[] = [];
    const throttle = new LatestWinsThrottle<string>(10, (v) => sent.push(v));
    throttle.push("a");
    throttle.push("b");
    throttle.push("c");
    expect(sent).toEqual(["a"]); // first goes immediately
    vi.advanceTimersByTime(100);
    expect(sent).toEqual(["a", "c"]); // b superseded
  });

  it("sends nothing when idle", () => {
    const sent: string[] = [];
    new LatestWinsThrottle<string>(60, (v) => sent.push(v));
    vi.advanceTimersByTime(5000);
    expect(sent).toEqual([]);
  });

  it("dispose cancels pending output", () => {
    const sent: string[] = [];
    const throttle = new LatestWinsThrottle<string>(10, (v) => sent.push(v));
    throttle.push("a");
    throttle.push("b");
    throttle.dispose();
    vi.advanceTimersByTime(1000);
    expect(sent).toEqual(["a"]);
  });
});
