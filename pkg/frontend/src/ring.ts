/** Fixed-capacity ring buffer for telemetry points. */

export interface TelemetryPoint {
  t: number;
  value: number;
}

export interface SeriesStats {
  count: number;
  min: number;
  mean: number;
  max: number;
}

export class RingBuffer {
  private data: TelemetryPoint[];
  private head = 0;
  private filled = 0;

  constructor(public readonly capacity: number = 2048) {
    if (capacity <= 0) throw new Error("capacity must be positive");
    this.data = new Array(capacity);
  }

  get length(): number {
    return this.filled;
  }

  push(point: TelemetryPoint): void {
    this.data[this.head] = point;
    this.head = (this.head + 1) % this.capacity;
    if (this.filled < this.capacity) this.filled += 1;
  }

  /** Oldest-to-newest snapshot. */
  toArray(): TelemetryPoint[] {
    const out: TelemetryPoint[] = new Array(this.filled);
    const start = (this.head - this.filled + this.capacity) % this.capacity;
    for (let i = 0; i < this.filled; i++) {
      out[i] = this.data[(start + i) % this.capacity];
    }
    return out;
  }

  stats(): SeriesStats {
    if (this.filled === 0) return { count: 0, min: NaN, mean: NaN, max: NaN };
    let min = Infinity;
    let max = -Infinity;
    let sum = 0;
    const start = (this.head - this.filled + this.capacity) % this.capacity;
    for (let i = 0; i < this.filled; i++) {
      const v = this.data[(start + i) % this.capacity].value;
      if (v < min) min = v;
      if (v > max) max = v;
      sum += v;
    }
    return { count: this.filled, min, mean: sum / this.filled, max };
  }
}
