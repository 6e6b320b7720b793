/**
 * Latest-wins rate limiter for outgoing pose messages: at most `ratePerSec`
 * sends per second regardless of input rate; a burst keeps only the newest
 * value, delivered when the rate window reopens.
 */

export class LatestWinsThrottle<T> {
  private lastSent = -Infinity;
  private pending: T | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly ratePerSec: number,
    private readonly send: (value: T) => void,
    private readonly now: () => number = () => Date.now(),
  ) {}

  get intervalMs(): number {
    return 1000 / this.ratePerSec;
  }

  push(value: T): void {
    const t = this.now();
    if (t - this.lastSent >= this.intervalMs) {
      this.lastSent = t;
      this.send(value);
      return;
    }
    this.pending = value; // supersedes anything already waiting
    if (this.timer === null) {
      const delay = Math.max(0, this.lastSent + this.intervalMs - t);
      this.timer = setTimeout(() => this.flush(), delay);
    }
  }

  private flush(): void {
    this.timer = null;
    if (this.pending === null) return;
    const value = this.pending;
    this.pending = null;
    // anchor to the logical schedule so timer jitter cannot raise the rate
    this.lastSent = Math.max(this.now(), this.lastSent + this.intervalMs);
    this.send(value);
  }

  dispose(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
  }
}
