/** Scrolling trace storage. Holds exactly the points that were pushed;
 * rendering may connect them but nothing here invents samples. */

export interface TracePoint {
  t: number;
  value: number;
}

export class TraceBuffer {
  private buf: TracePoint[] = [];

  constructor(readonly capacity = 4096) {
    if (capacity < 1) throw new Error("trace capacity must be positive");
  }

  push(t: number, value: number): void {
    this.buf.push({ t, value });
    if (this.buf.length > this.capacity) {
      this.buf.splice(0, this.buf.length - this.capacity);
    }
  }

  get length(): number {
    return this.buf.length;
  }

  points(): readonly TracePoint[] {
    return this.buf;
  }

  /** Points with t >= tMin, oldest first. */
  window(tMin: number): TracePoint[] {
    return this.buf.filter((p) => p.t >= tMin);
  }

  last(): TracePoint | null {
    return this.buf.length ? this.buf[this.buf.length - 1]! : null;
  }

  clear(): void {
    this.buf.length = 0;
  }
}
