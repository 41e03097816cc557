/** Request pacing and ordering: a rate limiter that coalesces slider drags
 * to at most one dispatch per interval, and a sequence gate that drops
 * responses arriving after a newer one has already been applied. */

export const MIN_INTERVAL_MS = 250; // at most 5 requests in any 1 s window

export interface Clock {
  now(): number;
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(id: unknown): void;
}

const realClock: Clock = {
  now: () => Date.now(),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (id) => clearTimeout(id as Parameters<typeof clearTimeout>[0]),
};

/** Leading + trailing throttle: the first poke fires immediately, later
 * pokes within the interval collapse into one trailing fire with the most
 * recent payload, so a drag never exceeds the rate and always settles on
 * its final value. */
export class RateLimiter<T> {
  private lastFire = -Infinity;
  private pending: { payload: T } | null = null;
  private timer: unknown = null;

  constructor(
    private fire: (payload: T) => void,
    private intervalMs: number = MIN_INTERVAL_MS,
    private clock: Clock = realClock,
  ) {}

  poke(payload: T): void {
    const now = this.clock.now();
    if (now - this.lastFire >= this.intervalMs && this.timer === null) {
      this.lastFire = now;
      this.fire(payload);
      return;
    }
    this.pending = { payload };
    if (this.timer === null) {
      const wait = Math.max(0, this.lastFire + this.intervalMs - now);
      this.timer = this.clock.setTimeout(() => this.flush(), wait);
    }
  }

  private flush(): void {
    this.timer = null;
    if (this.pending === null) return;
    const { payload } = this.pending;
    this.pending = null;
    this.lastFire = this.clock.now();
    this.fire(payload);
  }
}

/** Monotone gate over request sequence numbers. A response may only be
 * applied if it is newer than everything applied so far. */
export class SequenceGate {
  private applied = 0;
  private issued = 0;

  next(): number {
    return ++this.issued;
  }

  accept(seq: number): boolean {
    if (seq <= this.applied) return false;
    this.applied = seq;
    return true;
  }
}
