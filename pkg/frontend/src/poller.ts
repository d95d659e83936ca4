// Interval polling with a monotonic guard: when responses resolve out of
// order, a stale one must never overwrite newer state.

export class Poller<T> {
  private lastVersion = -Infinity;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private fetchFn: () => Promise<T>,
    private versionOf: (value: T) => number,
    private onUpdate: (value: T) => void,
    private onError: (err: unknown) => void = () => {},
    public intervalMs = 1000,
  ) {}

  async tick(): Promise<void> {
    let value: T;
    try {
      value = await this.fetchFn();
    } catch (err) {
      this.onError(err);
      return;
    }
    this.apply(value);
  }

  // exposed separately so tests can deliver responses in any order
  apply(value: T): void {
    const version = this.versionOf(value);
    if (version < this.lastVersion) {
      return;            // stale response; drop it
    }
    this.lastVersion = version;
    this.onUpdate(value);
  }

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => void this.tick(), this.intervalMs);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
