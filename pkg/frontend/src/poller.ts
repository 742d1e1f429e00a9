// Interval-driven polling with injectable timers so tests can use fakes.

export class Poller {
  private handle: ReturnType<typeof setInterval> | null = null;

  constructor(
    private fn: () => void | Promise<void>,
    private intervalMs: number,
  ) {}

  start(): void {
    if (this.handle !== null) return;
    void Promise.resolve(this.fn()).catch(() => {});
    this.handle = setInterval(() => {
      void Promise.resolve(this.fn()).catch(() => {});
    }, this.intervalMs);
  }

  stop(): void {
    if (this.handle !== null) {
      clearInterval(this.handle);
      this.handle = null;
    }
  }

  get running(): boolean {
    return this.handle !== null;
  }
}
