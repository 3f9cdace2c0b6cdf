/** Change detection: poll the store version and invoke the refresh
 * callback only when it moved. A failed poll flips the stale indicator
 * but never clears data. */

import type { ApiClient } from "./api.js";

export class VersionPoller {
  private last: number | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private onChange: (version: number) => void | Promise<void>,
    private onStale: (stale: boolean) => void,
  ) {}

  async tick(): Promise<void> {
    let version: number;
    try {
      version = await this.api.version();
    } catch {
      this.onStale(true);
      return;
    }
    this.onStale(false);
    if (this.last === null || version !== this.last) {
      this.last = version;
      await this.onChange(version);
    }
  }

  start(intervalMs: number): void {
    void this.tick();
    this.timer = setInterval(() => void this.tick(), intervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }
}
