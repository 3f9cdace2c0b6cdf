/** Browser entry point: load the runtime config that ships next to the
 * bundle, then wire the page. Kept separate from app.ts so tests can
 * wire a document with an explicit config instead. */

import { wire } from "./app.js";
import type { DashboardConfig } from "./types.js";

async function boot(): Promise<void> {
  const resp = await fetch(new URL("../config.json", import.meta.url));
  const config = (await resp.json()) as DashboardConfig;
  wire(document, config);
}

void boot();
