/** Wiring: one geojson fetch feeds the marker layer, the list, and the
 * header count, so the three can never disagree. The version poller
 * gates refetches; filters rebuild the query string on every change. */

import { ApiClient } from "./api.js";
import { renderList } from "./listview.js";
import { MapView } from "./mapview.js";
import { VersionPoller } from "./poller.js";
import { ThresholdEditor } from "./thresholds.js";
import { DEFAULT_FILTERS } from "./types.js";
import type { DashboardConfig, Filters } from "./types.js";

export interface App {
  api: ApiClient;
  map: MapView;
  editor: ThresholdEditor;
  poller: VersionPoller;
  refresh: () => Promise<void>;
  /** Resolves once thresholds and the first data load have settled. */
  ready: Promise<void>;
  stop: () => void;
}

export function wire(doc: Document, config: DashboardConfig): App {
  const $ = (id: string): HTMLElement => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing #${id}`);
    return el;
  };

  const api = new ApiClient(config.apiBase);
  const filters: Filters = { ...DEFAULT_FILTERS };

  const banner = $("banner");
  const showBanner = (text: string) => {
    banner.textContent = text;
    banner.classList.remove("hidden");
  };
  const hideBanner = () => banner.classList.add("hidden");

  let centered = false;
  const map = new MapView($("map"), {
    tileUrlTemplate: config.tileUrl,
    center: { lat: 0, lon: 0 },
    zoom: 16,
    onViewChange: () => {
      if (filters.bboxFromViewport) void refresh();
    },
  });
  $("zoom-in").addEventListener("click", () => map.zoomBy(1));
  $("zoom-out").addEventListener("click", () => map.zoomBy(-1));

  const rows = $("pothole-rows") as HTMLTableSectionElement;
  const countEl = $("event-count");
  const emptyEl = $("empty-notice");

  async function refresh(): Promise<void> {
    let fc;
    try {
      fc = await api.potholesGeojson(
        filters,
        filters.bboxFromViewport ? map.bounds() : null,
      );
    } catch (err) {
      if (err instanceof Error && err.name === "AbortError") return; // superseded
      showBanner("could not load potholes; showing last known data");
      return;
    }
    hideBanner();
    if (!centered && fc.features.length > 0) {
      // first data decides the initial viewport
      centered = true;
      const [lon, lat] = fc.features[0].geometry.coordinates;
      map.setView(lat, lon);
    }
    map.render(fc.features);
    renderList(rows, countEl, emptyEl, fc.features, (f) => {
      const [lon, lat] = f.geometry.coordinates;
      map.setView(lat, lon);
    });
  }

  const severitySel = $("filter-severity") as HTMLSelectElement;
  severitySel.addEventListener("change", () => {
    filters.minSeverity = severitySel.value as Filters["minSeverity"];
    void refresh();
  });
  const sinceInput = $("filter-since") as HTMLInputElement;
  sinceInput.addEventListener("change", () => {
    filters.sinceMs = sinceInput.value
      ? Date.parse(`${sinceInput.value}T00:00:00Z`)
      : null;
    void refresh();
  });
  const bboxToggle = $("filter-bbox") as HTMLInputElement;
  bboxToggle.addEventListener("change", () => {
    filters.bboxFromViewport = bboxToggle.checked;
    void refresh();
  });

  const editor = new ThresholdEditor(
    {
      base: $("th-base") as HTMLInputElement,
      cutoff: $("th-cutoff") as HTMLInputElement,
      accel: $("th-accel") as HTMLInputElement,
      save: $("th-save") as HTMLButtonElement,
      message: $("th-message"),
      active: $("th-active"),
    },
    api,
  );

  const staleEl = $("stale-indicator");
  const poller = new VersionPoller(
    api,
    () => refresh(),
    (stale) => staleEl.classList.toggle("hidden", !stale),
  );

  const ready = (async () => {
    try {
      await editor.load();
    } catch {
      showBanner("could not load potholes; showing last known data");
    }
    await poller.tick();
    poller.start(config.pollIntervalMs);
  })();

  return { api, map, editor, poller, refresh, ready, stop: () => poller.stop() };
}
