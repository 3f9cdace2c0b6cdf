/** Pothole table: rows sorted by last-seen descending, row click pans
 * the map. Pure render function over the feature array so the list,
 * the marker layer, and the header count all derive from one fetch. */

import type { PotholeFeature } from "./types.js";

export function fmtTime(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19) + "Z";
}

export function sortByLastSeen(features: PotholeFeature[]): PotholeFeature[] {
  return [...features].sort(
    (a, b) =>
      b.properties.last_seen_ms - a.properties.last_seen_ms ||
      (a.properties.event_id < b.properties.event_id ? -1 : 1),
  );
}

export function renderList(
  tbody: HTMLTableSectionElement,
  countEl: HTMLElement,
  emptyEl: HTMLElement,
  features: PotholeFeature[],
  onRowClick: (f: PotholeFeature) => void,
): void {
  const sorted = sortByLastSeen(features);
  countEl.textContent = String(sorted.length);
  emptyEl.classList.toggle("hidden", sorted.length > 0);
  tbody.innerHTML = "";
  for (const f of sorted) {
    const p = f.properties;
    const tr = document.createElement("tr");
    tr.dataset.eventId = p.event_id;

    const sev = document.createElement("td");
    const badge = document.createElement("span");
    badge.className =
      "badge " + (p.severity === "MaintenanceNeeded" ? "badge-maint" : "badge-severe");
    badge.textContent = p.severity;
    sev.appendChild(badge);

    const id = document.createElement("td");
    id.textContent = p.event_id;
    const n = document.createElement("td");
    n.textContent = String(p.n_readings);
    const conf = document.createElement("td");
    conf.textContent = p.confidence;
    const last = document.createElement("td");
    last.textContent = fmtTime(p.last_seen_ms);

    tr.append(sev, id, n, conf, last);
    tr.addEventListener("click", () => onRowClick(f));
    tbody.appendChild(tr);
  }
}
