/** Self-contained slippy map: a pane of 256 px tiles from a template
 * URL, severity-colored markers, and a single popup. No map library;
 * the Web Mercator math lives in mercator.ts, so everything renders
 * (and is testable) without layout or network. */

import {
  TILE_SIZE,
  latToWorldY,
  lonToWorldX,
  tileUrl,
  worldSize,
  worldXToLon,
  worldYToLat,
} from "./mercator.js";
import type { Bbox, PotholeFeature } from "./types.js";

export interface MapViewOptions {
  tileUrlTemplate: string;
  center: { lat: number; lon: number };
  zoom: number;
  /** Fired after any pan or zoom, for viewport-linked filters. */
  onViewChange?: () => void;
}

// jsdom reports zero client size; fall back so tile and marker math
// stays meaningful headless
const FALLBACK_W = 800;
const FALLBACK_H = 500;

function fmtTime(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19) + "Z";
}

export class MapView {
  private center: { lat: number; lon: number };
  private zoom: number;
  private features: PotholeFeature[] = [];
  private tilePane: HTMLDivElement;
  private markerPane: HTMLDivElement;
  private popupEl: HTMLDivElement;
  private popupFor: string | null = null;
  private dragFrom: { x: number; y: number } | null = null;

  constructor(private container: HTMLElement, private opts: MapViewOptions) {
    this.center = { ...opts.center };
    this.zoom = opts.zoom;
    this.container.classList.add("mapview");
    this.tilePane = document.createElement("div");
    this.tilePane.className = "tile-pane";
    this.markerPane = document.createElement("div");
    this.markerPane.className = "marker-pane";
    this.popupEl = document.createElement("div");
    this.popupEl.className = "map-popup hidden";
    this.container.append(this.tilePane, this.markerPane, this.popupEl);

    this.container.addEventListener("pointerdown", (e) => {
      this.dragFrom = { x: e.clientX, y: e.clientY };
    });
    this.container.addEventListener("pointermove", (e) => {
      if (!this.dragFrom) return;
      const dx = e.clientX - this.dragFrom.x;
      const dy = e.clientY - this.dragFrom.y;
      this.dragFrom = { x: e.clientX, y: e.clientY };
      this.panByPixels(-dx, -dy);
    });
    const endDrag = () => {
      this.dragFrom = null;
    };
    this.container.addEventListener("pointerup", endDrag);
    this.container.addEventListener("pointerleave", endDrag);

    this.redraw();
  }

  private size(): { w: number; h: number } {
    return {
      w: this.container.clientWidth || FALLBACK_W,
      h: this.container.clientHeight || FALLBACK_H,
    };
  }

  getCenter(): { lat: number; lon: number } {
    return { ...this.center };
  }

  getZoom(): number {
    return this.zoom;
  }

  setView(lat: number, lon: number, zoom?: number): void {
    this.center = { lat, lon };
    if (zoom !== undefined) this.zoom = zoom;
    this.redraw();
    this.opts.onViewChange?.();
  }

  zoomBy(delta: number): void {
    const z = Math.min(19, Math.max(1, this.zoom + delta));
    if (z !== this.zoom) this.setView(this.center.lat, this.center.lon, z);
  }

  private panByPixels(dx: number, dy: number): void {
    const x = lonToWorldX(this.center.lon, this.zoom) + dx;
    const y = latToWorldY(this.center.lat, this.zoom) + dy;
    this.setView(worldYToLat(y, this.zoom), worldXToLon(x, this.zoom));
  }

  /** Viewport bounds in the server's bbox order. */
  bounds(): Bbox {
    const { w, h } = this.size();
    const cx = lonToWorldX(this.center.lon, this.zoom);
    const cy = latToWorldY(this.center.lat, this.zoom);
    return {
      minLon: worldXToLon(cx - w / 2, this.zoom),
      minLat: worldYToLat(cy + h / 2, this.zoom),
      maxLon: worldXToLon(cx + w / 2, this.zoom),
      maxLat: worldYToLat(cy - h / 2, this.zoom),
    };
  }

  /** Replace the marker layer; the previous layer stays on fetch
   * failure simply because this is never called then. */
  render(features: PotholeFeature[]): void {
    this.features = features;
    if (this.popupFor && !features.some((f) => f.properties.event_id === this.popupFor)) {
      this.closePopup();
    }
    this.redraw();
  }

  markerCount(): number {
    return this.markerPane.childElementCount;
  }

  closePopup(): void {
    this.popupFor = null;
    this.popupEl.classList.add("hidden");
  }

  private openPopup(f: PotholeFeature, left: number, top: number): void {
    const p = f.properties;
    this.popupFor = p.event_id;
    this.popupEl.innerHTML = "";
    const title = document.createElement("strong");
    title.textContent = `${p.severity} (${p.event_id})`;
    const body = document.createElement("div");
    body.textContent =
      `${p.n_readings} readings, ${p.confidence} confidence\n` +
      `first seen ${fmtTime(p.first_seen_ms)}\n` +
      `last seen ${fmtTime(p.last_seen_ms)}`;
    const close = document.createElement("button");
    close.type = "button";
    close.className = "popup-close";
    close.textContent = "x";
    close.addEventListener("click", () => this.closePopup());
    this.popupEl.append(close, title, body);
    this.popupEl.style.left = `${left}px`;
    this.popupEl.style.top = `${top}px`;
    this.popupEl.classList.remove("hidden");
  }

  private redraw(): void {
    const { w, h } = this.size();
    const z = this.zoom;
    const originX = lonToWorldX(this.center.lon, z) - w / 2;
    const originY = latToWorldY(this.center.lat, z) - h / 2;

    this.tilePane.innerHTML = "";
    const maxTile = worldSize(z) / TILE_SIZE - 1;
    const x0 = Math.floor(originX / TILE_SIZE);
    const y0 = Math.max(0, Math.floor(originY / TILE_SIZE));
    const x1 = Math.floor((originX + w) / TILE_SIZE);
    const y1 = Math.min(maxTile, Math.floor((originY + h) / TILE_SIZE));
    for (let ty = y0; ty <= y1; ty++) {
      for (let tx = x0; tx <= x1; tx++) {
        const img = document.createElement("img");
        img.className = "tile";
        img.alt = "";
        img.src = tileUrl(this.opts.tileUrlTemplate, z, tx, ty);
        img.style.left = `${tx * TILE_SIZE - originX}px`;
        img.style.top = `${ty * TILE_SIZE - originY}px`;
        img.addEventListener("error", () => img.classList.add("tile-missing"));
        this.tilePane.appendChild(img);
      }
    }

    this.markerPane.innerHTML = "";
    for (const f of this.features) {
      const [lon, lat] = f.geometry.coordinates;
      const left = lonToWorldX(lon, z) - originX;
      const top = latToWorldY(lat, z) - originY;
      const m = document.createElement("div");
      m.className =
        "marker " +
        (f.properties.severity === "MaintenanceNeeded" ? "marker-maint" : "marker-severe");
      m.dataset.eventId = f.properties.event_id;
      m.title = f.properties.event_id;
      m.style.left = `${left}px`;
      m.style.top = `${top}px`;
      m.addEventListener("click", (e) => {
        e.stopPropagation();
        this.openPopup(f, left, top);
      });
      this.markerPane.appendChild(m);
      if (this.popupFor === f.properties.event_id) {
        this.popupEl.style.left = `${left}px`;
        this.popupEl.style.top = `${top}px`;
      }
    }
  }
}
