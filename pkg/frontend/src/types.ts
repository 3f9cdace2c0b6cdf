/** Wire and view-state types shared across the dashboard modules. */

export type SeverityLabel = "Normal" | "MaintenanceNeeded" | "Pothole";
export type ConfidenceLabel = "Low" | "High";

export interface EventProperties {
  event_id: string;
  severity: SeverityLabel;
  confidence: ConfidenceLabel;
  n_readings: number;
  first_seen_ms: number;
  last_seen_ms: number;
}

export interface PotholeFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: EventProperties;
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: PotholeFeature[];
}

export interface ThresholdSet {
  ultrasonic_base_in: number;
  severe_cutoff_in: number;
  accel_z_threshold: number;
  calibrated_at_ms?: number | null;
}

/** Runtime configuration loaded from config.json next to the bundle. */
export interface DashboardConfig {
  apiBase: string;
  tileUrl: string;
  pollIntervalMs: number;
}

/** min lon/lat, max lon/lat, matching the server's bbox query order. */
export interface Bbox {
  minLon: number;
  minLat: number;
  maxLon: number;
  maxLat: number;
}

export interface Filters {
  minSeverity: "" | "MaintenanceNeeded" | "Pothole";
  sinceMs: number | null;
  bboxFromViewport: boolean;
}

export const DEFAULT_FILTERS: Filters = {
  minSeverity: "",
  sinceMs: null,
  bboxFromViewport: false,
};
