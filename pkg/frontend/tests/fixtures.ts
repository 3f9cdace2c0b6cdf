import type { PotholeFeature, SeverityLabel } from "../src/types.js";

export function feature(
  id: string,
  lon: number,
  lat: number,
  lastSeenMs: number,
  severity: SeverityLabel = "Pothole",
): PotholeFeature {
  return {
    type: "Feature",
    geometry: { type: "Point", coordinates: [lon, lat] },
    properties: {
      event_id: id,
      severity,
      confidence: severity === "Pothole" ? "High" : "Low",
      n_readings: 3,
      first_seen_ms: lastSeenMs - 60_000,
      last_seen_ms: lastSeenMs,
    },
  };
}
