/** Web Mercator math for the slippy map: world pixel coordinates at a
 * given zoom, with 256 px tiles. Pure functions, no DOM. */

export const TILE_SIZE = 256;

export function worldSize(zoom: number): number {
  return TILE_SIZE * Math.pow(2, zoom);
}

export function lonToWorldX(lon: number, zoom: number): number {
  return ((lon + 180) / 360) * worldSize(zoom);
}

export function latToWorldY(lat: number, zoom: number): number {
  const rad = (lat * Math.PI) / 180;
  const merc = Math.log(Math.tan(Math.PI / 4 + rad / 2));
  return ((1 - merc / Math.PI) / 2) * worldSize(zoom);
}

export function worldXToLon(x: number, zoom: number): number {
  return (x / worldSize(zoom)) * 360 - 180;
}

export function worldYToLat(y: number, zoom: number): number {
  const merc = (1 - (2 * y) / worldSize(zoom)) * Math.PI;
  return ((2 * Math.atan(Math.exp(merc)) - Math.PI / 2) * 180) / Math.PI;
}

/** Fill a {z}/{x}/{y} template; x wraps around the antimeridian. */
export function tileUrl(template: string, z: number, x: number, y: number): string {
  const n = Math.pow(2, z);
  const wrapped = ((x % n) + n) % n;
  return template
    .replace("{z}", String(z))
    .replace("{x}", String(wrapped))
    .replace("{y}", String(y));
}
