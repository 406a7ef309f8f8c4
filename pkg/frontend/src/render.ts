/** SVG rendering of the prediction layers. No tile dependency: features are
 * projected into the bounding box of the collection. A tile basemap can be
 * slotted underneath when config.tileUrl is set. */

import type { FeatureCollection, GeoJsonFeature, LayerName } from "./types.js";
import { LAYER_NAMES } from "./types.js";

/** Styling mirrors the cluster/noise/centroid/reported color conventions. */
export const LAYER_STYLES: Record<LayerName, { color: string; label: string; radius: number }> = {
  ping_cluster: { color: "#f5c518", label: "Crew vehicle points (cluster)", radius: 3.5 },
  ping_noise: { color: "#4477dd", label: "Crew vehicle points (noise)", radius: 2.5 },
  reported_outage: { color: "#dd2222", label: "Reported outage", radius: 7 },
  predicted_centroid: { color: "#11aa44", label: "Vehicle centroid (predicted location)", radius: 8 },
  asset: { color: "#888888", label: "Electric assets", radius: 4 },
};

/** Draw order: assets under pings, centroid above everything. */
export const Z_ORDER: LayerName[] = [
  "asset",
  "ping_noise",
  "ping_cluster",
  "reported_outage",
  "predicted_centroid",
];

export interface RenderOptions {
  width: number;
  height: number;
  toggles: Record<LayerName, boolean>;
}

interface Projector {
  (lonLat: number[]): [number, number];
}

function makeProjector(fc: FeatureCollection, width: number, height: number): Projector {
  let minLon = Infinity;
  let maxLon = -Infinity;
  let minLat = Infinity;
  let maxLat = -Infinity;
  for (const f of fc.features) {
    const coords =
      f.geometry?.type === "Point"
        ? [f.geometry.coordinates as number[]]
        : ((f.geometry?.coordinates ?? []) as number[][]);
    for (const c of coords) {
      if (!Array.isArray(c) || !Number.isFinite(c[0]) || !Number.isFinite(c[1])) {
        continue;
      }
      minLon = Math.min(minLon, c[0]);
      maxLon = Math.max(maxLon, c[0]);
      minLat = Math.min(minLat, c[1]);
      maxLat = Math.max(maxLat, c[1]);
    }
  }
  const spanLon = Math.max(maxLon - minLon, 1e-9);
  const spanLat = Math.max(maxLat - minLat, 1e-9);
  const pad = 20;
  return ([lon, lat]) => [
    pad + ((lon - minLon) / spanLon) * (width - 2 * pad),
    pad + ((maxLat - lat) / spanLat) * (height - 2 * pad),
  ];
}

function escapeAttr(value: unknown): string {
  return String(value).replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");
}

function renderFeature(f: GeoJsonFeature, project: Projector): string {
  const style = LAYER_STYLES[f.properties.layer];
  if (f.geometry.type === "LineString") {
    const pts = (f.geometry.coordinates as number[][])
      .map((c) => project(c).map((v) => v.toFixed(1)).join(","))
      .join(" ");
    return `<polyline points="${pts}" fill="none" stroke="${style.color}" stroke-width="2" data-layer="${f.properties.layer}"/>`;
  }
  const [x, y] = project(f.geometry.coordinates as number[]);
  const title =
    f.properties.layer === "ping_cluster" || f.properties.layer === "ping_noise"
      ? `<title>${escapeAttr(f.properties["vehicle_id"])} @ ${escapeAttr(f.properties["time"])}</title>`
      : "";
  return (
    `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="${style.radius}" ` +
    `fill="${style.color}" data-layer="${f.properties.layer}">${title}</circle>`
  );
}

/** Render the collection to an SVG string, honoring toggles and z-order.
 * Malformed features are skipped, never fatal. */
export function renderMapSvg(fc: FeatureCollection, opts: RenderOptions): string {
  const project = makeProjector(fc, opts.width, opts.height);
  const parts: string[] = [];
  for (const layer of Z_ORDER) {
    if (!opts.toggles[layer]) {
      continue;
    }
    for (const f of fc.features) {
      if (f?.properties?.layer !== layer || !f.geometry) {
        continue;
      }
      try {
        parts.push(renderFeature(f, project));
      } catch (err) {
        console.warn("skipping malformed feature", err);
      }
    }
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${opts.width}" height="${opts.height}" ` +
    `viewBox="0 0 ${opts.width} ${opts.height}">` +
    `<rect width="100%" height="100%" fill="#fafaf5"/>${parts.join("")}</svg>`
  );
}

export interface LegendEntry {
  layer: LayerName;
  label: string;
  color: string;
  present: boolean;
}

/** One legend entry per layer category, flagged by presence in the data. */
export function legendEntries(fc: FeatureCollection): LegendEntry[] {
  const present = new Set(fc.features.map((f) => f.properties.layer));
  return LAYER_NAMES.map((layer) => ({
    layer,
    label: LAYER_STYLES[layer].label,
    color: LAYER_STYLES[layer].color,
    present: present.has(layer),
  }));
}
