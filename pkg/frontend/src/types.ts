/** Shared types for the review console and its service API. */

export type LayerName =
  | "reported_outage"
  | "ping_cluster"
  | "ping_noise"
  | "predicted_centroid"
  | "asset";

export const LAYER_NAMES: LayerName[] = [
  "reported_outage",
  "ping_cluster",
  "ping_noise",
  "predicted_centroid",
  "asset",
];

export type Verdict = "accurate" | "inaccurate" | "unsure";

export interface OutageListItem {
  outage_id: string;
  start: string;
  end: string;
  has_prediction: boolean;
  confidence: number | null;
  latest_verdict: Verdict | null;
}

export interface PredictionRecord {
  outage_id: string;
  lat?: number;
  lon?: number;
  confidence?: number;
  eps_m?: number;
  min_pts?: number;
  noise_count?: number;
  failure_reason?: string | null;
}

export interface Stats {
  n_verified: number;
  n_accurate: number;
  accuracy: number | null;
}

export interface GeoJsonFeature {
  type: "Feature";
  geometry: {
    type: "Point" | "LineString";
    coordinates: number[] | number[][];
  };
  properties: Record<string, unknown> & { layer: LayerName };
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: GeoJsonFeature[];
}

export interface ParamDraft {
  auto: boolean;
  eps_m: number;
  min_pts: number;
  seed: number;
}

export interface ConsoleConfig {
  serviceBaseUrl: string;
  tileUrl: string | null;
}
