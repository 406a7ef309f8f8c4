/** View-state logic kept free of DOM so it can be unit-tested. */

import type { LayerName, ParamDraft, Stats, Verdict } from "./types.js";
import { LAYER_NAMES } from "./types.js";

export const EPS_MIN_M = 10;
export const EPS_MAX_M = 1000;
export const MAX_NOTE_LENGTH = 2000;

export interface ViewState {
  selectedOutageId: string | null;
  layerToggles: Record<LayerName, boolean>;
  paramDraft: ParamDraft;
  pendingRequest: boolean;
}

export function initialViewState(): ViewState {
  const toggles = {} as Record<LayerName, boolean>;
  for (const name of LAYER_NAMES) {
    toggles[name] = true;
  }
  return {
    selectedOutageId: null,
    layerToggles: toggles,
    paramDraft: { auto: false, eps_m: 100, min_pts: 4, seed: 0 },
    pendingRequest: false,
  };
}

export interface ParamValidation {
  ok: boolean;
  errors: { eps_m?: string; min_pts?: string };
}

export function validateParams(draft: ParamDraft): ParamValidation {
  if (draft.auto) {
    return { ok: true, errors: {} };
  }
  const errors: ParamValidation["errors"] = {};
  if (!Number.isFinite(draft.eps_m) || draft.eps_m < EPS_MIN_M || draft.eps_m > EPS_MAX_M) {
    errors.eps_m = `eps must be ${EPS_MIN_M}-${EPS_MAX_M} m`;
  }
  if (!Number.isInteger(draft.min_pts) || draft.min_pts < 1) {
    errors.min_pts = "min_pts must be an integer >= 1";
  }
  return { ok: Object.keys(errors).length === 0, errors };
}

export function validateNote(note: string): string | null {
  return note.length > MAX_NOTE_LENGTH ? `note exceeds ${MAX_NOTE_LENGTH} characters` : null;
}

/** Slider position in [0, 1] <-> eps in meters, log scale. */
export function sliderToEps(position: number): number {
  const clamped = Math.min(1, Math.max(0, position));
  const logEps = Math.log(EPS_MIN_M) + clamped * (Math.log(EPS_MAX_M) - Math.log(EPS_MIN_M));
  return Math.round(Math.exp(logEps) * 10) / 10;
}

export function epsToSlider(epsM: number): number {
  const clamped = Math.min(EPS_MAX_M, Math.max(EPS_MIN_M, epsM));
  return (Math.log(clamped) - Math.log(EPS_MIN_M)) / (Math.log(EPS_MAX_M) - Math.log(EPS_MIN_M));
}

/** Verdict buttons stay disabled while a request is in flight. */
export function verdictButtonsEnabled(state: ViewState): boolean {
  return !state.pendingRequest && state.selectedOutageId !== null;
}

export function formatStatsStrip(stats: Stats): string {
  if (stats.accuracy === null) {
    return `${stats.n_verified} verified, no accuracy yet`;
  }
  const pct = Math.round(stats.accuracy * 100);
  return `${stats.n_verified} verified, ${stats.n_accurate} accurate (${pct}%)`;
}

export function verdictBadge(verdict: Verdict | null): string {
  switch (verdict) {
    case "accurate":
      return "✓ accurate";
    case "inaccurate":
      return "✗ inaccurate";
    case "unsure":
      return "? unsure";
    default:
      return "";
  }
}
