/** Browser wiring: outage list, map pane, rerun controls, verdict panel. */

import { ApiError, ServiceClient } from "./api.js";
import {
  epsToSlider,
  formatStatsStrip,
  initialViewState,
  sliderToEps,
  validateNote,
  validateParams,
  verdictBadge,
  verdictButtonsEnabled,
  ViewState,
} from "./state.js";
import { legendEntries, renderMapSvg } from "./render.js";
import type { ConsoleConfig, FeatureCollection, LayerName, Verdict } from "./types.js";

const state: ViewState = initialViewState();
let client: ServiceClient;
let currentLayers: FeatureCollection | null = null;
let currentEtag: string | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function loadConfig(): Promise<ConsoleConfig> {
  try {
    const resp = await fetch("./config.json");
    if (resp.ok) {
      return (await resp.json()) as ConsoleConfig;
    }
  } catch {
    // fall through to default
  }
  return { serviceBaseUrl: "http://127.0.0.1:8800", tileUrl: null };
}

function setBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
}

async function refreshStats(): Promise<void> {
  try {
    const stats = await client.stats();
    el<HTMLDivElement>("stats-strip").textContent = formatStatsStrip(stats);
  } catch {
    el<HTMLDivElement>("stats-strip").textContent = "stats unavailable";
  }
}

async function refreshOutageList(): Promise<void> {
  const listNode = el<HTMLUListElement>("outage-list");
  try {
    const items = await client.listOutages();
    setBanner(null);
    listNode.innerHTML = "";
    if (items.length === 0) {
      listNode.innerHTML = "<li class='empty'>No outages in this run.</li>";
      return;
    }
    for (const item of items) {
      const li = document.createElement("li");
      li.className = item.outage_id === state.selectedOutageId ? "selected" : "";
      const conf =
        item.has_prediction && item.confidence !== null
          ? ` conf ${item.confidence.toFixed(2)}`
          : " (no prediction)";
      li.textContent = `${item.outage_id}${conf} ${verdictBadge(item.latest_verdict)}`;
      li.onclick = () => void selectOutage(item.outage_id);
      listNode.appendChild(li);
    }
  } catch {
    setBanner("Service unreachable. Retry?");
  }
}

function redrawMap(): void {
  const pane = el<HTMLDivElement>("map-pane");
  if (!currentLayers) {
    pane.innerHTML = "<p class='empty'>Select an outage.</p>";
    return;
  }
  pane.innerHTML = renderMapSvg(currentLayers, {
    width: pane.clientWidth || 800,
    height: 560,
    toggles: state.layerToggles,
  });
  const legendNode = el<HTMLDivElement>("legend");
  legendNode.innerHTML = "";
  for (const entry of legendEntries(currentLayers)) {
    const row = document.createElement("label");
    row.innerHTML =
      `<input type="checkbox" ${state.layerToggles[entry.layer] ? "checked" : ""}/>` +
      `<span class="swatch" style="background:${entry.color}"></span>${entry.label}`;
    const box = row.querySelector("input")!;
    box.onchange = () => {
      state.layerToggles[entry.layer] = box.checked;
      redrawMap();
    };
    legendNode.appendChild(row);
  }
}

async function selectOutage(outageId: string): Promise<void> {
  state.selectedOutageId = outageId;
  const { collection, etag } = await client.layers(outageId);
  currentLayers = collection;
  currentEtag = etag;
  redrawMap();
  await refreshOutageList();
  updateControls();
}

function updateControls(): void {
  const enabled = verdictButtonsEnabled(state);
  for (const verdict of ["accurate", "inaccurate", "unsure"] as Verdict[]) {
    el<HTMLButtonElement>(`verdict-${verdict}`).disabled = !enabled;
  }
  el<HTMLButtonElement>("rerun-manual").disabled = state.pendingRequest;
  el<HTMLButtonElement>("rerun-auto").disabled = state.pendingRequest;
}

async function rerun(auto: boolean): Promise<void> {
  if (!state.selectedOutageId || state.pendingRequest) {
    return;
  }
  state.paramDraft.auto = auto;
  const validation = validateParams(state.paramDraft);
  el<HTMLSpanElement>("eps-error").textContent = validation.errors.eps_m ?? "";
  el<HTMLSpanElement>("minpts-error").textContent = validation.errors.min_pts ?? "";
  if (!validation.ok) {
    return;
  }
  state.pendingRequest = true;
  updateControls();
  try {
    if (auto) {
      await client.predictAuto(state.selectedOutageId, state.paramDraft.seed);
    } else {
      await client.predictManual(
        state.selectedOutageId,
        state.paramDraft.eps_m,
        state.paramDraft.min_pts,
      );
    }
    const { collection, etag } = await client.layers(state.selectedOutageId);
    if (etag !== currentEtag) {
      currentLayers = collection;
      currentEtag = etag;
      redrawMap();
    }
    await refreshOutageList();
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      setBanner("A prediction for this outage is already in progress.");
    } else if (err instanceof ApiError && err.status === 422) {
      el<HTMLSpanElement>("eps-error").textContent = "rejected by service";
    } else {
      setBanner("Rerun failed. Retry?");
    }
  } finally {
    state.pendingRequest = false;
    updateControls();
  }
}

async function submitVerdict(verdict: Verdict): Promise<void> {
  if (!state.selectedOutageId || state.pendingRequest) {
    return;
  }
  const note = el<HTMLTextAreaElement>("verdict-note").value;
  const noteError = validateNote(note);
  el<HTMLSpanElement>("note-error").textContent = noteError ?? "";
  if (noteError) {
    return;
  }
  const reviewer = el<HTMLInputElement>("reviewer").value || "anonymous";
  state.pendingRequest = true;
  updateControls();
  try {
    await client.submitVerdict(state.selectedOutageId, verdict, reviewer, note || undefined);
    el<HTMLTextAreaElement>("verdict-note").value = "";
    await refreshStats();
    await refreshOutageList();
  } catch {
    setBanner("Verdict failed; draft kept. Retry?");
  } finally {
    state.pendingRequest = false;
    updateControls();
  }
}

async function init(): Promise<void> {
  const config = await loadConfig();
  client = new ServiceClient(config.serviceBaseUrl);

  const slider = el<HTMLInputElement>("eps-slider");
  slider.value = String(epsToSlider(state.paramDraft.eps_m));
  slider.oninput = () => {
    state.paramDraft.eps_m = sliderToEps(Number(slider.value));
    el<HTMLSpanElement>("eps-value").textContent = `${state.paramDraft.eps_m} m`;
  };
  el<HTMLSpanElement>("eps-value").textContent = `${state.paramDraft.eps_m} m`;

  const minPts = el<HTMLInputElement>("min-pts");
  minPts.value = String(state.paramDraft.min_pts);
  minPts.onchange = () => {
    state.paramDraft.min_pts = Number(minPts.value);
  };

  el<HTMLButtonElement>("rerun-manual").onclick = () => void rerun(false);
  el<HTMLButtonElement>("rerun-auto").onclick = () => void rerun(true);
  for (const verdict of ["accurate", "inaccurate", "unsure"] as Verdict[]) {
    el<HTMLButtonElement>(`verdict-${verdict}`).onclick = () => void submitVerdict(verdict);
  }
  el<HTMLButtonElement>("retry").onclick = () => void refreshOutageList();

  await refreshOutageList();
  await refreshStats();
  updateControls();
}

void init();
