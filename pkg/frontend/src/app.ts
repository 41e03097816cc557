/** DOM shell: wires the API client, sliders, material picker, scheduler and
 * field viewer into the single-page explorer. All logic with behavior worth
 * testing lives in the imported modules; this file only moves data between
 * them and the document. */

import { ApiClient, ApiError } from "./api.js";
import { hotspotCells } from "./grids.js";
import { renderGrid } from "./heatmap.js";
import { curveChart, groupByCluster, pickerEnabled } from "./materials.js";
import { RateLimiter } from "./scheduler.js";
import { sliderSpecs } from "./sliders.js";
import type { FieldsInfo, MaterialsCatalog, PredictRequest } from "./types.js";
import { FieldViewer } from "./viewer.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

interface UiState {
  geometry: Record<string, number>;
  materialId: number | null;
  field: string;
  hotspotOn: boolean;
}

function setBanner(message: string | null): void {
  const banner = $("banner");
  banner.textContent = message ?? "";
  banner.style.display = message ? "block" : "none";
  document.querySelectorAll("input, select").forEach((el) => {
    (el as HTMLInputElement).disabled = message !== null;
  });
}

function setErrorCard(message: string | null): void {
  const card = $("error-card");
  card.textContent = message ?? "";
  card.style.display = message ? "block" : "none";
}

function drawHeatmap(viewer: FieldViewer, hotspotOn: boolean): void {
  if (!viewer.current || !viewer.decoded) return;
  const canvas = $("heatmap") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { summary } = viewer.current;
  const img = renderGrid(viewer.decoded, {
    lo: summary.min,
    hi: summary.max,
    hotspot: hotspotOn ? hotspotCells(viewer.decoded) : undefined,
  });
  canvas.width = img.width;
  canvas.height = img.height;
  ctx.putImageData(new ImageData(img.data, img.width, img.height), 0, 0);
  $("readout").textContent = viewer.formatReadout();
  $("scale-lo").textContent = String(summary.min);
  $("scale-hi").textContent = String(summary.max);
  $("model-version").textContent = viewer.current.model_version.slice(0, 12);
  $("latency").textContent = `${summary.inference_ms.toFixed(1)} ms`;
}

function buildSliders(info: FieldsInfo, onChange: () => void, state: UiState): void {
  const host = $("sliders");
  host.innerHTML = "";
  for (const spec of sliderSpecs(info.parameter_ranges)) {
    state.geometry[spec.name] = spec.initial;
    const row = document.createElement("label");
    row.className = "slider-row";
    const title = document.createElement("span");
    title.textContent = spec.name;
    const value = document.createElement("output");
    value.textContent = String(spec.initial);
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = String(spec.step);
    input.value = String(spec.initial);
    input.addEventListener("input", () => {
      state.geometry[spec.name] = Number(input.value);
      value.textContent = input.value;
      onChange();
    });
    row.append(title, input, value);
    host.append(row);
  }
}

function buildMaterialPicker(
  catalog: MaterialsCatalog,
  onChange: () => void,
  state: UiState,
): void {
  const select = $("material") as unknown as HTMLSelectElement;
  select.innerHTML = "";
  select.disabled = !pickerEnabled(catalog);
  if (select.disabled) return;
  for (const group of groupByCluster(catalog)) {
    const og = document.createElement("optgroup");
    og.label = `cluster ${group.cluster}`;
    for (const m of group.materials) {
      const opt = document.createElement("option");
      opt.value = String(m.id);
      opt.textContent = `${catalog.family} #${m.id}`;
      og.append(opt);
    }
    select.append(og);
  }
  const drawCurve = () => {
    const id = Number(select.value);
    const m = catalog.materials.find((c) => c.id === id);
    if (!m) return;
    const chart = curveChart(m, 240, 120);
    $("curve-path").setAttribute("d", chart.pathD);
    $("curve-label").textContent =
      `strain 0..${chart.strainMax}  stress 0..${chart.stressMax} MPa`;
  };
  select.addEventListener("change", () => {
    state.materialId = Number(select.value);
    drawCurve();
    onChange();
  });
  state.materialId = Number(select.value);
  drawCurve();
}

function buildFieldPicker(info: FieldsInfo, onChange: () => void, state: UiState): void {
  const select = $("field") as unknown as HTMLSelectElement;
  select.innerHTML = "";
  for (const f of info.fields) {
    const opt = document.createElement("option");
    opt.value = f;
    opt.textContent = info.loaded.includes(f) ? f : `${f} (not loaded)`;
    opt.disabled = !info.loaded.includes(f);
    select.append(opt);
  }
  state.field = info.loaded[0] ?? info.fields[0];
  select.value = state.field;
  select.addEventListener("change", () => {
    state.field = select.value;
    onChange();
  });
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const viewer = new FieldViewer();
  const state: UiState = { geometry: {}, materialId: null, field: "thinning", hotspotOn: false };
  let inflight: AbortController | null = null;

  const send = async (body: PredictRequest): Promise<void> => {
    inflight?.abort();
    const controller = new AbortController();
    inflight = controller;
    const seq = viewer.gate.next();
    try {
      const resp = await api.predict(body, controller.signal);
      if (viewer.applyResponse(seq, resp)) {
        setErrorCard(null);
        drawHeatmap(viewer, state.hotspotOn);
      } else if (viewer.lastError) {
        setErrorCard(viewer.lastError);
      }
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      const message =
        err instanceof ApiError
          ? Object.entries(err.problems)
              .map(([k, v]) => `${k}: ${v}`)
              .join("; ") || `HTTP ${err.status}`
          : String(err);
      if (viewer.applyError(seq, message)) setErrorCard(message);
    }
  };

  const limiter = new RateLimiter<PredictRequest>((body) => void send(body));
  const requestPredict = (): void => {
    if (state.materialId === null) return;
    limiter.poke({
      geometry: { ...state.geometry },
      material_id: state.materialId,
      field: state.field,
    });
  };

  const hotspotToggle = $("hotspot") as unknown as HTMLInputElement;
  hotspotToggle.addEventListener("change", () => {
    state.hotspotOn = hotspotToggle.checked;
    drawHeatmap(viewer, state.hotspotOn); // re-render, no new request
  });

  try {
    const [info, catalog] = await Promise.all([api.getFields(), api.getMaterials()]);
    setBanner(null);
    buildSliders(info, requestPredict, state);
    buildMaterialPicker(catalog, requestPredict, state);
    buildFieldPicker(info, requestPredict, state);
    $("grid-note").textContent =
      `${info.grid.H} x ${info.grid.W} grid, ${info.grid.pitch_mm} mm pitch`;
    requestPredict();
  } catch {
    setBanner("inference service unreachable");
  }
}

void boot();
