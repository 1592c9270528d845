// DOM glue: scope view, Bode designer, and the lock panel, all speaking
// the control API only.

import { ApiClient } from "./api.js";
import { cursorAt, productSeries, Series, toSeries } from "./bode.js";
import { DesignerState } from "./designer.js";
import { LockPanel } from "./lockpanel.js";
import { LinePlot } from "./plot.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const e = document.getElementById(id);
  if (!e) throw new Error(`missing #${id}`);
  return e as T;
}

// ------------------------------------------------------------------ scope
const scopePlot = new LinePlot(el<HTMLCanvasElement>("scope-canvas"));

async function acquireScope(): Promise<void> {
  const ch1 = (el<HTMLInputElement>("scope-ch1")).value || "in1";
  const ch2 = (el<HTMLInputElement>("scope-ch2")).value || "in2";
  const dec = Number((el<HTMLInputElement>("scope-dec")).value || "4");
  const t = await api.submitScope({ ch1, ch2, decimation_shift: dec });
  const res = await api.waitJob<{
    sample_interval_s: number; ch1_v: number[]; ch2_v: number[];
  }>(t.job_id);
  const ts = res.ch1_v.map((_, i) => i * res.sample_interval_s * 1e3);
  scopePlot.setSeries([
    { label: ch1, x: ts, y: res.ch1_v, color: "#6cf" },
    { label: ch2, x: ts, y: res.ch2_v, color: "#fa6" },
  ]);
}

// --------------------------------------------------------------- designer
const designer = new DesignerState(api, true);
const magPlot = new LinePlot(el<HTMLCanvasElement>("bode-mag"), { logX: true });
const phasePlot = new LinePlot(el<HTMLCanvasElement>("bode-phase"), { logX: true });

function redrawBode(): void {
  const series: Series[] = [];
  if (designer.overlays.plant) series.push(toSeries("plant", designer.overlays.plant));
  if (designer.overlays.filter) series.push(toSeries("filter", designer.overlays.filter));
  if (series.length === 2) series.push(productSeries(series[0], series[1]));
  const colors: Record<string, string> = {
    plant: "#f7a", filter: "#6cf", product: "#4ee",
  };
  magPlot.setSeries(series.map((s) => ({
    label: s.label, x: s.freqs, y: s.magDb, color: colors[s.label] ?? "#ccc",
  })));
  phasePlot.setSeries(series.map((s) => ({
    label: s.label, x: s.freqs, y: s.phaseDeg, color: colors[s.label] ?? "#ccc",
  })));
  magPlot.onCursor = (f) => {
    const filt = series.find((s) => s.label === "filter");
    if (!filt) return;
    const c = cursorAt(filt, f);
    el("bode-cursor").textContent =
      `${c.freq_hz.toExponential(3)} Hz  ${c.magDb.toFixed(2)} dB  ` +
      `${c.phaseDeg.toFixed(1)} deg`;
  };
  renderDesignerTable();
}

function renderDesignerTable(): void {
  const tbody = el<HTMLTableSectionElement>("pz-rows");
  tbody.innerHTML = "";
  for (const item of designer.items) {
    const tr = document.createElement("tr");
    const mark = item.kind === "pole" ? "x" : "o";
    tr.innerHTML =
      `<td>${mark}${item.conjugate ? "*" : ""}</td>` +
      `<td>${item.freq_hz.toExponential(3)}</td>` +
      `<td>${item.gamma_hz.toExponential(3)}</td>`;
    const td = document.createElement("td");
    if (!item.conjugate) {
      const btn = document.createElement("button");
      btn.textContent = "remove";
      btn.onclick = async () => {
        designer.remove(item.id);
        await designer.submit();
        redrawBode();
      };
      td.appendChild(btn);
    }
    tr.appendChild(td);
    tbody.appendChild(tr);
  }
  el("design-info").textContent = designer.lastError
    ? `error: ${designer.lastError}`
    : designer.lastResponse
      ? `loops=${designer.lastResponse.n_loops} ` +
        `rounding=${designer.lastResponse.rounding_max_error.toExponential(2)}` +
        (designer.lastResponse.rounding_warning ? "  (rounding warning)" : "")
      : "";
}

async function addEntry(kind: "pole" | "zero"): Promise<void> {
  const f = Number(el<HTMLInputElement>("pz-freq").value);
  const g = Number(el<HTMLInputElement>("pz-gamma").value);
  designer.add(kind, f, g);
  await designer.submit();
  redrawBode();
}

async function sweepPlant(): Promise<void> {
  const t = await api.submitSweep({
    start_hz: 1e3, stop_hz: 1e6, points: 101, amplitude_volts: 0.1,
    input: "iq0", output_select: "off",
  });
  const sweep = await api.waitJob<{ freqs_hz: number[]; re: number[]; im: number[] }>(t.job_id);
  designer.setPlantOverlay(sweep);
  redrawBode();
}

// -------------------------------------------------------------- lock panel
const panel = new LockPanel(api);

function renderPanel(): void {
  el("lock-phase").textContent = panel.phase;
  const badges = el("stage-badges");
  badges.innerHTML = "";
  for (const s of panel.stages) {
    const span = document.createElement("span");
    span.className = `badge ${s.state}`;
    span.textContent = `stage ${s.index}`;
    badges.appendChild(span);
  }
  if (panel.report) {
    el("lock-report").textContent =
      `locked=${panel.report.locked} attempts=${panel.report.attempts} ` +
      `err=${panel.report.final_error_units.toExponential(2)}`;
  }
}

async function pollPanel(): Promise<void> {
  const running = await panel.poll();
  renderPanel();
  if (running) setTimeout(pollPanel, 300);
}

async function refreshStatus(): Promise<void> {
  const s = await api.status();
  el("engine-status").textContent =
    `tick ${s.tick}  plant ${s.plant}`;
  const lb = await api.lockboxStatus();
  if (lb.configured) {
    el("lock-live").textContent =
      `error ${lb.error_units?.toFixed(4)}  monitor ${lb.monitor_units?.toFixed(4)}`;
  }
  setTimeout(refreshStatus, 1000);
}

export function boot(): void {
  el<HTMLButtonElement>("scope-run").onclick = () => void acquireScope();
  el<HTMLButtonElement>("pz-add-pole").onclick = () => void addEntry("pole");
  el<HTMLButtonElement>("pz-add-zero").onclick = () => void addEntry("zero");
  el<HTMLButtonElement>("plant-sweep").onclick = () => void sweepPlant();
  el<HTMLButtonElement>("lock-calibrate").onclick = async () => {
    await panel.calibrate();
    renderPanel();
  };
  el<HTMLButtonElement>("lock-start").onclick = async () => {
    await panel.start();
    void pollPanel();
  };
  el<HTMLButtonElement>("lock-abort").onclick = async () => {
    await panel.abort();
    renderPanel();
  };
  el<HTMLButtonElement>("lock-relock").onclick = async () => {
    await panel.relock();
    void pollPanel();
  };
  void refreshStatus();
}

if (typeof document !== "undefined" && document.getElementById("scope-canvas")) {
  boot();
}
