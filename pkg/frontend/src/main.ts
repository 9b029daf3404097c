import { ApiError, TubetrackClient } from "./api";
import type { SessionSummary, TrajectoryOverlay } from "./api";
import {
  clearSeeds, initialState, placeSeed, sessionLoaded, setAutoTrack,
  setMetric, toggleLayer, trackFailed, trackStarted, trackSucceeded,
  undoSeed,
} from "./state";
import type { LayerName, Metric, UiState } from "./state";
import {
  drawImageLayer, drawSeeds, drawTrackedPath, drawTrajectories,
} from "./render";
import { Viewport } from "./viewport";

const client = new TubetrackClient("");

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const toast = document.getElementById("toast")!;
const status = document.getElementById("status")!;
const progress = document.getElementById("progress")!;

let state: UiState = { ...initialState };
let view = new Viewport(1, 1);
let session: SessionSummary | null = null;
let overlay: TrajectoryOverlay | null = null;
let imageBitmap: ImageBitmap | null = null;
let heatmapBitmap: ImageBitmap | null = null;
let inFlightController: AbortController | null = null;

function showToast(text: string): void {
  toast.textContent = text;
  toast.classList.add("visible");
  window.setTimeout(() => toast.classList.remove("visible"), 2500);
}

function setProgress(text: string | null): void {
  progress.textContent = text ?? "";
  progress.classList.toggle("visible", text !== null);
}

function render(): void {
  ctx.fillStyle = "#202124";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (session && imageBitmap && state.layers.image) {
    drawImageLayer(ctx, view, imageBitmap, session.width, session.height);
  }
  if (session && heatmapBitmap && state.layers.heatmap) {
    drawImageLayer(ctx, view, heatmapBitmap, session.width, session.height, 0.55);
  }
  if (overlay && state.layers.trajectories) {
    drawTrajectories(ctx, view, overlay.trajectories, state.highlightedTrajectories);
  }
  if (state.path && state.layers.path) {
    drawTrackedPath(ctx, view, state.path);
  }
  if (state.layers.seeds) {
    drawSeeds(ctx, view, state.seeds);
  }
  const j = state.jScore === null ? "" : ` | J = ${state.jScore.toFixed(3)}`;
  const busy = state.inFlight ? " | tracking..." : "";
  status.textContent = session
    ? `${session.width}x${session.height}, ${session.n_trajectories} trajectories, metric ${state.metric}${j}${busy}`
    : "no session";
  if (state.message) showToast(state.message);
}

async function requestTrack(): Promise<void> {
  if (!session || state.seeds.length < 2) return;
  inFlightController?.abort();
  const controller = new AbortController();
  inFlightController = controller;
  state = trackStarted(state);
  render();
  try {
    const report = await client.track(
      session.session_id, state.seeds, state.metric, controller.signal,
    );
    if (controller !== inFlightController) return; // superseded
    state = trackSucceeded(state, report.path, report.j_score ?? null);
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    if (err instanceof ApiError) {
      const hint = err.componentSize !== undefined
        ? ` (reachable component: ${err.componentSize} trajectories)` : "";
      state = trackFailed(state, `No route between seeds${hint}`,
                          err.nearestTrajectories);
    } else {
      state = trackFailed(state, `Tracking failed: ${(err as Error).message}`);
    }
  }
  render();
}

async function loadSession(config: Record<string, unknown>): Promise<void> {
  setProgress("Preparing session (offline stage)...");
  try {
    const kindSel = document.getElementById("demo-kind") as HTMLSelectElement;
    session = await client.createDemoSession(kindSel.value, config);
    overlay = await client.getTrajectories(session.session_id);
    const imgResp = await fetch(client.imageUrl(session.session_id));
    imageBitmap = await createImageBitmap(await imgResp.blob());
    const heatBlob = await (await fetch(
      `data:image/png;base64,${overlay.zeta_png}`)).blob();
    heatmapBitmap = await createImageBitmap(heatBlob);
    view = new Viewport(session.width, session.height);
    canvas.width = Math.max(session.width, 700);
    canvas.height = Math.max(session.height, 400);
    state = sessionLoaded(state, session.session_id);
  } catch (err) {
    showToast(`Session failed: ${(err as Error).message}`);
  } finally {
    setProgress(null);
  }
  render();
}

function currentConfig(): Record<string, unknown> {
  const quantile = (document.getElementById("quantile") as HTMLInputElement).value;
  return {
    threshold_quantile: Number(quantile),
    min_len: 8,
    tau: 7.0,
    prolong_len: 16,
  };
}

canvas.addEventListener("click", (ev) => {
  if (!session) return;
  const rect = canvas.getBoundingClientRect();
  const p = view.toImage(ev.clientX - rect.left, ev.clientY - rect.top);
  const t = placeSeed(state, Math.round(p.x), Math.round(p.y),
                      session.width, session.height);
  state = t.state;
  render();
  if (t.shouldTrack) void requestTrack();
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const rect = canvas.getBoundingClientRect();
  view.zoomAt(ev.clientX - rect.left, ev.clientY - rect.top,
              ev.deltaY < 0 ? 1.25 : 0.8);
  render();
});

let panning: { x: number; y: number } | null = null;
canvas.addEventListener("mousedown", (ev) => {
  if (ev.button === 1 || ev.shiftKey) {
    panning = { x: ev.clientX, y: ev.clientY };
    ev.preventDefault();
  }
});
window.addEventListener("mousemove", (ev) => {
  if (panning) {
    view.panBy(ev.clientX - panning.x, ev.clientY - panning.y);
    panning = { x: ev.clientX, y: ev.clientY };
    render();
  }
});
window.addEventListener("mouseup", () => {
  panning = null;
});

for (const layer of ["image", "trajectories", "heatmap", "path", "seeds"] as LayerName[]) {
  const box = document.getElementById(`layer-${layer}`) as HTMLInputElement;
  box.checked = state.layers[layer];
  box.addEventListener("change", () => {
    state = toggleLayer(state, layer);
    render();
  });
}

(document.getElementById("metric") as HTMLSelectElement).addEventListener(
  "change", (ev) => {
    const t = setMetric(state, (ev.target as HTMLSelectElement).value as Metric);
    state = t.state;
    render();
    if (t.shouldTrack) void requestTrack();
  });

(document.getElementById("auto-track") as HTMLInputElement).addEventListener(
  "change", (ev) => {
    state = setAutoTrack(state, (ev.target as HTMLInputElement).checked);
  });

document.getElementById("undo")!.addEventListener("click", () => {
  const t = undoSeed(state);
  state = t.state;
  render();
  if (t.shouldTrack) void requestTrack();
});

document.getElementById("clear")!.addEventListener("click", () => {
  state = clearSeeds(state);
  render();
});

document.getElementById("retrack")!.addEventListener("click", () => {
  void requestTrack();
});

document.getElementById("reprepare")!.addEventListener("click", () => {
  void loadSession(currentConfig());
});

document.getElementById("load-demo")!.addEventListener("click", () => {
  void loadSession(currentConfig());
});

render();
