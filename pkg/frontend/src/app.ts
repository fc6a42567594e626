/** Console entry point: WebSocket wiring, DOM panels, render loop.
 *
 * Ingestion and rendering are decoupled: the socket handler reduces into
 * a latest-state buffer; requestAnimationFrame paints whatever is current.
 */
import {
  ALL_COMMAND_KINDS,
  COMMAND_ICONS,
  commandFrame,
  dialogActionFrame,
  dialogActions,
  directControlFrame,
  freshCommandId,
  overrideConfirmFrame,
} from "./commands.js";
import {
  ConsoleState,
  cycleScale,
  initialState,
  panBy,
  setNavTab,
  setPanelTab,
  setSearch,
  togglePerspective,
  visibleCommands,
  zoomBy,
} from "./state.js";
import { reduce } from "./state.js";
import { Ctx2D, drawScene } from "./render.js";
import type { ClientFrame, Envelope } from "./types.js";

let state: ConsoleState = initialState();
let ws: WebSocket | null = null;
const paramPrompts: Record<string, [string, string]> = {
  ProgressSlowly: ["distance", "Creep distance in meters (0-10]"],
  GapKeep: ["gap", "Target time gap in seconds [0.5-5]"],
  Wait: ["duration", "Wait duration in seconds"],
};

function send(frame: ClientFrame): void {
  ws?.send(JSON.stringify(frame));
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function issueCommand(kind: string): void {
  let params: Record<string, unknown> = {};
  const prompt_ = paramPrompts[kind];
  if (prompt_) {
    const raw = window.prompt(prompt_[1]);
    if (raw === null) return;
    params = { [prompt_[0]]: parseFloat(raw) };
  }
  send(commandFrame(freshCommandId(), kind, params));
}

function renderPanels(): void {
  el("owner-chip").textContent = state.ownerLabel;
  el("owner-chip").dataset.owner = state.owner;
  el("clock").textContent = state.telemetry
    ? state.telemetry.clock.toFixed(1) + " s"
    : "--";
  el("disengagement").textContent = state.telemetry
    ? `${state.telemetry.disengagement.kind}: ${state.telemetry.disengagement.detail}`
    : "";

  const list = el("command-list");
  list.innerHTML = "";
  for (const kind of visibleCommands(state, ALL_COMMAND_KINDS)) {
    if (kind === "Stop") continue; // Stop gets its own large control
    const btn = document.createElement("button");
    btn.className = "cmd";
    btn.textContent = COMMAND_ICONS[kind] ?? kind;
    btn.onclick = () => issueCommand(kind);
    list.appendChild(btn);
  }

  const banners = el("banners");
  banners.innerHTML = "";
  for (const b of state.banners.slice(-6)) {
    const div = document.createElement("div");
    div.className = `banner banner-${b.color}`;
    div.textContent = b.text;
    banners.appendChild(div);
  }

  const dialog = el("dialog-panel");
  dialog.innerHTML = "";
  for (const d of state.dialogs) {
    const head = document.createElement("p");
    head.textContent = `${d.kind}: ${d.prompt}`;
    dialog.appendChild(head);
    if (d.kind === "Reroute" && d.step === "confirm_route") {
      for (const [i, r] of state.routeAlternatives.entries()) {
        const p = document.createElement("p");
        p.className = "route-alt";
        p.textContent =
          `#${i}: ${r.lane_ids.join("→")} ` +
          `(+${r.length_delta_m.toFixed(0)} m, +${r.time_delta_s.toFixed(0)} s)`;
        dialog.appendChild(p);
      }
    }
    for (const action of dialogActions(d.kind, d.step)) {
      const btn = document.createElement("button");
      btn.textContent = action;
      btn.onclick = () => {
        let payload: unknown = null;
        if (action === "SelectRoute") payload = 0;
        if (action === "AddPoint" || action === "PickPoint") payload = pickPoint();
        if (action.startsWith("Set")) {
          const raw = window.prompt(`${action} value`);
          if (raw === null) return;
          payload = parseFloat(raw);
        }
        send(dialogActionFrame(d.command_id, action, payload));
      };
      dialog.appendChild(btn);
    }
  }

  const override = el("override-panel");
  if (state.pendingOverride) {
    const o = state.pendingOverride;
    override.style.display = "block";
    el("override-text").textContent =
      `${o.kind} crosses: ` + o.conflicts.map((c) => c.join(" ")).join(", ");
    el<HTMLButtonElement>("override-confirm").onclick = () =>
      send(overrideConfirmFrame(o.command_id, o.kind));
    el<HTMLButtonElement>("override-cancel").onclick = () =>
      send(commandFrame(o.command_id, o.kind, {}, { cancel: true }));
  } else {
    override.style.display = "none";
  }

  el("vehicle-details").style.display =
    state.navTab === "vehicle_details" ? "block" : "none";
  if (state.telemetry) {
    el("vd-speed").textContent = state.telemetry.speed.toFixed(2) + " m/s";
    el("vd-pos").textContent =
      `(${state.telemetry.x.toFixed(1)}, ${state.telemetry.y.toFixed(1)})`;
    el("vd-resolved").textContent = state.telemetry.resolved ? "yes" : "no";
  }
}

let lastPicked: [number, number] = [0, 0];
function pickPoint(): [number, number] {
  return lastPicked;
}

function wireControls(): void {
  el<HTMLButtonElement>("stop-button").onclick = () =>
    send(commandFrame(freshCommandId(), "Stop"));
  el<HTMLButtonElement>("tab-contextual").onclick = () => {
    state = setPanelTab(state, "contextual");
  };
  el<HTMLButtonElement>("tab-all").onclick = () => {
    state = setPanelTab(state, "all");
  };
  el<HTMLInputElement>("search").oninput = (e) => {
    state = setSearch(state, (e.target as HTMLInputElement).value);
  };
  el<HTMLButtonElement>("zoom-in").onclick = () => {
    state = zoomBy(state, 1.25);
  };
  el<HTMLButtonElement>("zoom-out").onclick = () => {
    state = zoomBy(state, 0.8);
  };
  el<HTMLButtonElement>("scale-cycle").onclick = () => {
    state = cycleScale(state);
  };
  el<HTMLButtonElement>("perspective").onclick = () => {
    state = togglePerspective(state);
  };
  el<HTMLButtonElement>("toggle-drive").onclick = () =>
    send(commandFrame(freshCommandId(), "ToggleDriveMode"));
  el<HTMLButtonElement>("nav-main").onclick = () => {
    state = setNavTab(state, "main");
  };
  el<HTMLButtonElement>("nav-details").onclick = () => {
    state = setNavTab(state, "vehicle_details");
  };

  const canvas = el<HTMLCanvasElement>("scene");
  canvas.onclick = (e) => {
    const rect = canvas.getBoundingClientRect();
    const t = state.telemetry;
    if (!t) return;
    const k = state.scene.zoom * state.scene.scalePreset;
    lastPicked = [
      t.x + state.scene.pan[0] + (e.clientX - rect.left - canvas.width / 2) / k,
      t.y + state.scene.pan[1] - (e.clientY - rect.top - canvas.height / 2) / k,
    ];
  };

  // keyboard: arrows drive in Manual, WASD pans the map
  const keys = new Set<string>();
  window.addEventListener("keydown", (e) => keys.add(e.key));
  window.addEventListener("keyup", (e) => keys.delete(e.key));
  setInterval(() => {
    if (state.owner === "RemoteDriver") {
      const accel = keys.has("ArrowUp") ? 1.5 : keys.has("ArrowDown") ? -3.0 : 0.0;
      const steer = keys.has("ArrowLeft") ? 0.3 : keys.has("ArrowRight") ? -0.3 : 0.0;
      send(directControlFrame(accel, steer));
    }
    if (keys.has("w")) state = panBy(state, 0, 2);
    if (keys.has("s")) state = panBy(state, 0, -2);
    if (keys.has("a")) state = panBy(state, -2, 0);
    if (keys.has("d")) state = panBy(state, 2, 0);
  }, 50);
}

function connect(): void {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  ws = new WebSocket(`${proto}://${location.host}/ws`);
  ws.onmessage = (event) => {
    const env = JSON.parse(event.data) as Envelope;
    state = reduce(state, env);
  };
  ws.onclose = () => setTimeout(connect, 1000);
}

function frame(): void {
  const canvas = el<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d") as unknown as Ctx2D;
  drawScene(ctx, state, { width: canvas.width, height: canvas.height });
  renderPanels();
  requestAnimationFrame(frame);
}

window.addEventListener("DOMContentLoaded", () => {
  wireControls();
  connect();
  requestAnimationFrame(frame);
});
