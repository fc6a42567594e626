/** Console view state and the envelope reducer.
 *
 * One reducer consumes every delivered envelope in protocol order; the
 * render loop reads the latest state. Authority and safety decisions are
 * never made here — the owner chip, override prompt, and contextual panel
 * all mirror received messages verbatim.
 */
import type {
  DialogView,
  Envelope,
  NotificationLevel,
  NotificationMsg,
  OverrideView,
  OwnerChangeMsg,
  RouteAlternative,
  Telemetry,
} from "./types.js";

export const OWNER_LABELS: Record<string, string> = {
  Vehicle: "Auto",
  RemoteAssistant: "Assist",
  RemoteDriver: "Manual",
};

export const LEVEL_COLORS: Record<NotificationLevel, string> = {
  alert: "red",
  progress_status: "blue",
  progress_guidance: "yellow",
  success: "green",
};

// telemetry and direct_control are latest-wins streams; everything else is
// reliable-ordered, so a regressing seq indicates a protocol violation
const UNRELIABLE: ReadonlySet<string> = new Set(["telemetry", "direct_control"]);

export interface Banner {
  level: NotificationLevel;
  color: string;
  text: string;
  relatedCommand: string | null;
  clock: number;
}

export interface SceneView {
  mode: "2d" | "3d";
  zoom: number;
  pan: [number, number];
  scalePreset: number;
}

export interface ConsoleState {
  owner: string;
  ownerLabel: string;
  telemetry: Telemetry | null;
  banners: Banner[];
  contextual: string[];
  dialogs: DialogView[];
  pendingOverride: OverrideView | null;
  routeAlternatives: RouteAlternative[];
  resolved: boolean;
  scene: SceneView;
  panelTab: "contextual" | "all";
  search: string;
  navTab: "main" | "vehicle_details";
  lastReliableSeq: number;
  seqViolations: number;
}

export function initialState(): ConsoleState {
  return {
    owner: "Vehicle",
    ownerLabel: OWNER_LABELS["Vehicle"],
    telemetry: null,
    banners: [],
    contextual: [],
    dialogs: [],
    pendingOverride: null,
    routeAlternatives: [],
    resolved: false,
    scene: { mode: "2d", zoom: 6.0, pan: [0, 0], scalePreset: 1 },
    panelTab: "contextual",
    search: "",
    navTab: "main",
    lastReliableSeq: 0,
    seqViolations: 0,
  };
}

export function reduce(state: ConsoleState, env: Envelope): ConsoleState {
  const next = { ...state };
  if (!UNRELIABLE.has(env.kind)) {
    if (env.seq < state.lastReliableSeq) {
      next.seqViolations = state.seqViolations + 1;
    } else {
      next.lastReliableSeq = env.seq;
    }
  }
  switch (env.kind) {
    case "telemetry": {
      const t = env.payload as unknown as Telemetry;
      next.telemetry = t;
      next.contextual = t.contextual_commands;
      next.dialogs = t.dialogs;
      next.pendingOverride = t.pending_override;
      next.routeAlternatives = t.route_alternatives;
      next.resolved = t.resolved;
      break;
    }
    case "notification": {
      const n = env.payload as unknown as NotificationMsg;
      next.banners = [
        ...state.banners,
        {
          level: n.level,
          color: LEVEL_COLORS[n.level] ?? "gray",
          text: n.text,
          relatedCommand: n.related_command,
          clock: n.clock,
        },
      ];
      break;
    }
    case "owner_change": {
      const o = env.payload as unknown as OwnerChangeMsg;
      next.owner = o.owner;
      next.ownerLabel = OWNER_LABELS[o.owner] ?? o.owner;
      break;
    }
    default:
      break;
  }
  return next;
}

export function reduceAll(state: ConsoleState, envs: Envelope[]): ConsoleState {
  return envs.reduce(reduce, state);
}

/** Commands shown on the active panel tab after the search filter. */
export function visibleCommands(state: ConsoleState, allKinds: string[]): string[] {
  const base = state.panelTab === "contextual" ? state.contextual : allKinds;
  const q = state.search.trim().toLowerCase();
  if (!q) return [...base];
  return base.filter((k) => k.toLowerCase().includes(q));
}

// -- local view actions (no wire traffic) -----------------------------------

export function setPanelTab(s: ConsoleState, tab: "contextual" | "all"): ConsoleState {
  return { ...s, panelTab: tab };
}

export function setSearch(s: ConsoleState, text: string): ConsoleState {
  return { ...s, search: text };
}

export function setNavTab(s: ConsoleState, tab: "main" | "vehicle_details"): ConsoleState {
  return { ...s, navTab: tab };
}

export function zoomBy(s: ConsoleState, factor: number): ConsoleState {
  const zoom = Math.min(Math.max(s.scene.zoom * factor, 1.0), 40.0);
  return { ...s, scene: { ...s.scene, zoom } };
}

export function panBy(s: ConsoleState, dx: number, dy: number): ConsoleState {
  const [px, py] = s.scene.pan;
  return { ...s, scene: { ...s.scene, pan: [px + dx, py + dy] } };
}

const SCALE_PRESETS = [0.5, 1, 2, 4];

export function cycleScale(s: ConsoleState): ConsoleState {
  const i = SCALE_PRESETS.indexOf(s.scene.scalePreset);
  const scalePreset = SCALE_PRESETS[(i + 1) % SCALE_PRESETS.length];
  return { ...s, scene: { ...s.scene, scalePreset } };
}

export function togglePerspective(s: ConsoleState): ConsoleState {
  return {
    ...s,
    scene: { ...s.scene, mode: s.scene.mode === "2d" ? "3d" : "2d" },
  };
}
