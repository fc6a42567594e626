/** Outgoing message builders and the static command-panel catalog.
 *
 * Builders mirror the server's payload constructors field-for-field; the
 * catalog is display metadata only — which commands are *suggested* always
 * comes from telemetry, and which are *allowed* is decided vehicle-side.
 */
import type { ClientFrame } from "./types.js";

export const ALL_COMMAND_KINDS = [
  "BypassLeft",
  "BypassRight",
  "Reroute",
  "PlotAlternativeRoute",
  "PointAndGo",
  "ProgressSlowly",
  "GapKeep",
  "UTurn",
  "SnapLeft",
  "SnapRight",
  "Stop",
  "Wait",
  "Honk",
  "Microphone",
  "ContactParty",
  "ToggleDriveMode",
  "Zoom",
  "ChangeScale",
  "ChangePerspective",
];

/** Distinct labeled icons (honk vs. microphone confusion fix). */
export const COMMAND_ICONS: Record<string, string> = {
  Honk: "📢 Honk",
  Microphone: "🎙 Mic",
  ContactParty: "☎ Contact",
  Stop: "STOP",
};

/** Dialog actions offered per (command kind, step). Cancel is always
 * available on non-terminal steps; the vehicle endpoint enforces which
 * actions are actually legal. */
const DIALOG_ACTIONS: Record<string, Record<string, string[]>> = {
  Reroute: {
    choose_route: ["FindAlternativeRoute", "Cancel"],
    confirm_route: ["SelectRoute", "Confirm", "Cancel"],
  },
  PlotAlternativeRoute: {
    plot0: ["AddPoint", "Cancel"],
    plot1: ["AddPoint", "Cancel"],
    plot_more: ["AddPoint", "Done", "Cancel"],
  },
  PointAndGo: {
    pick_point: ["PickPoint", "Cancel"],
    confirm_point: ["PickPoint", "Confirm", "Cancel"],
  },
  ContactParty: {
    choose_party: ["Passenger", "FleetCenter", "External", "Cancel"],
  },
  ProgressSlowly: { confirm: ["SetDistance", "Confirm", "Cancel"] },
  Wait: { confirm: ["SetDuration", "Confirm", "Cancel"] },
  GapKeep: { confirm: ["SetGap", "Confirm", "Cancel"] },
};

export function dialogActions(kind: string, step: string): string[] {
  const actions = DIALOG_ACTIONS[kind]?.[step];
  if (actions) return [...actions];
  return ["Confirm", "Cancel"];
}

let nextCommandNumber = 1;

export function freshCommandId(): string {
  return `ui-${nextCommandNumber++}`;
}

export function resetCommandIds(): void {
  nextCommandNumber = 1;
}

export function commandFrame(
  commandId: string,
  kind: string,
  params: Record<string, unknown> = {},
  opts: { overrideConfirmed?: boolean; cancel?: boolean } = {},
): ClientFrame {
  return {
    kind: "command",
    payload: {
      type: "command",
      command_id: commandId,
      kind,
      params,
      override_confirmed: opts.overrideConfirmed ?? false,
      cancel: opts.cancel ?? false,
    },
  };
}

export function dialogActionFrame(
  commandId: string,
  action: string,
  payload: unknown = null,
): ClientFrame {
  return {
    kind: "dialog_action",
    payload: {
      type: "dialog_action",
      command_id: commandId,
      action,
      payload,
    },
  };
}

export function directControlFrame(accel: number, steer: number): ClientFrame {
  return {
    kind: "direct_control",
    payload: { type: "direct_control", accel, steer },
  };
}

export function classifyFrame(objectId: string, newClass: string): ClientFrame {
  return {
    kind: "annotation",
    payload: {
      type: "annotation",
      op: "classify",
      object_id: objectId,
      new_class: newClass,
      label: "",
      semantic_effect: "none",
      author: "console",
    },
  };
}

export function annotateFrame(
  objectId: string,
  label: string,
  semanticEffect: string,
): ClientFrame {
  return {
    kind: "annotation",
    payload: {
      type: "annotation",
      op: "annotate",
      object_id: objectId,
      new_class: null,
      label,
      semantic_effect: semanticEffect,
      author: "console",
    },
  };
}

/** Confirming an override re-sends the same command with the flag set. */
export function overrideConfirmFrame(commandId: string, kind: string): ClientFrame {
  return commandFrame(commandId, kind, {}, { overrideConfirmed: true });
}
