/** Wire schema: JSON payloads shared with the serve endpoint.
 *
 * The console is a pure consumer of these shapes; it never recomputes
 * anything the vehicle endpoint already decided (overlays, gate verdicts,
 * contextual suggestions all arrive precomputed).
 */

export type EnvelopeKind =
  | "command"
  | "dialog_action"
  | "telemetry"
  | "notification"
  | "owner_change"
  | "direct_control"
  | "annotation";

export interface Envelope {
  seq: number;
  sent_clock: number;
  kind: EnvelopeKind;
  payload: Record<string, unknown>;
}

export type NotificationLevel =
  | "alert"
  | "progress_status"
  | "progress_guidance"
  | "success";

export interface NotificationMsg {
  type: "notification";
  level: NotificationLevel;
  text: string;
  related_command: string | null;
  clock: number;
}

export interface OwnerChangeMsg {
  type: "owner_change";
  owner: "Vehicle" | "RemoteAssistant" | "RemoteDriver";
  event: string;
  clock: number;
}

export interface OverlaySet {
  obstacle_markers: { id: string; center: [number, number]; radius: number }[];
  brake_wall: [number, number][] | null;
  trajectory_projection: [number, number][];
  projection_length: number;
}

export interface DialogView {
  command_id: string;
  kind: string;
  step: string;
  prompt: string;
  params: Record<string, unknown>;
}

export interface OverrideView {
  command_id: string;
  kind: string;
  conflicts: string[][];
}

export interface RouteAlternative {
  lane_ids: string[];
  length_m: number;
  est_time_s: number;
  length_delta_m: number;
  time_delta_s: number;
}

export interface PolyView {
  id: string;
  polygon: [number, number][];
  physicality?: string;
}

export interface Telemetry {
  type: "telemetry";
  clock: number;
  x: number;
  y: number;
  heading: number;
  speed: number;
  brake_active: boolean;
  owner: string;
  resolved: boolean;
  in_goal: boolean;
  disengagement: { kind: string; detail: string; objects: string[] };
  contextual_commands: string[];
  dialogs: DialogView[];
  pending_override: OverrideView | null;
  route_alternatives: RouteAlternative[];
  active_command: string | null;
  obstacles: PolyView[];
  other_vehicles: PolyView[];
  overlays: OverlaySet;
}

/** Client -> server WebSocket frame (matches LiveSession.submit). */
export interface ClientFrame {
  kind: "command" | "dialog_action" | "direct_control" | "annotation";
  payload: Record<string, unknown>;
}
