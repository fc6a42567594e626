/** Schematic scene renderer.
 *
 * Draws onto any object implementing Ctx2D (the DOM canvas context in the
 * app, a recording stub in tests). Overlays are drawn verbatim from the
 * OverlaySet — no client-side recomputation. The "3d" mode is an honest
 * axonometric squash, not photorealism.
 */
import type { ConsoleState } from "./state.js";
import type { Telemetry } from "./types.js";

/** Structural subset of CanvasRenderingContext2D used by the renderer. */
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  save(): void;
  restore(): void;
}

export const VEHICLE_LENGTH = 4.5;
export const VEHICLE_WIDTH = 1.8;

const COLORS = {
  background: "#101418",
  ego: "#4caf50",
  egoResolved: "#a5d6a7",
  physical: "#b0bec5",
  logical: "#7e57c2",
  traffic: "#ffb74d",
  marker: "#ef5350",
  brakeWall: "#ff1744",
  projection: "#29b6f6",
};

export interface Viewport {
  width: number;
  height: number;
}

/** World -> screen transform centered on the ego vehicle. */
export function worldToScreen(
  state: ConsoleState,
  t: Telemetry,
  p: [number, number],
  vp: Viewport,
): [number, number] {
  const k = state.scene.zoom * state.scene.scalePreset;
  let sx = vp.width / 2 + (p[0] - t.x - state.scene.pan[0]) * k;
  let sy = vp.height / 2 - (p[1] - t.y - state.scene.pan[1]) * k;
  if (state.scene.mode === "3d") {
    // axonometric: compress the vertical axis and drop everything lower
    sy = vp.height * 0.25 + (sy - vp.height / 2) * 0.55 + vp.height * 0.25;
  }
  return [sx, sy];
}

function polygonPath(
  ctx: Ctx2D,
  state: ConsoleState,
  t: Telemetry,
  poly: [number, number][],
  vp: Viewport,
): void {
  ctx.beginPath();
  poly.forEach((p, i) => {
    const [x, y] = worldToScreen(state, t, p, vp);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.closePath();
}

function egoFootprint(t: Telemetry): [number, number][] {
  const ch = Math.cos(t.heading);
  const sh = Math.sin(t.heading);
  const cx = t.x + 0.5 * 2.7 * ch; // geometric center ahead of the rear axle
  const cy = t.y + 0.5 * 2.7 * sh;
  const hl = VEHICLE_LENGTH / 2;
  const hw = VEHICLE_WIDTH / 2;
  const local: [number, number][] = [
    [hl, hw],
    [-hl, hw],
    [-hl, -hw],
    [hl, -hw],
  ];
  return local.map(([lx, ly]) => [
    cx + lx * ch - ly * sh,
    cy + lx * sh + ly * ch,
  ]);
}

export function drawScene(ctx: Ctx2D, state: ConsoleState, vp: Viewport): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, vp.width, vp.height);
  const t = state.telemetry;
  if (!t) return;

  for (const ob of t.obstacles) {
    ctx.fillStyle = ob.physicality === "logical" ? COLORS.logical : COLORS.physical;
    ctx.globalAlpha = ob.physicality === "logical" ? 0.55 : 1.0;
    polygonPath(ctx, state, t, ob.polygon, vp);
    ctx.fill();
  }
  ctx.globalAlpha = 1.0;
  for (const sv of t.other_vehicles) {
    ctx.fillStyle = COLORS.traffic;
    polygonPath(ctx, state, t, sv.polygon, vp);
    ctx.fill();
  }

  // detected-object ring markers, straight from the overlay set
  const k = state.scene.zoom * state.scene.scalePreset;
  ctx.strokeStyle = COLORS.marker;
  ctx.lineWidth = 2;
  for (const m of t.overlays.obstacle_markers) {
    const [x, y] = worldToScreen(state, t, m.center, vp);
    ctx.beginPath();
    ctx.arc(x, y, m.radius * k, 0, 2 * Math.PI);
    ctx.stroke();
  }

  // trajectory projection polyline
  if (t.overlays.trajectory_projection.length >= 2) {
    ctx.strokeStyle = COLORS.projection;
    ctx.lineWidth = 3;
    ctx.beginPath();
    t.overlays.trajectory_projection.forEach((p, i) => {
      const [x, y] = worldToScreen(state, t, p, vp);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }

  // the virtual red wall while braking
  if (t.overlays.brake_wall) {
    ctx.strokeStyle = COLORS.brakeWall;
    ctx.lineWidth = 5;
    ctx.beginPath();
    const [a, b] = t.overlays.brake_wall;
    const [ax, ay] = worldToScreen(state, t, a, vp);
    const [bx, by] = worldToScreen(state, t, b, vp);
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }

  ctx.fillStyle = t.resolved ? COLORS.egoResolved : COLORS.ego;
  polygonPath(ctx, state, t, egoFootprint(t), vp);
  ctx.fill();
}
