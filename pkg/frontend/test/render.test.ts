/** Renderer drawing behavior via a recording context stub. */
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { Ctx2D, drawScene, worldToScreen } from "../src/render.js";
import { initialState, reduceAll, togglePerspective, zoomBy } from "../src/state.js";
import type { Envelope, Telemetry } from "../src/types.js";

const police: Envelope[] = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "session-police-bypass.json"),
               "utf-8"),
);

interface Op {
  op: string;
  args: unknown[];
  stroke: string;
  fill: string;
}

/** Minimal recorder implementing the Ctx2D surface. */
function recorder(): { ctx: Ctx2D; ops: Op[] } {
  const ops: Op[] = [];
  const ctx = {
    fillStyle: "",
    strokeStyle: "",
    lineWidth: 1,
    globalAlpha: 1,
  } as Record<string, unknown>;
  for (const name of ["beginPath", "moveTo", "lineTo", "arc", "closePath",
                      "fill", "stroke", "fillRect", "save", "restore"]) {
    ctx[name] = (...args: unknown[]) =>
      ops.push({
        op: name,
        args,
        stroke: ctx.strokeStyle as string,
        fill: ctx.fillStyle as string,
      });
  }
  return { ctx: ctx as unknown as Ctx2D, ops };
}

const VP = { width: 960, height: 560 };

function stateAt(predicate: (t: Telemetry) => boolean) {
  let s = initialState();
  for (const env of police) {
    s = reduceAll(s, [env]);
    if (env.kind === "telemetry" &&
        predicate(env.payload as unknown as Telemetry)) {
      return s;
    }
  }
  throw new Error("no telemetry matched the predicate");
}

describe("drawScene", () => {
  it("renders nothing but the background before telemetry", () => {
    const { ctx, ops } = recorder();
    drawScene(ctx, initialState(), VP);
    expect(ops).toEqual([
      expect.objectContaining({ op: "fillRect", args: [0, 0, 960, 560] }),
    ]);
  });

  it("draws the red brake wall while braking", () => {
    const s = stateAt((t) => t.brake_active && t.overlays.brake_wall !== null);
    const { ctx, ops } = recorder();
    drawScene(ctx, s, VP);
    const red = ops.filter((o) => o.op === "stroke" && o.stroke === "#ff1744");
    expect(red.length).toBe(1);
  });

  it("draws one ring marker per detected object", () => {
    const s = stateAt((t) => t.overlays.obstacle_markers.length > 0);
    const { ctx, ops } = recorder();
    drawScene(ctx, s, VP);
    const rings = ops.filter((o) => o.op === "arc");
    expect(rings.length).toBe(
      s.telemetry!.overlays.obstacle_markers.length,
    );
  });

  it("draws the trajectory projection while a maneuver runs", () => {
    const s = stateAt(
      (t) => t.active_command !== null &&
        t.overlays.trajectory_projection.length >= 2,
    );
    const { ctx, ops } = recorder();
    drawScene(ctx, s, VP);
    const blue = ops.filter((o) => o.op === "stroke" && o.stroke === "#29b6f6");
    expect(blue.length).toBe(1);
  });

  it("draws every obstacle and the ego footprint", () => {
    const s = stateAt((t) => t.obstacles.length > 0);
    const { ctx, ops } = recorder();
    drawScene(ctx, s, VP);
    const fills = ops.filter((o) => o.op === "fill");
    // obstacles + scripted vehicles + ego
    expect(fills.length).toBe(
      s.telemetry!.obstacles.length + s.telemetry!.other_vehicles.length + 1,
    );
  });
});

describe("worldToScreen", () => {
  it("centers the ego vehicle", () => {
    const s = stateAt(() => true);
    const t = s.telemetry!;
    const [x, y] = worldToScreen(s, t, [t.x, t.y], VP);
    expect(x).toBeCloseTo(VP.width / 2);
    expect(y).toBeCloseTo(VP.height / 2);
  });

  it("zoom scales distances from the center", () => {
    let s = stateAt(() => true);
    const t = s.telemetry!;
    const before = worldToScreen(s, t, [t.x + 10, t.y], VP)[0] - VP.width / 2;
    s = zoomBy(s, 2.0);
    const after = worldToScreen(s, t, [t.x + 10, t.y], VP)[0] - VP.width / 2;
    expect(after).toBeCloseTo(before * 2.0);
  });

  it("3d mode compresses the vertical axis", () => {
    let s = stateAt(() => true);
    const t = s.telemetry!;
    const flat = worldToScreen(s, t, [t.x, t.y + 10], VP)[1];
    s = togglePerspective(s);
    const squashed = worldToScreen(s, t, [t.x, t.y + 10], VP)[1];
    expect(Math.abs(squashed - VP.height / 2)).toBeLessThan(
      Math.abs(flat - VP.height / 2) + 1e-9,
    );
  });
});
