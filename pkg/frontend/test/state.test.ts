/** Reducer behavior against live-recorded session streams. */
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { ALL_COMMAND_KINDS } from "../src/commands.js";
import {
  ConsoleState,
  initialState,
  reduce,
  reduceAll,
  setPanelTab,
  setSearch,
  visibleCommands,
} from "../src/state.js";
import type { Envelope, Telemetry } from "../src/types.js";

function loadFixture(name: string): Envelope[] {
  const raw = readFileSync(join(__dirname, "fixtures", name), "utf-8");
  return JSON.parse(raw) as Envelope[];
}

const police = loadFixture("session-police-bypass.json");
const reroute = loadFixture("session-reroute.json");

/** Replay with a probe called after every envelope. */
function replay(
  envs: Envelope[],
  probe?: (s: ConsoleState, env: Envelope) => void,
): ConsoleState {
  let s = initialState();
  for (const env of envs) {
    s = reduce(s, env);
    probe?.(s, env);
  }
  return s;
}

describe("owner chip", () => {
  it("tracks OwnerChangeMsg through the session", () => {
    const labels: string[] = [];
    replay(police, (s, env) => {
      if (env.kind === "owner_change") labels.push(s.ownerLabel);
    });
    expect(labels).toEqual(["Assist", "Auto"]);
  });

  it("updates within one reduction of the message", () => {
    const ownerEnv = police.find((e) => e.kind === "owner_change")!;
    const s = reduce(initialState(), ownerEnv);
    expect(s.owner).toBe("RemoteAssistant");
    expect(s.ownerLabel).toBe("Assist");
  });
});

describe("contextual panel", () => {
  it("shows exactly the latest telemetry suggestion list", () => {
    replay(police, (s, env) => {
      if (env.kind !== "telemetry") return;
      const t = env.payload as unknown as Telemetry;
      expect(visibleCommands(s, ALL_COMMAND_KINDS)).toEqual(
        t.contextual_commands,
      );
    });
  });

  it("police scenario suggests the paper's obstacle cluster", () => {
    const end = replay(police);
    expect(end.contextual).toContain("BypassLeft");
    expect(end.contextual).toContain("Reroute");
  });

  it("all-commands tab lists the full catalog and search filters it", () => {
    let s = replay(police);
    s = setPanelTab(s, "all");
    expect(visibleCommands(s, ALL_COMMAND_KINDS)).toEqual(ALL_COMMAND_KINDS);
    s = setSearch(s, "bypass");
    expect(visibleCommands(s, ALL_COMMAND_KINDS)).toEqual([
      "BypassLeft",
      "BypassRight",
    ]);
  });
});

describe("notification banners", () => {
  it("appear in protocol order with none dropped", () => {
    const sent = police.filter((e) => e.kind === "notification");
    const end = replay(police);
    expect(end.banners.length).toBe(sent.length);
    end.banners.forEach((b, i) => {
      expect(b.text).toBe((sent[i].payload as { text: string }).text);
    });
  });

  it("colors match the level taxonomy", () => {
    const end = replay(police);
    const byLevel = new Map(end.banners.map((b) => [b.level, b.color]));
    expect(byLevel.get("success")).toBe("green");
    if (byLevel.has("alert")) expect(byLevel.get("alert")).toBe("red");
    if (byLevel.has("progress_status"))
      expect(byLevel.get("progress_status")).toBe("blue");
  });

  it("session ends with a success banner and resolved state", () => {
    const end = replay(police);
    expect(end.banners.some((b) => b.level === "success")).toBe(true);
    expect(end.resolved).toBe(true);
  });
});

describe("override prompt", () => {
  it("appears while the gate asks for confirmation, then clears", () => {
    let seen = false;
    const end = replay(police, (s) => {
      if (s.pendingOverride) {
        seen = true;
        expect(s.pendingOverride.kind).toBe("BypassLeft");
        expect(s.pendingOverride.conflicts.length).toBeGreaterThan(0);
      }
    });
    expect(seen).toBe(true);
    expect(end.pendingOverride).toBeNull();
  });

  it("never appears in the reroute session", () => {
    replay(reroute, (s) => expect(s.pendingOverride).toBeNull());
  });
});

describe("dialog state", () => {
  it("walks choose_route then confirm_route in the reroute session", () => {
    const steps: string[] = [];
    replay(reroute, (s) => {
      for (const d of s.dialogs) {
        if (d.kind === "Reroute" && steps[steps.length - 1] !== d.step) {
          steps.push(d.step);
        }
      }
    });
    expect(steps).toEqual(["choose_route", "confirm_route"]);
  });

  it("carries route alternatives while confirming", () => {
    let sawAlternatives = false;
    replay(reroute, (s) => {
      if (s.dialogs.some((d) => d.step === "confirm_route") &&
          s.routeAlternatives.length > 0) {
        sawAlternatives = true;
        expect(s.routeAlternatives[0].lane_ids.length).toBeGreaterThan(0);
      }
    });
    expect(sawAlternatives).toBe(true);
  });
});

describe("stream integrity", () => {
  it("reliable seq order never regresses in recorded sessions", () => {
    expect(replay(police).seqViolations).toBe(0);
    expect(replay(reroute).seqViolations).toBe(0);
  });

  it("flags an injected regression", () => {
    const ownerEnvs = police.filter((e) => e.kind === "owner_change");
    const s = reduceAll(initialState(), [ownerEnvs[1], ownerEnvs[0]]);
    expect(s.seqViolations).toBe(1);
  });

  it("telemetry is latest-wins", () => {
    const end = replay(police);
    const lastTele = [...police]
      .reverse()
      .find((e) => e.kind === "telemetry")!;
    expect(end.telemetry?.clock).toBe(
      (lastTele.payload as unknown as Telemetry).clock,
    );
  });
});
