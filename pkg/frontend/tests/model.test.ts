import { describe, expect, it } from "vitest";
import { ViewModel } from "../src/model.js";
import { parseServerMessage, type ServerMsg } from "../src/protocol.js";
import { HELLO, SNAPSHOT } from "./protocol.test.js";

function msg(obj: object): ServerMsg {
  return parseServerMessage(JSON.stringify(obj));
}

function freshModel(): ViewModel {
  const m = new ViewModel();
  m.setConnection("live");
  m.apply(msg(HELLO));
  return m;
}

describe("ViewModel", () => {
  it("stores hello and enables input only when live", () => {
    const m = new ViewModel();
    expect(m.inputEnabled()).toBe(false);
    m.apply(msg(HELLO));
    expect(m.inputEnabled()).toBe(false);
    m.setConnection("live");
    expect(m.inputEnabled()).toBe(true);
    expect(m.hello!.scenario_name).toBe("nerve_press");
  });

  it("pushes exactly one trace point per snapshot, verbatim", () => {
    const m = freshModel();
    m.apply(msg(SNAPSHOT));
    m.apply(msg({ ...SNAPSHOT, seq: 8, t: 1.22, force_n: 1.02, gain: 0.58 }));
    expect(m.forceTrace.points()).toEqual([
      { t: 1.205, value: 0.91 },
      { t: 1.22, value: 1.02 },
    ]);
    expect(m.gainTrace.points()).toEqual([
      { t: 1.205, value: 0.63 },
      { t: 1.22, value: 0.58 },
    ]);
    expect(m.snapshot!.seq).toBe(8);
  });

  it("renders readouts straight from received fields", () => {
    const m = freshModel();
    m.apply(msg(SNAPSHOT));
    const byLabel = new Map(m.readouts().map((r) => [r.label, r.text]));
    expect(byLabel.get("t")).toBe("1.205 s");
    expect(byLabel.get("|F_T|")).toBe("0.910 N");
    expect(byLabel.get("gain")).toBe("0.630");
    expect(byLabel.get("regime")).toBe("OVERFORCE");
    expect(byLabel.get("structure")).toBe("facial_nerve");
    expect(byLabel.get("carved")).toBe("14");
    expect(byLabel.get("seq")).toBe("7");
  });

  it("derives guide lines from the active structure only", () => {
    const m = freshModel();
    m.apply(msg(SNAPSHOT));
    const g = m.guides()!;
    expect(g.limit).toBeCloseTo(0.8, 12);
    expect(g.hard).toBeCloseTo(1.0, 12);
    expect(g.structure.name).toBe("facial_nerve");

    m.apply(msg({ ...SNAPSHOT, structure_index: 4 }));
    const g4 = m.guides()!;
    expect(g4.limit).toBeCloseTo(1.3, 12);
    expect(g4.hard).toBeCloseTo(1.5, 12);

    m.apply(msg({ ...SNAPSHOT, structure_index: null }));
    expect(m.guides()).toBeNull();
  });

  it("collects regime markers from events and ignores other kinds", () => {
    const m = freshModel();
    m.apply(
      msg({
        type: "event",
        event: { time_s: 2.0, kind: "regime_change", regime: 1 },
      }),
    );
    m.apply(
      msg({
        type: "event",
        event: { time_s: 2.5, kind: "structure_change", regime: 1 },
      }),
    );
    m.apply(
      msg({
        type: "event",
        event: { time_s: 3.0, kind: "regime_change", regime: 2 },
      }),
    );
    expect(m.markers).toEqual([
      { t: 2.0, regime: 1 },
      { t: 3.0, regime: 2 },
    ]);
    expect(m.events).toHaveLength(3);
  });

  it("pairs distances with hello structures by slot", () => {
    const m = freshModel();
    m.apply(msg(SNAPSHOT));
    const rows = m.distanceRows();
    expect(rows).toHaveLength(5);
    expect(rows[0]!.structure.name).toBe("facial_nerve");
    expect(rows[0]!.distance_mm).toBeCloseTo(0.52, 12);
    expect(rows[4]!.structure.name).toBe("trabecular_bone");
    expect(rows[4]!.distance_mm).toBeCloseTo(0.3, 12);
  });

  it("disables input after bye and reports the reason", () => {
    const m = freshModel();
    expect(m.inputEnabled()).toBe(true);
    m.apply(msg({ type: "bye", reason: "finished" }));
    expect(m.inputEnabled()).toBe(false);
    expect(m.byeReason).toBe("finished");
  });

  it("disables input when the connection drops", () => {
    const m = freshModel();
    expect(m.inputEnabled()).toBe(true);
    m.setConnection("closed");
    expect(m.inputEnabled()).toBe(false);
  });

  it("resets everything on a fresh hello", () => {
    const m = freshModel();
    m.apply(msg(SNAPSHOT));
    m.apply(
      msg({
        type: "event",
        event: { time_s: 2.0, kind: "regime_change", regime: 1 },
      }),
    );
    m.apply(msg({ type: "bye", reason: "finished" }));
    m.apply(msg(HELLO));
    expect(m.snapshot).toBeNull();
    expect(m.forceTrace.length).toBe(0);
    expect(m.gainTrace.length).toBe(0);
    expect(m.markers).toEqual([]);
    expect(m.events).toEqual([]);
    expect(m.byeReason).toBeNull();
  });

  it("keeps the last error", () => {
    const m = freshModel();
    m.apply(msg({ type: "error", code: "bad_message", message: "nope" }));
    expect(m.lastError!.code).toBe("bad_message");
  });
});
