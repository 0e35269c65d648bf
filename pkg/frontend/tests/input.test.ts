import { describe, expect, it } from "vitest";
import { CommandScheduler, InputTracker, type InputConfig } from "../src/input.js";

const CFG: InputConfig = {
  newtonsPerPixel: 0.1,
  axialStepN: 0.5,
  maxForceN: 10.0,
  commandHz: 50,
};

function mag(f: [number, number, number]): number {
  return Math.hypot(f[0], f[1], f[2]);
}

describe("InputTracker", () => {
  it("sends zero force with no interaction", () => {
    const tr = new InputTracker({ ...CFG });
    expect(tr.command()).toEqual({ force_n: [0, 0, 0], drill_power: false });
  });

  it("maps drag right by D pixels to (k*D, 0, 0) on the default plane", () => {
    const tr = new InputTracker({ ...CFG });
    tr.pointerDown(100, 100);
    tr.pointerMove(140, 100);
    expect(tr.currentForce()).toEqual([0.1 * 40, 0, 0]);
  });

  it("maps drag up to the second plane axis (screen y points down)", () => {
    const tr = new InputTracker({ ...CFG });
    tr.pointerDown(100, 100);
    tr.pointerMove(100, 70);
    const f = tr.currentForce();
    expect(f[0]).toBeCloseTo(0, 12);
    expect(f[1]).toBeCloseTo(0, 12);
    expect(f[2]).toBeCloseTo(3.0, 12);
  });

  it("uses the selected plane's axes", () => {
    const tr = new InputTracker({ ...CFG });
    tr.setPlane("yz");
    tr.pointerDown(0, 0);
    tr.pointerMove(20, -10);
    const f = tr.currentForce();
    expect(f[0]).toBeCloseTo(0, 12);
    expect(f[1]).toBeCloseTo(2.0, 12);
    expect(f[2]).toBeCloseTo(1.0, 12);
  });

  it("clamps the force magnitude to the configured maximum", () => {
    const tr = new InputTracker({ ...CFG });
    tr.pointerDown(0, 0);
    tr.pointerMove(1000, -1000);
    const f = tr.currentForce();
    expect(mag(f)).toBeCloseTo(10.0, 9);
    expect(f[0]).toBeCloseTo(f[2], 9);
  });

  it("zeroes planar force on release, keeping axial", () => {
    const tr = new InputTracker({ ...CFG });
    tr.wheel(-1);
    tr.pointerDown(0, 0);
    tr.pointerMove(50, 0);
    expect(tr.currentForce()).toEqual([5, 0.5, 0]);
    tr.pointerUp();
    expect(tr.currentForce()).toEqual([0, 0.5, 0]);
  });

  it("ignores moves when not dragging", () => {
    const tr = new InputTracker({ ...CFG });
    tr.pointerMove(500, 500);
    expect(tr.currentForce()).toEqual([0, 0, 0]);
  });

  it("accumulates axial force from the wheel and caps it", () => {
    const tr = new InputTracker({ ...CFG });
    tr.wheel(-1);
    tr.wheel(-1);
    tr.wheel(-1);
    expect(tr.currentForce()).toEqual([0, 1.5, 0]);
    tr.wheel(1);
    expect(tr.currentForce()).toEqual([0, 1.0, 0]);
    for (let i = 0; i < 100; i++) tr.keyAxial(-1);
    expect(tr.currentForce()).toEqual([0, -10, 0]);
  });

  it("drops all force when the plane changes", () => {
    const tr = new InputTracker({ ...CFG });
    tr.wheel(-1);
    tr.pointerDown(0, 0);
    tr.pointerMove(30, 0);
    tr.setPlane("xy");
    expect(tr.currentForce()).toEqual([0, 0, 0]);
  });

  it("toggles the drill and zeroes everything on demand", () => {
    const tr = new InputTracker({ ...CFG });
    tr.toggleDrill();
    expect(tr.command().drill_power).toBe(true);
    tr.wheel(-1);
    tr.zeroAll();
    tr.toggleDrill();
    expect(tr.command()).toEqual({ force_n: [0, 0, 0], drill_power: false });
  });

  it("setMaxForce tightens the clamp", () => {
    const tr = new InputTracker({ ...CFG });
    tr.setMaxForce(2.0);
    tr.pointerDown(0, 0);
    tr.pointerMove(1000, 0);
    expect(mag(tr.currentForce())).toBeCloseTo(2.0, 9);
  });
});

describe("CommandScheduler", () => {
  it("never exceeds the configured rate", () => {
    let t = 0;
    const sched = new CommandScheduler(50, () => t);
    const tr = new InputTracker({ ...CFG });
    let sent = 0;
    for (let step = 0; step < 1000; step++) {
      t = step;
      if (sched.next(tr)) sent++;
    }
    expect(sent).toBeLessThanOrEqual(Math.floor(999 / 20) + 1);
    expect(sent).toBeGreaterThan(40);
  });

  it("stamps commands strictly monotonically under clock jitter", () => {
    const clock = [0, 25, 50, 50.5, 49, 80, 80, 120, 119, 160];
    let i = 0;
    const sched = new CommandScheduler(50, () => clock[Math.min(i++, clock.length - 1)]!);
    const tr = new InputTracker({ ...CFG });
    const stamps: number[] = [];
    for (let k = 0; k < clock.length; k++) {
      const cmd = sched.next(tr);
      if (cmd) stamps.push(cmd.t);
    }
    expect(stamps.length).toBeGreaterThanOrEqual(4);
    for (let k = 1; k < stamps.length; k++) {
      expect(stamps[k]!).toBeGreaterThan(stamps[k - 1]!);
    }
  });

  it("snapshots the tracker state into the command", () => {
    let t = 0;
    const sched = new CommandScheduler(50, () => t);
    const tr = new InputTracker({ ...CFG });
    tr.pointerDown(0, 0);
    tr.pointerMove(10, 0);
    const cmd = sched.next(tr)!;
    expect(cmd.steer.force_n).toEqual([1, 0, 0]);
    tr.pointerUp();
    t = 20;
    const cmd2 = sched.next(tr)!;
    expect(cmd2.steer.force_n).toEqual([0, 0, 0]);
  });

  it("rejects a non-positive rate", () => {
    expect(() => new CommandScheduler(0)).toThrow();
  });
});
