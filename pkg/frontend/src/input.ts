/** Pointer and keyboard state to steering forces.
 *
 * Drag displacement maps linearly to force in the two axes of the visible
 * slice plane (screen y points down, world axis up, hence the sign flip).
 * The wheel and arrow keys accumulate force along the remaining axis.
 * Releasing the pointer zeroes the planar components at once, so the next
 * scheduled command carries zero drag force.
 */

import { axialAxis, planeAxes, type SlicePlane } from "./slice.js";
import type { SteerCommand } from "./protocol.js";

export interface InputConfig {
  /** Drag gain in newtons per pixel of displacement. */
  newtonsPerPixel: number;
  /** Axial force increment per wheel notch or key press, in newtons. */
  axialStepN: number;
  /** Magnitude clamp applied before send; mirror of the server's clamp. */
  maxForceN: number;
  /** Upper bound on outgoing steer command rate. */
  commandHz: number;
}

export const DEFAULT_INPUT: InputConfig = {
  newtonsPerPixel: 0.08,
  axialStepN: 0.5,
  maxForceN: 10.0,
  commandHz: 50,
};

export class InputTracker {
  plane: SlicePlane = "xz";
  drill = false;
  private dragging = false;
  private anchorX = 0;
  private anchorY = 0;
  private planarN: [number, number] = [0, 0];
  private axialN = 0;

  constructor(public cfg: InputConfig = { ...DEFAULT_INPUT }) {}

  setMaxForce(n: number): void {
    this.cfg.maxForceN = n;
  }

  /** Switching planes re-points the drag axes, so all force is dropped. */
  setPlane(plane: SlicePlane): void {
    if (plane === this.plane) return;
    this.plane = plane;
    this.zeroAll();
  }

  pointerDown(x: number, y: number): void {
    this.dragging = true;
    this.anchorX = x;
    this.anchorY = y;
    this.planarN = [0, 0];
  }

  pointerMove(x: number, y: number): void {
    if (!this.dragging) return;
    const k = this.cfg.newtonsPerPixel;
    // anchor-minus-y so an exactly horizontal drag stays +0, not -0
    this.planarN = [(x - this.anchorX) * k, (this.anchorY - y) * k];
  }

  pointerUp(): void {
    this.dragging = false;
    this.planarN = [0, 0];
  }

  /** Wheel up (negative deltaY) pushes along +axis. */
  wheel(deltaY: number): void {
    if (deltaY === 0) return;
    this.keyAxial(deltaY < 0 ? 1 : -1);
  }

  keyAxial(direction: 1 | -1): void {
    this.axialN += direction * this.cfg.axialStepN;
    const cap = this.cfg.maxForceN;
    if (this.axialN > cap) this.axialN = cap;
    if (this.axialN < -cap) this.axialN = -cap;
  }

  toggleDrill(): void {
    this.drill = !this.drill;
  }

  zeroAll(): void {
    this.dragging = false;
    this.planarN = [0, 0];
    this.axialN = 0;
  }

  /** Assembled world-frame force, magnitude-clamped to maxForceN. */
  currentForce(): [number, number, number] {
    const f: [number, number, number] = [0, 0, 0];
    const [a, b] = planeAxes(this.plane);
    f[a] = this.planarN[0];
    f[b] = this.planarN[1];
    f[axialAxis(this.plane)] = this.axialN;
    const mag = Math.hypot(f[0], f[1], f[2]);
    if (mag > this.cfg.maxForceN) {
      const s = this.cfg.maxForceN / mag;
      f[0] *= s;
      f[1] *= s;
      f[2] *= s;
    }
    return f;
  }

  command(): SteerCommand {
    return { force_n: this.currentForce(), drill_power: this.drill };
  }
}

export interface StampedCommand {
  /** Client timestamp, strictly increasing across the stream. */
  t: number;
  steer: SteerCommand;
}

/** Paces outgoing commands at no more than cfg.commandHz and stamps each
 * with a strictly monotone client time, even if the clock stalls. */
export class CommandScheduler {
  private lastSendAt = -Infinity;
  private lastStamp = -Infinity;

  constructor(
    private hz: number,
    private now: () => number = () => Date.now(),
  ) {
    if (!(hz > 0)) throw new Error("command rate must be positive");
  }

  /** The next command if one is due, else null. */
  next(tracker: InputTracker): StampedCommand | null {
    const t = this.now();
    const periodMs = 1000 / this.hz;
    if (t - this.lastSendAt < periodMs) return null;
    this.lastSendAt = t;
    const stamp = t > this.lastStamp ? t : this.lastStamp + 1e-3;
    this.lastStamp = stamp;
    return { t: stamp, steer: tracker.command() };
  }
}
