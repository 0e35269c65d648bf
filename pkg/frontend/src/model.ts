/** View state. Every number exposed for rendering is copied verbatim from
 * a received message; nothing here computes physics or fills gaps. */

import type {
  ErrorMsg,
  HelloMsg,
  ServerMsg,
  SessionEvent,
  SliceMsg,
  SnapshotMsg,
  StructureInfo,
} from "./protocol.js";
import { REGIME_NAMES } from "./protocol.js";
import { TraceBuffer } from "./traces.js";

export type Connection = "connecting" | "live" | "closed";

export interface RegimeMarker {
  t: number;
  regime: number;
}

export interface GuideLines {
  /** Force limit of the currently active structure. */
  limit: number;
  /** Limit plus the activation margin (the hard bound). */
  hard: number;
  structure: StructureInfo;
}

export interface Readout {
  label: string;
  text: string;
}

export class ViewModel {
  connection: Connection = "connecting";
  hello: HelloMsg | null = null;
  snapshot: SnapshotMsg | null = null;
  slice: SliceMsg | null = null;
  lastError: ErrorMsg | null = null;
  byeReason: string | null = null;
  readonly forceTrace = new TraceBuffer();
  readonly gainTrace = new TraceBuffer();
  markers: RegimeMarker[] = [];
  events: SessionEvent[] = [];

  apply(msg: ServerMsg): void {
    switch (msg.type) {
      case "hello":
        // a hello means a fresh session; stale traces would be fabrication
        this.hello = msg;
        this.snapshot = null;
        this.slice = null;
        this.byeReason = null;
        this.lastError = null;
        this.forceTrace.clear();
        this.gainTrace.clear();
        this.markers = [];
        this.events = [];
        break;
      case "snapshot":
        this.snapshot = msg;
        this.forceTrace.push(msg.t, msg.force_n);
        this.gainTrace.push(msg.t, msg.gain);
        break;
      case "event":
        this.events.push(msg.event);
        if (msg.event.kind === "regime_change") {
          this.markers.push({
            t: msg.event.time_s,
            regime: Number(msg.event["regime"]),
          });
        }
        break;
      case "slice":
        this.slice = msg;
        break;
      case "error":
        this.lastError = msg;
        break;
      case "bye":
        this.byeReason = msg.reason;
        break;
    }
  }

  setConnection(status: Connection): void {
    this.connection = status;
    if (status !== "live") this.snapshotStale = true;
  }

  /** True once the connection dropped after data was shown. */
  snapshotStale = false;

  structureByIndex(index: number | null): StructureInfo | null {
    if (index === null || !this.hello) return null;
    return this.hello.structures.find((s) => s.index === index) ?? null;
  }

  /** Guide lines for the currently active structure, if any. */
  guides(): GuideLines | null {
    if (!this.hello || !this.snapshot) return null;
    const s = this.structureByIndex(this.snapshot.structure_index);
    if (!s) return null;
    return {
      limit: s.force_limit_n,
      hard: s.force_limit_n + this.hello.activation_margin_n,
      structure: s,
    };
  }

  /** Input is live only with an open session that has said hello. */
  inputEnabled(): boolean {
    return this.connection === "live" && this.hello !== null && this.byeReason === null;
  }

  /** Numeric panel. Values are formatted copies of received fields. */
  readouts(): Readout[] {
    const out: Readout[] = [];
    const snap = this.snapshot;
    if (!snap) return out;
    out.push({ label: "t", text: `${snap.t.toFixed(3)} s` });
    out.push({ label: "|F_T|", text: `${snap.force_n.toFixed(3)} N` });
    out.push({ label: "gain", text: snap.gain.toFixed(3) });
    out.push({
      label: "regime",
      text: REGIME_NAMES[snap.regime] ?? String(snap.regime),
    });
    const s = this.structureByIndex(snap.structure_index);
    out.push({ label: "structure", text: s ? s.name : "none" });
    out.push({ label: "carved", text: String(snap.carved_voxels) });
    out.push({ label: "seq", text: String(snap.seq) });
    return out;
  }

  /** Distance list rows: one per structure from the hello table, with the
   * matching entry of the latest snapshot's distances. */
  distanceRows(): { structure: StructureInfo; distance_mm: number }[] {
    if (!this.hello || !this.snapshot) return [];
    return this.hello.structures.map((structure, i) => ({
      structure,
      distance_mm: this.snapshot!.distances_mm[i] ?? Infinity,
    }));
  }
}
