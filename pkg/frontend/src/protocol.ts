/** Wire types for the session protocol (version 1) and a strict-ish parser.
 *
 * The server serializes with Python's json module, which writes bare
 * Infinity tokens for unreachable distances; JSON.parse rejects those, so
 * the parser rewrites them to 1e999 (which parses to Infinity) first.
 */

export const PROTOCOL_VERSION = 1;

export interface StructureInfo {
  index: number;
  name: string;
  critical: boolean;
  proximity_radius_mm: number;
  force_limit_n: number;
}

export interface HelloMsg {
  type: "hello";
  protocol_version: number;
  scenario_name: string;
  structures: StructureInfo[];
  rates: Record<string, number>;
  snapshot_hz: number;
  max_hand_force_n: number;
  duration_s: number;
  contact_threshold_n: number;
  activation_margin_n: number;
}

export interface SliceDescriptor {
  plane: string;
  value_mm: number;
  shape: number[];
  spacing_mm: number[];
}

export interface SnapshotMsg {
  type: "snapshot";
  seq: number;
  t: number;
  tip_mm: number[];
  distances_mm: number[];
  force_n: number;
  gain: number;
  regime: number;
  structure_index: number | null;
  carved_voxels: number;
  slice: SliceDescriptor;
}

export interface SessionEvent {
  time_s: number;
  kind: string;
  [key: string]: unknown;
}

export interface EventMsg {
  type: "event";
  event: SessionEvent;
}

export interface SliceMsg {
  type: "slice";
  plane: string;
  value_mm: number;
  origin_mm: number[];
  spacing_mm: number[];
  shape: number[];
  labels_b64: string;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  message: string;
}

export interface ByeMsg {
  type: "bye";
  reason: string;
}

export type ServerMsg =
  | HelloMsg
  | SnapshotMsg
  | EventMsg
  | SliceMsg
  | ErrorMsg
  | ByeMsg;

export const REGIME_NAMES: Record<number, string> = {
  0: "FREE",
  1: "CONTACT",
  2: "OVERFORCE",
};

function fail(why: string): never {
  throw new Error(`bad server message: ${why}`);
}

function need(obj: Record<string, unknown>, key: string): unknown {
  if (!(key in obj)) fail(`missing field ${key}`);
  return obj[key];
}

function asNumber(v: unknown, key: string): number {
  if (typeof v !== "number") fail(`${key} is not a number`);
  return v;
}

function asNumberArray(v: unknown, key: string): number[] {
  if (!Array.isArray(v) || v.some((x) => typeof x !== "number")) {
    fail(`${key} is not a number array`);
  }
  return v as number[];
}

/** Bare IEEE specials from Python's json.dumps, outside of string context. */
function sanitize(raw: string): string {
  return raw
    .replace(/([:,[]\s*)-Infinity/g, "$1-1e999")
    .replace(/([:,[]\s*)Infinity/g, "$11e999")
    .replace(/([:,[]\s*)NaN/g, "$1null");
}

export function parseServerMessage(raw: string): ServerMsg {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    data = JSON.parse(sanitize(raw));
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    fail("not an object");
  }
  const obj = data as Record<string, unknown>;
  const type = obj["type"];
  switch (type) {
    case "hello": {
      const structures = need(obj, "structures");
      if (!Array.isArray(structures)) fail("structures is not a list");
      asNumber(need(obj, "protocol_version"), "protocol_version");
      asNumber(need(obj, "max_hand_force_n"), "max_hand_force_n");
      asNumber(need(obj, "activation_margin_n"), "activation_margin_n");
      return obj as unknown as HelloMsg;
    }
    case "snapshot": {
      asNumber(need(obj, "seq"), "seq");
      asNumber(need(obj, "t"), "t");
      asNumber(need(obj, "force_n"), "force_n");
      asNumber(need(obj, "gain"), "gain");
      asNumber(need(obj, "regime"), "regime");
      asNumberArray(need(obj, "tip_mm"), "tip_mm");
      asNumberArray(need(obj, "distances_mm"), "distances_mm");
      const s = need(obj, "structure_index");
      if (s !== null && typeof s !== "number") fail("structure_index type");
      return obj as unknown as SnapshotMsg;
    }
    case "event": {
      const ev = need(obj, "event");
      if (typeof ev !== "object" || ev === null) fail("event payload");
      return obj as unknown as EventMsg;
    }
    case "slice": {
      asNumberArray(need(obj, "shape"), "shape");
      asNumberArray(need(obj, "origin_mm"), "origin_mm");
      asNumberArray(need(obj, "spacing_mm"), "spacing_mm");
      if (typeof need(obj, "labels_b64") !== "string") fail("labels_b64");
      return obj as unknown as SliceMsg;
    }
    case "error": {
      if (typeof need(obj, "code") !== "string") fail("error code");
      return obj as unknown as ErrorMsg;
    }
    case "bye": {
      if (typeof need(obj, "reason") !== "string") fail("bye reason");
      return obj as unknown as ByeMsg;
    }
    default:
      fail(`unknown type ${String(type)}`);
  }
}

export interface SteerCommand {
  force_n: [number, number, number];
  drill_power: boolean;
}

export function encodeSteer(cmd: SteerCommand): string {
  return JSON.stringify({
    type: "steer",
    force_n: cmd.force_n,
    drill_power: cmd.drill_power,
  });
}

export function encodeSetSlice(plane: string, value_mm: number | null): string {
  const msg: Record<string, unknown> = { type: "set_slice", plane };
  if (value_mm !== null) msg["value_mm"] = value_mm;
  return JSON.stringify(msg);
}
