"""Live steering sessions over WebSocket.

Protocol (JSON text messages, protocol_version 1):

server -> client
    hello     {"type": "hello", "protocol_version": 1, "scenario_name": str,
               "structures": [{"index", "name", "critical", "proximity_radius_mm",
               "force_limit_n"}...], "rates": {...}, "snapshot_hz": float,
               "max_hand_force_n": float, "duration_s": float,
               "contact_threshold_n": float, "activation_margin_n": float}
              sent once on connect, before anything else.
    snapshot  {"type": "snapshot", "seq": int, "t": float, "tip_mm": [3],
               "distances_mm": [n], "force_n": float, "gain": float,
               "regime": 0|1|2, "structure_index": int|null,
               "carved_voxels": int, "slice": {"plane", "value_mm",
               "shape": [2], "spacing_mm": [2]}}
              decimated state stream, default 60 Hz of session time; "slice"
              describes the currently selected cross-section (payload rides
              the separate slice message).
    event     {"type": "event", "event": {...}}
              every controller regime/structure transition and every carve
              breach, never decimated (reliable stream, one message each).
    slice     {"type": "slice", "plane": "xz", "value_mm": float,
               "origin_mm": [2], "spacing_mm": [2], "shape": [w, h],
               "labels_b64": str}
              anatomy cross-section (uint8 labels, base64, C order, x-major);
              sent on connect, on slice change, and throttled after carving.
    error     {"type": "error", "code": str, "message": str}
    bye       {"type": "bye", "reason": str} before server-side close.

client -> server
    steer     {"type": "steer", "force_n": [3], "drill_power": bool}
              zero-order-held until the next command; force clamped to
              max_hand_force_n; gaps > deadman_s decay the held force to zero.
    set_slice {"type": "set_slice", "plane": "xy"|"xz"|"yz", "value_mm": float}

Each connection gets its own isolated session. Session time is paced against
the wall clock in "real" mode (catch-up bounded, excess backlog dropped) or
free-running in "fast" mode. The session records a normal run log, so a live
recording replays through the batch engine to the identical state trace.
"""

from __future__ import annotations

import asyncio
import base64
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .scenario import LiveInput, Scenario
from .simulate import SimSession

PROTOCOL_VERSION = 1
SLICE_PLANES = ("xy", "xz", "yz")
_PLANE_AXIS = {"yz": 0, "xz": 1, "xy": 2}
CATCH_UP_LIMIT_S = 0.05


def _clamp_force(force, max_n: float) -> np.ndarray:
    f = np.asarray(force, dtype=float).reshape(3)
    if not np.all(np.isfinite(f)):
        raise ValueError("force must be finite")
    mag = float(np.linalg.norm(f))
    if mag > max_n and mag > 0.0:
        f = f * (max_n / mag)
    return f


def _hello_message(scenario: Scenario, session: SimSession, snapshot_hz: float) -> dict:
    return {
        "type": "hello",
        "protocol_version": PROTOCOL_VERSION,
        "scenario_name": scenario.name,
        "structures": [
            {
                "index": s.index,
                "name": s.name,
                "critical": s.critical,
                "proximity_radius_mm": s.proximity_radius_mm,
                "force_limit_n": s.force_limit_n,
            }
            for s in session.structures
        ],
        "rates": scenario.rates.to_dict(),
        "snapshot_hz": snapshot_hz,
        "max_hand_force_n": scenario.max_hand_force_n,
        "duration_s": scenario.duration_s,
        "contact_threshold_n": scenario.controller.contact_threshold_n,
        "activation_margin_n": scenario.controller.activation_margin_n,
    }


def _slice_index(session: SimSession, plane: str, value_mm: Optional[float]) -> tuple[int, int]:
    vol = session.volume
    axis = _PLANE_AXIS[plane]
    if value_mm is None:
        value_mm = float(session.snapshot_state()["tip_mm"][axis])
    idx = int(round((value_mm - vol.origin_mm[axis]) / vol.spacing_mm[axis]))
    return axis, min(max(idx, 0), vol.shape[axis] - 1)


def _slice_descriptor(session: SimSession, plane: str, value_mm: Optional[float]) -> dict:
    """Plane and resolution of the currently selected anatomy slice."""
    vol = session.volume
    axis, idx = _slice_index(session, plane, value_mm)
    keep = [k for k in range(3) if k != axis]
    return {
        "plane": plane,
        "value_mm": float(vol.origin_mm[axis] + idx * vol.spacing_mm[axis]),
        "shape": [int(vol.shape[k]) for k in keep],
        "spacing_mm": [float(vol.spacing_mm[k]) for k in keep],
    }


def _slice_message(session: SimSession, plane: str, value_mm: Optional[float]) -> dict:
    vol = session.volume
    axis, idx = _slice_index(session, plane, value_mm)
    keep = [k for k in range(3) if k != axis]
    sl = [slice(None)] * 3
    sl[axis] = idx
    labels = np.ascontiguousarray(vol.labels[tuple(sl)])
    return {
        "type": "slice",
        "plane": plane,
        "value_mm": float(vol.origin_mm[axis] + idx * vol.spacing_mm[axis]),
        "axes": ["xyz"[k] for k in keep],
        "origin_mm": [float(vol.origin_mm[k]) for k in keep],
        "spacing_mm": [float(vol.spacing_mm[k]) for k in keep],
        "shape": list(labels.shape),
        "labels_b64": base64.b64encode(labels.tobytes()).decode("ascii"),
    }


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    pace: str = "real"              # real | fast
    snapshot_hz: float = 60.0
    slice_hz: float = 5.0
    log_dir: Optional[str] = None

    def __post_init__(self):
        if self.pace not in ("real", "fast"):
            raise ValueError("pace must be 'real' or 'fast'")
        if self.snapshot_hz <= 0 or self.slice_hz <= 0:
            raise ValueError("rates must be positive")


class LiveSessionRunner:
    """Drives one SimSession against one WebSocket connection."""

    def __init__(self, scenario: Scenario, config: ServeConfig):
        self.scenario = scenario
        self.config = config
        self.provider = LiveInput(
            deadman_s=float(scenario.input.get("deadman_s", 0.2)),
            decay_s=float(scenario.input.get("decay_s", 0.1)),
        )
        live_scenario = scenario
        if scenario.input.get("type") != "live":
            live_scenario = Scenario.from_dict({**scenario.to_dict(),
                                                "input": {"type": "live"}})
        self.session = SimSession(live_scenario, self.provider)
        self.log = None

    async def run(self, ws) -> None:
        session = self.session
        cfg = self.config
        snap_every = max(1, int(round(session.scenario.rates.sim_hz / cfg.snapshot_hz)))
        slice_min_gap = 1.0 / cfg.slice_hz

        await ws.send(json.dumps(_hello_message(self.scenario, session, cfg.snapshot_hz)))
        plane, plane_value = "xz", None
        await ws.send(json.dumps(_slice_message(session, plane, plane_value)))

        queue: asyncio.Queue = asyncio.Queue()

        async def ingress():
            try:
                async for raw in ws:
                    await queue.put(raw)
            except Exception:
                pass
            await queue.put(None)

        ingress_task = asyncio.create_task(ingress())
        seq = 0
        sent_events = 0
        last_slice_wall = time.monotonic()
        last_carve_total = 0
        slice_dirty = False
        closed = False
        dt = session.dt
        next_deadline = time.monotonic()

        try:
            while not session.done:
                # ingest pending commands
                while True:
                    try:
                        raw = queue.get_nowait()
                    except asyncio.QueueEmpty:
                        break
                    if raw is None:
                        closed = True
                        break
                    try:
                        msg = json.loads(raw)
                        kind = msg.get("type")
                        if kind == "steer":
                            force = _clamp_force(msg["force_n"],
                                                 self.scenario.max_hand_force_n)
                            self.provider.submit(session.time_s, force,
                                                 bool(msg.get("drill_power", False)))
                        elif kind == "set_slice":
                            new_plane = str(msg.get("plane", "xz"))
                            if new_plane not in SLICE_PLANES:
                                raise ValueError(f"bad plane {new_plane!r}")
                            value = msg.get("value_mm")
                            # commit only after both fields parse
                            plane = new_plane
                            plane_value = None if value is None else float(value)
                            slice_dirty = True
                        else:
                            raise ValueError(f"unknown message type {kind!r}")
                    except Exception as exc:
                        await ws.send(json.dumps({
                            "type": "error", "code": "bad_message", "message": str(exc)}))
                if closed:
                    break

                session.step_tick()

                for ev in session.events[sent_events:]:
                    await ws.send(json.dumps({"type": "event", "event": ev}))
                sent_events = len(session.events)

                if (session.tick - 1) % snap_every == 0:
                    snap = session.snapshot_state()
                    snap["type"] = "snapshot"
                    snap["seq"] = seq
                    snap["slice"] = _slice_descriptor(session, plane, plane_value)
                    seq += 1
                    await ws.send(json.dumps(snap))

                if session.carve_total != last_carve_total:
                    last_carve_total = session.carve_total
                    slice_dirty = True
                now = time.monotonic()
                if slice_dirty and (now - last_slice_wall) >= slice_min_gap:
                    await ws.send(json.dumps(_slice_message(session, plane, plane_value)))
                    last_slice_wall = now
                    slice_dirty = False

                if cfg.pace == "real":
                    next_deadline += dt
                    now = time.monotonic()
                    behind = now - next_deadline
                    if behind > CATCH_UP_LIMIT_S:
                        # drop backlog beyond the catch-up bound instead of racing
                        next_deadline = now
                    elif behind < 0:
                        await asyncio.sleep(-behind)
                elif session.tick % 256 == 0:
                    await asyncio.sleep(0)

            if slice_dirty:
                await ws.send(json.dumps(_slice_message(session, plane, plane_value)))
            try:
                await ws.send(json.dumps({
                    "type": "bye",
                    "reason": "finished" if session.done else "client_closed"}))
            except Exception:
                pass
        finally:
            ingress_task.cancel()
            self.log = session.finish()
            if self.config.log_dir is not None:
                out = Path(self.config.log_dir)
                out.mkdir(parents=True, exist_ok=True)
                name = f"{self.scenario.name}_seed{self.scenario.seed}_live.dtlog"
                self.log.save(out / name)


async def serve_session(scenario: Scenario, config: ServeConfig = ServeConfig(),
                        ready: Optional[asyncio.Event] = None,
                        stop: Optional[asyncio.Event] = None) -> None:
    """Serve live sessions until stopped; each connection is independent."""
    from websockets.asyncio.server import serve

    async def handler(ws):
        runner = LiveSessionRunner(scenario, config)
        try:
            await runner.run(ws)
        finally:
            try:
                await ws.close()
            except Exception:
                pass

    async with serve(handler, config.host, config.port) as server:
        if config.port == 0:
            addrs = [s.getsockname() for s in server.sockets]
            print(f"listening on {addrs[0][0]}:{addrs[0][1]}", flush=True)
        else:
            print(f"listening on {config.host}:{config.port}", flush=True)
        if ready is not None:
            ready.set()
        if stop is not None:
            await stop.wait()
        else:
            await asyncio.Future()


def bound_port(server) -> int:
    return server.sockets[0].getsockname()[1]
