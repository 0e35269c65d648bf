/** Browser entry point: wires the socket, the view model, the input
 * tracker, and the canvases together.
 *
 * Network messages are queued and applied between animation frames; the
 * command pump runs on its own interval and only sends while the session
 * is live.
 */

import { CommandScheduler, InputTracker } from "./input.js";
import { ViewModel } from "./model.js";
import { SessionClient, type WsLike } from "./net.js";
import {
  encodeSetSlice,
  encodeSteer,
  type ServerMsg,
  type SteerCommand,
} from "./protocol.js";
import { Renderer } from "./render.js";
import { SLICE_PLANES, type SlicePlane } from "./slice.js";

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

const params = new URLSearchParams(location.search);
const url =
  params.get("server") ??
  `ws://${location.hostname || "localhost"}:${params.get("port") ?? "8765"}`;

const model = new ViewModel();
const tracker = new InputTracker();
const scheduler = new CommandScheduler(tracker.cfg.commandHz);
const queue: ServerMsg[] = [];
let lastSent: SteerCommand | null = null;

const renderer = new Renderer(
  $("traces") as HTMLCanvasElement,
  $("slice") as HTMLCanvasElement,
  $("banner"),
  $("readouts"),
  $("distances"),
);

const client = new SessionClient(
  url,
  {
    onMessage: (m) => queue.push(m),
    onStatus: (s) => model.setConnection(s),
    onParseError: (err) => console.warn(err.message),
  },
  (u) => new WebSocket(u) as unknown as WsLike,
);
client.connect();

function frame(): void {
  while (queue.length) {
    const msg = queue.shift()!;
    model.apply(msg);
    if (msg.type === "hello") {
      tracker.setMaxForce(msg.max_hand_force_n);
      tracker.zeroAll();
      lastSent = null;
    }
  }
  renderer.render(model, lastSent);
  const drill = $("drill");
  drill.textContent = tracker.drill ? "drill ON" : "drill off";
  drill.className = tracker.drill ? "drill on" : "drill";
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);

setInterval(() => {
  const cmd = scheduler.next(tracker);
  if (!cmd || !model.inputEnabled()) return;
  if (client.send(encodeSteer(cmd.steer))) lastSent = cmd.steer;
}, 5);

const sliceEl = $("slice") as HTMLCanvasElement;
sliceEl.addEventListener("pointerdown", (e) => {
  if (!model.inputEnabled()) return;
  sliceEl.setPointerCapture(e.pointerId);
  tracker.pointerDown(e.offsetX, e.offsetY);
});
sliceEl.addEventListener("pointermove", (e) => {
  tracker.pointerMove(e.offsetX, e.offsetY);
});
for (const kind of ["pointerup", "pointercancel"] as const) {
  sliceEl.addEventListener(kind, () => tracker.pointerUp());
}
sliceEl.addEventListener(
  "wheel",
  (e) => {
    e.preventDefault();
    if (model.inputEnabled()) tracker.wheel(e.deltaY);
  },
  { passive: false },
);

function selectPlane(plane: SlicePlane): void {
  tracker.setPlane(plane);
  client.send(encodeSetSlice(plane, null));
  for (const p of SLICE_PLANES) {
    const b = document.getElementById(`plane-${p}`);
    if (b) b.className = p === plane ? "plane sel" : "plane";
  }
}

for (const p of SLICE_PLANES) {
  const b = document.getElementById(`plane-${p}`);
  if (b) b.addEventListener("click", () => selectPlane(p));
}

window.addEventListener("keydown", (e) => {
  if (e.repeat && e.key !== "w" && e.key !== "s") return;
  switch (e.key) {
    case "1":
      selectPlane("xy");
      break;
    case "2":
      selectPlane("xz");
      break;
    case "3":
      selectPlane("yz");
      break;
    case "w":
    case "ArrowUp":
      if (model.inputEnabled()) tracker.keyAxial(1);
      break;
    case "s":
    case "ArrowDown":
      if (model.inputEnabled()) tracker.keyAxial(-1);
      break;
    case " ":
      e.preventDefault();
      if (model.inputEnabled()) tracker.toggleDrill();
      break;
    case "0":
    case "Escape":
      tracker.zeroAll();
      break;
  }
});
