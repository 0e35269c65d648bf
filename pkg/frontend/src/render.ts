/** Canvas drawing for the console. Pure presentation: every number that
 * ends up on screen comes from the view model (received fields) or, for the
 * input echo arrow, from the last command actually sent. */

import type { ViewModel } from "./model.js";
import type { SteerCommand } from "./protocol.js";
import {
  PALETTE,
  decodeLabels,
  formatDistance,
  planeAxes,
  tipToSliceCoords,
} from "./slice.js";
import type { SliceMsg } from "./protocol.js";

const TRACE_WINDOW_S = 12;
const REGIME_COLORS: Record<number, string> = {
  0: "#4caf6d",
  1: "#e0a33b",
  2: "#e05555",
};

interface Strip {
  x: number;
  y: number;
  w: number;
  h: number;
}

function css(rgb: [number, number, number]): string {
  return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
}

export class Renderer {
  private sliceCacheKey: string | null = null;
  private sliceBitmap: HTMLCanvasElement | null = null;

  constructor(
    private traceCanvas: HTMLCanvasElement,
    private sliceCanvas: HTMLCanvasElement,
    private banner: HTMLElement,
    private readoutsEl: HTMLElement,
    private distancesEl: HTMLElement,
  ) {}

  render(model: ViewModel, lastSent: SteerCommand | null): void {
    this.drawTraces(model);
    this.drawSlice(model, lastSent);
    this.drawBanner(model);
    this.drawReadouts(model);
    this.drawDistances(model);
  }

  private drawBanner(model: ViewModel): void {
    const el = this.banner;
    const name = model.hello ? ` ${model.hello.scenario_name}` : "";
    if (model.byeReason !== null) {
      el.textContent = `session over (${model.byeReason})${name}`;
      el.className = "banner over";
    } else if (model.connection === "live") {
      el.textContent = `live${name}`;
      el.className = "banner live";
    } else if (model.connection === "connecting") {
      el.textContent = "connecting";
      el.className = "banner wait";
    } else {
      el.textContent = "disconnected, retrying (input disabled)";
      el.className = "banner down";
    }
    if (model.lastError) {
      el.textContent += ` [${model.lastError.code}]`;
    }
  }

  private drawReadouts(model: ViewModel): void {
    const rows = model.readouts();
    const parts: string[] = [];
    for (const r of rows) {
      parts.push(
        `<span class="ro"><span class="lbl">${r.label}</span> ${r.text}</span>`,
      );
    }
    this.readoutsEl.innerHTML = parts.join("");
  }

  private drawDistances(model: ViewModel): void {
    const rows = model.distanceRows();
    const active = model.snapshot?.structure_index ?? null;
    const parts: string[] = [];
    for (const { structure, distance_mm } of rows) {
      const color = css(PALETTE[structure.index] ?? [200, 200, 200]);
      const hot = structure.index === active ? " hot" : "";
      parts.push(
        `<div class="drow${hot}">` +
          `<span class="sw" style="background:${color}"></span>` +
          `<span class="nm">${structure.name}</span>` +
          `<span class="dv">${formatDistance(distance_mm)}</span>` +
          `<span class="lim">limit ${structure.force_limit_n.toFixed(1)} N</span>` +
          `</div>`,
      );
    }
    this.distancesEl.innerHTML = parts.join("");
  }

  private drawTraces(model: ViewModel): void {
    const c = this.traceCanvas;
    const g = c.getContext("2d");
    if (!g) return;
    g.fillStyle = "#101014";
    g.fillRect(0, 0, c.width, c.height);

    const pad = 34;
    const top: Strip = { x: pad, y: 8, w: c.width - pad - 8, h: c.height * 0.52 };
    const bot: Strip = {
      x: pad,
      y: top.y + top.h + 22,
      w: top.w,
      h: c.height - top.h - 52,
    };

    const force = model.forceTrace.points();
    const gain = model.gainTrace.points();
    const tMax = force.length ? force[force.length - 1]!.t : 0;
    const tMin = Math.max(0, tMax - TRACE_WINDOW_S);

    const guides = model.guides();
    let fMax = 1.0;
    for (const p of force) if (p.t >= tMin && p.value > fMax) fMax = p.value;
    if (guides && guides.hard > fMax) fMax = guides.hard;
    fMax *= 1.15;

    let gMax = 1.0;
    for (const p of gain) if (p.t >= tMin && p.value > gMax) gMax = p.value;
    gMax *= 1.1;

    this.strip(g, top, "|F_T| (N)", force, tMin, tMax, fMax, "#7fc4ff");
    this.strip(g, bot, "gain", gain, tMin, tMax, gMax, "#8fe388");

    if (guides) {
      const color = css(PALETTE[guides.structure.index] ?? [220, 220, 220]);
      this.hline(g, top, guides.limit / fMax, color, []);
      this.hline(g, top, guides.hard / fMax, color, [5, 4]);
      g.fillStyle = color;
      g.font = "10px monospace";
      g.fillText(
        `${guides.structure.name} ${guides.limit.toFixed(1)}N`,
        top.x + 4,
        top.y + top.h - (guides.limit / fMax) * top.h - 3,
      );
    }

    for (const m of model.markers) {
      if (m.t < tMin || m.t > tMax) continue;
      const x = top.x + ((m.t - tMin) / Math.max(tMax - tMin, 1e-9)) * top.w;
      g.strokeStyle = REGIME_COLORS[m.regime] ?? "#999";
      g.setLineDash([2, 3]);
      g.beginPath();
      g.moveTo(x, top.y);
      g.lineTo(x, bot.y + bot.h);
      g.stroke();
      g.setLineDash([]);
    }
  }

  private hline(
    g: CanvasRenderingContext2D,
    s: Strip,
    frac: number,
    color: string,
    dash: number[],
  ): void {
    if (frac < 0 || frac > 1) return;
    const y = s.y + s.h - frac * s.h;
    g.strokeStyle = color;
    g.setLineDash(dash);
    g.beginPath();
    g.moveTo(s.x, y);
    g.lineTo(s.x + s.w, y);
    g.stroke();
    g.setLineDash([]);
  }

  private strip(
    g: CanvasRenderingContext2D,
    s: Strip,
    label: string,
    pts: readonly { t: number; value: number }[],
    tMin: number,
    tMax: number,
    vMax: number,
    color: string,
  ): void {
    g.strokeStyle = "#2a2a32";
    g.strokeRect(s.x, s.y, s.w, s.h);
    g.fillStyle = "#8a8a94";
    g.font = "11px monospace";
    g.fillText(label, s.x + 4, s.y + 12);
    g.fillText(vMax.toFixed(1), 2, s.y + 10);
    g.fillText("0", 2, s.y + s.h);

    const span = Math.max(tMax - tMin, 1e-9);
    g.strokeStyle = color;
    g.beginPath();
    let started = false;
    for (const p of pts) {
      if (p.t < tMin) continue;
      const x = s.x + ((p.t - tMin) / span) * s.w;
      const y = s.y + s.h - Math.min(p.value / vMax, 1) * s.h;
      if (started) g.lineTo(x, y);
      else {
        g.moveTo(x, y);
        started = true;
      }
    }
    g.stroke();
  }

  private sliceToBitmap(msg: SliceMsg): HTMLCanvasElement {
    const key = `${msg.plane}:${msg.value_mm}:${msg.labels_b64.length}:${msg.labels_b64.slice(0, 32)}`;
    if (this.sliceBitmap && this.sliceCacheKey === key) return this.sliceBitmap;
    const labels = decodeLabels(msg);
    const w = msg.shape[0]!;
    const h = msg.shape[1]!;
    const off = document.createElement("canvas");
    off.width = w;
    off.height = h;
    const g = off.getContext("2d")!;
    const img = g.createImageData(w, h);
    for (let i = 0; i < w; i++) {
      for (let j = 0; j < h; j++) {
        const label = labels[i * h + j]!;
        const rgb = PALETTE[label] ?? [255, 0, 255];
        // flip j so the second world axis points up on screen
        const o = ((h - 1 - j) * w + i) * 4;
        img.data[o] = rgb[0];
        img.data[o + 1] = rgb[1];
        img.data[o + 2] = rgb[2];
        img.data[o + 3] = 255;
      }
    }
    g.putImageData(img, 0, 0);
    this.sliceBitmap = off;
    this.sliceCacheKey = key;
    return off;
  }

  private drawSlice(model: ViewModel, lastSent: SteerCommand | null): void {
    const c = this.sliceCanvas;
    const g = c.getContext("2d");
    if (!g) return;
    g.fillStyle = "#101014";
    g.fillRect(0, 0, c.width, c.height);
    const msg = model.slice;
    if (!msg) {
      g.fillStyle = "#8a8a94";
      g.font = "12px monospace";
      g.fillText("no slice yet", 12, 20);
      return;
    }
    const bitmap = this.sliceToBitmap(msg);
    const scale = Math.min(c.width / bitmap.width, c.height / bitmap.height);
    const dw = bitmap.width * scale;
    const dh = bitmap.height * scale;
    const ox = (c.width - dw) / 2;
    const oy = (c.height - dh) / 2;
    g.imageSmoothingEnabled = false;
    g.drawImage(bitmap, ox, oy, dw, dh);

    g.fillStyle = "#8a8a94";
    g.font = "11px monospace";
    g.fillText(`${msg.plane} @ ${msg.value_mm.toFixed(1)} mm`, ox + 4, oy + 14);

    const snap = model.snapshot;
    if (!snap) return;
    const uv = tipToSliceCoords(snap.tip_mm, msg);
    if (!uv) return;
    const px = ox + (uv[0] + 0.5) * scale;
    const py = oy + dh - (uv[1] + 0.5) * scale;

    if (model.hello) {
      const perMm = scale / (msg.spacing_mm[0] ?? 1);
      for (const s of model.hello.structures) {
        const slot = model.hello.structures.indexOf(s);
        const d = snap.distances_mm[slot];
        if (d === undefined || !Number.isFinite(d)) continue;
        const r = Math.max(d, 0) * perMm;
        if (r > Math.hypot(c.width, c.height)) continue;
        g.strokeStyle = css(PALETTE[s.index] ?? [200, 200, 200]);
        g.setLineDash([3, 4]);
        g.beginPath();
        g.arc(px, py, r, 0, Math.PI * 2);
        g.stroke();
        g.setLineDash([]);
      }
    }

    g.strokeStyle = "#ffffff";
    g.beginPath();
    g.moveTo(px - 6, py);
    g.lineTo(px + 6, py);
    g.moveTo(px, py - 6);
    g.lineTo(px, py + 6);
    g.stroke();

    if (lastSent) {
      const [a, b] = planeAxes(msg.plane);
      const fx = lastSent.force_n[a] ?? 0;
      const fy = lastSent.force_n[b] ?? 0;
      const pxPerN = 9;
      const ex = px + fx * pxPerN;
      const ey = py - fy * pxPerN;
      if (fx !== 0 || fy !== 0) {
        g.strokeStyle = "#ff9c42";
        g.lineWidth = 2;
        g.beginPath();
        g.moveTo(px, py);
        g.lineTo(ex, ey);
        g.stroke();
        g.lineWidth = 1;
        g.fillStyle = "#ff9c42";
        g.beginPath();
        g.arc(ex, ey, 3, 0, Math.PI * 2);
        g.fill();
      }
    }
  }
}
