/** WebSocket session client with reconnect backoff.
 *
 * The socket construction is injected so tests can supply a fake or a
 * node-side implementation; the client only needs the handler properties
 * and send/close.
 */

import { parseServerMessage, type ServerMsg } from "./protocol.js";
import type { Connection } from "./model.js";

export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface ClientCallbacks {
  onMessage(msg: ServerMsg): void;
  onStatus(status: Connection): void;
  onParseError?(err: Error): void;
}

export interface ClientOptions {
  /** First reconnect delay; doubles per attempt up to maxBackoffMs. */
  backoffMs?: number;
  maxBackoffMs?: number;
  reconnect?: boolean;
}

export class SessionClient {
  private ws: WsLike | null = null;
  private open = false;
  private stopped = false;
  private attempt = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private readonly backoffMs: number;
  private readonly maxBackoffMs: number;
  private readonly reconnect: boolean;

  constructor(
    private url: string,
    private callbacks: ClientCallbacks,
    private factory: WsFactory,
    opts: ClientOptions = {},
  ) {
    this.backoffMs = opts.backoffMs ?? 500;
    this.maxBackoffMs = opts.maxBackoffMs ?? 5000;
    this.reconnect = opts.reconnect ?? true;
  }

  connect(): void {
    if (this.stopped) return;
    this.callbacks.onStatus("connecting");
    let ws: WsLike;
    try {
      ws = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.open = true;
      this.attempt = 0;
      this.callbacks.onStatus("live");
    };
    ws.onmessage = (ev) => {
      const raw =
        typeof ev.data === "string" ? ev.data : String(ev.data ?? "");
      try {
        this.callbacks.onMessage(parseServerMessage(raw));
      } catch (err) {
        this.callbacks.onParseError?.(err as Error);
      }
    };
    ws.onerror = () => {
      // close always follows; nothing to do here
    };
    ws.onclose = () => {
      this.open = false;
      this.ws = null;
      this.callbacks.onStatus("closed");
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || !this.reconnect) return;
    const delay = Math.min(
      this.backoffMs * 2 ** this.attempt,
      this.maxBackoffMs,
    );
    this.attempt += 1;
    this.timer = setTimeout(() => this.connect(), delay);
  }

  /** Send a preencoded frame. Returns false when not connected. */
  send(text: string): boolean {
    if (!this.open || !this.ws) return false;
    try {
      this.ws.send(text);
    } catch {
      return false;
    }
    return true;
  }

  isOpen(): boolean {
    return this.open;
  }

  /** Close for good; no reconnect after this. */
  close(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.ws?.close();
    this.ws = null;
    this.open = false;
  }
}
