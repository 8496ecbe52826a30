// Host feed: WebSocket with automatic reconnect and exponential backoff.

import { parseMessage, WireMessage } from "./types.js";

export type FeedStatus = "connecting" | "open" | "closed";

export interface FeedHooks {
  onMessage(msg: WireMessage): void;
  onStatus(status: FeedStatus): void;
}

export class HostFeed {
  private socket: WebSocket | null = null;
  private backoffMs = 500;
  private closed = false;

  constructor(private url: string, private hooks: FeedHooks) {}

  connect(): void {
    this.hooks.onStatus("connecting");
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = 500;
      this.hooks.onStatus("open");
    };
    socket.onmessage = (event: MessageEvent) => {
      const msg = parseMessage(String(event.data));
      if (msg) this.hooks.onMessage(msg);
    };
    socket.onclose = () => {
      this.hooks.onStatus("closed");
      if (!this.closed) {
        setTimeout(() => this.connect(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, 8000);
      }
    };
    socket.onerror = () => {
      socket.close();
    };
  }

  send(msg: WireMessage): boolean {
    if (!this.socket || this.socket.readyState !== WebSocket.OPEN) return false;
    this.socket.send(JSON.stringify(msg));
    return true;
  }

  stop(): void {
    this.closed = true;
    this.socket?.close();
  }
}
