// Host feed: WebSocket with automatic reconnect and exponential backoff.
import { parseMessage } from "./types.js";
export class HostFeed {
    constructor(url, hooks) {
        this.url = url;
        this.hooks = hooks;
        this.socket = null;
        this.backoffMs = 500;
        this.closed = false;
    }
    connect() {
        this.hooks.onStatus("connecting");
        const socket = new WebSocket(this.url);
        this.socket = socket;
        socket.onopen = () => {
            this.backoffMs = 500;
            this.hooks.onStatus("open");
        };
        socket.onmessage = (event) => {
            const msg = parseMessage(String(event.data));
            if (msg)
                this.hooks.onMessage(msg);
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
    send(msg) {
        if (!this.socket || this.socket.readyState !== WebSocket.OPEN)
            return false;
        this.socket.send(JSON.stringify(msg));
        return true;
    }
    stop() {
        this.closed = true;
        this.socket?.close();
    }
}
