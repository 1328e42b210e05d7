/** Websocket wrapper with automatic reconnection and binary dispatch. */

export interface SocketHandlers {
  onBinary: (data: ArrayBuffer) => void;
  onText: (text: string) => void;
  onStatus: (connected: boolean) => void;
}

const INITIAL_RECONNECT_DELAY = 500;
const MAX_RECONNECT_DELAY = 15000;

export class PoseSocket {
  private ws: WebSocket | null = null;
  private url: string;
  private handlers: SocketHandlers;
  private shouldReconnect = false;
  private reconnectDelay = INITIAL_RECONNECT_DELAY;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(url: string, handlers: SocketHandlers) {
    this.url = url;
    this.handlers = handlers;
  }

  connect(): void {
    this.shouldReconnect = true;
    this.open();
  }

  private open(): void {
    if (this.ws) return;
    this.ws = new WebSocket(this.url);
    this.ws.binaryType = "arraybuffer";

    this.ws.onopen = () => {
      this.reconnectDelay = INITIAL_RECONNECT_DELAY;
      this.handlers.onStatus(true);
    };
    this.ws.onmessage = (event: MessageEvent) => {
      if (event.data instanceof ArrayBuffer) {
        this.handlers.onBinary(event.data);
      } else if (typeof event.data === "string") {
        this.handlers.onText(event.data);
      }
    };
    this.ws.onerror = (event: Event) => {
      console.error("pose socket error:", event);
    };
    this.ws.onclose = () => {
      this.ws = null;
      this.handlers.onStatus(false);
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (!this.shouldReconnect || this.reconnectTimer !== null) return;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.open();
    }, this.reconnectDelay);
    this.reconnectDelay = Math.min(this.reconnectDelay * 2, MAX_RECONNECT_DELAY);
  }

  send(text: string): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(text);
      return true;
    }
    return false;
  }

  disconnect(): void {
    this.shouldReconnect = false;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.ws?.close();
    this.ws = null;
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }
}
