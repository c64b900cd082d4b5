// StateUpdate stream client: one WebSocket per session, with reconnect
// that resumes from the next unseen step so subscribers never observe a
// duplicated or missing step index.

import type { StateUpdate, StreamMessage, TerminalMessage } from "./protocol.js";

// Minimal socket surface so tests can inject scripted fakes.
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StreamOptions {
  socketFactory?: SocketFactory;
  reconnectDelayMs?: number;
  maxReconnects?: number;
}

export interface StreamHandlers {
  onUpdate?: (update: StateUpdate) => void;
  onTerminal?: (message: TerminalMessage) => void;
  onGap?: (expected: number, received: number) => void;
  onClose?: () => void;
}

export class UpdateStream {
  private lastStep = -1;
  private socket: SocketLike | null = null;
  private stopped = false;
  private reconnects = 0;
  private terminalSeen = false;

  constructor(
    private readonly urlFor: (fromStep: number) => string,
    private readonly handlers: StreamHandlers,
    private readonly options: StreamOptions = {},
  ) {}

  get lastReceivedStep(): number {
    return this.lastStep;
  }

  connect(): void {
    if (this.stopped) {
      return;
    }
    const factory: SocketFactory =
      this.options.socketFactory ?? ((url) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(this.urlFor(this.lastStep + 1));
    this.socket = socket;
    socket.onmessage = (ev) => this.handleMessage(ev.data);
    socket.onclose = () => this.handleClose();
    socket.onerror = () => {
      // onclose follows and handles the retry
    };
  }

  close(): void {
    this.stopped = true;
    this.socket?.close();
    this.socket = null;
  }

  private handleMessage(data: string): void {
    let message: StreamMessage;
    try {
      message = JSON.parse(data) as StreamMessage;
    } catch {
      return; // ignore non-JSON frames
    }
    if (message.type === "terminal") {
      this.terminalSeen = true;
      this.handlers.onTerminal?.(message);
      return;
    }
    if (message.type !== "state_update") {
      return;
    }
    if (message.step <= this.lastStep) {
      return; // duplicate after a reconnect race; drop silently
    }
    if (message.step !== this.lastStep + 1) {
      // A gap means the server and client disagree; resync by
      // reconnecting from the last acknowledged step.
      this.handlers.onGap?.(this.lastStep + 1, message.step);
      this.socket?.close();
      return;
    }
    this.lastStep = message.step;
    this.handlers.onUpdate?.(message);
  }

  private handleClose(): void {
    this.socket = null;
    if (this.stopped || this.terminalSeen) {
      this.handlers.onClose?.();
      return;
    }
    const max = this.options.maxReconnects ?? 20;
    if (this.reconnects >= max) {
      this.handlers.onClose?.();
      return;
    }
    this.reconnects += 1;
    const delay = this.options.reconnectDelayMs ?? 250;
    setTimeout(() => this.connect(), delay);
  }
}
