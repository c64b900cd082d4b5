// Live view model: the single place session state lands before rendering.
// The displayed step never runs ahead of the last StateUpdate received.

import type { FrameInfo, StateUpdate, TerminalMessage, SessionState } from "./protocol.js";

export interface SparklinePoint {
  step: number;
  errorNorm: number;
}

export class LiveView {
  step = -1;
  q: number[] = [];
  error: number[] = [];
  errorNorm: number | null = null;
  status = "idle";
  sessionState: SessionState = "idle";
  terminal: TerminalMessage | null = null;
  frame: FrameInfo | null = null;
  readonly sparkline: SparklinePoint[] = [];

  constructor(private readonly sparklineCapacity = 400) {}

  applyUpdate(update: StateUpdate): boolean {
    if (update.step <= this.step) {
      return false; // stale or duplicated; never move backwards
    }
    this.step = update.step;
    this.q = update.q;
    this.error = update.error;
    this.errorNorm = update.error_norm;
    this.status = update.status;
    this.sparkline.push({ step: update.step, errorNorm: update.error_norm });
    if (this.sparkline.length > this.sparklineCapacity) {
      this.sparkline.splice(0, this.sparkline.length - this.sparklineCapacity);
    }
    return true;
  }

  applyTerminal(message: TerminalMessage): void {
    this.terminal = message;
    this.status = message.status;
    this.sessionState = message.state;
  }

  applyFrame(frame: FrameInfo): void {
    this.frame = frame;
    this.sessionState = frame.state;
  }

  reset(): void {
    this.step = -1;
    this.q = [];
    this.error = [];
    this.errorNorm = null;
    this.status = "idle";
    this.terminal = null;
    this.frame = null;
    this.sparkline.length = 0;
  }
}
