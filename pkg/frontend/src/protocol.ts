// Types mirroring the session service protocol (docs/service-protocol.json).

export type ConstraintKind = "p2p" | "p2l" | "l2l" | "par";

export type SessionState =
  | "idle"
  | "planned"
  | "running"
  | "paused"
  | "done"
  | "failed"
  | "aborted";

export type Command = "start" | "pause" | "step_once" | "reset" | "abort";

export interface CreateSessionRequest {
  scenario: string;
  seed?: number;
  use_plan?: boolean;
  config?: Record<string, number>;
}

export interface CreateSessionResponse {
  session_id: string;
  state: SessionState;
}

export interface OverlayConstraint {
  kind: ConstraintKind;
  error: number[];
  f1?: [number, number, number];
  f2?: [number, number, number];
  f12?: [number, number, number];
  f34?: [number, number, number];
}

export interface FrameInfo {
  step: number;
  q: number[];
  state: SessionState;
  image: string;
  masks: string[];
  overlay: {
    constraints: OverlayConstraint[];
    feature_lost: boolean;
  };
}

export interface AnnotationResponse {
  index: number;
  error: number[];
}

export interface StateUpdate {
  type: "state_update";
  step: number;
  q: number[];
  error: number[];
  error_norm: number;
  status: string;
}

export interface TerminalMessage {
  type: "terminal";
  status: string;
  state: SessionState;
}

export type StreamMessage = StateUpdate | TerminalMessage;

export interface ServiceErrorBody {
  error: { code: string; message: string };
}
