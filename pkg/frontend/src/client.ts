// Thin REST client over fetch; surfaces the service's structured errors.

import type {
  AnnotationResponse,
  Command,
  CreateSessionRequest,
  CreateSessionResponse,
  FrameInfo,
  ServiceErrorBody,
  SessionState,
} from "./protocol.js";

export class ServiceError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly httpStatus: number,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!resp.ok) {
    let code = "HttpError";
    let message = `${resp.status} ${resp.statusText}`;
    try {
      const body = (await resp.json()) as ServiceErrorBody;
      if (body?.error) {
        code = body.error.code;
        message = body.error.message;
      }
    } catch {
      // non-JSON error body; keep the HTTP text
    }
    throw new ServiceError(code, message, resp.status);
  }
  return (await resp.json()) as T;
}

export class SessionClient {
  constructor(readonly baseUrl: string = "") {}

  listScenarios(): Promise<{ scenarios: string[] }> {
    return request(`${this.baseUrl}/scenarios`);
  }

  createSession(req: CreateSessionRequest): Promise<CreateSessionResponse> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify(req),
    });
  }

  fetchFrame(sessionId: string): Promise<FrameInfo> {
    return request(`${this.baseUrl}/sessions/${sessionId}/frame`);
  }

  framePngUrl(sessionId: string, cacheKey: number): string {
    return `${this.baseUrl}/sessions/${sessionId}/frame.png?t=${cacheKey}`;
  }

  submitAnnotation(
    sessionId: string,
    payload: { kind: string; points: number[][] },
  ): Promise<AnnotationResponse> {
    return request(`${this.baseUrl}/sessions/${sessionId}/annotations`, {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }

  sendCommand(sessionId: string, command: Command): Promise<{ state: SessionState }> {
    return request(`${this.baseUrl}/sessions/${sessionId}/commands`, {
      method: "POST",
      body: JSON.stringify({ command }),
    });
  }

  streamUrl(sessionId: string, fromStep: number): string {
    const base = this.baseUrl || (typeof location !== "undefined" ? location.origin : "");
    return `${base.replace(/^http/, "ws")}/sessions/${sessionId}/stream?from_step=${fromStep}`;
  }
}
