// Browser wiring: scenario picker, click-to-annotate canvas, steering
// buttons and the live stream view.

import { clicksNeeded, CLICK_LAYOUT, draftPayload, draftPreview, validateDraft } from "./annotation.js";
import { SessionClient, ServiceError } from "./client.js";
import type { Command, ConstraintKind } from "./protocol.js";
import { drawClicks, drawOverlay, drawSparkline } from "./render.js";
import { UpdateStream } from "./stream.js";
import { LiveView } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

export function startApp(): void {
  const client = new SessionClient("");
  const view = new LiveView();

  const scenarioSelect = el<HTMLSelectElement>("scenario");
  const kindSelect = el<HTMLSelectElement>("kind");
  const usePlan = el<HTMLInputElement>("use-plan");
  const canvas = el<HTMLCanvasElement>("frame");
  const sparkCanvas = el<HTMLCanvasElement>("sparkline");
  const statusLabel = el<HTMLSpanElement>("status");
  const errorLabel = el<HTMLSpanElement>("error-norm");
  const notice = el<HTMLDivElement>("notice");
  const frameImage = new Image();

  const ctx = canvas.getContext("2d")!;
  const sparkCtx = sparkCanvas.getContext("2d")!;

  let sessionId: string | null = null;
  let stream: UpdateStream | null = null;
  let clicks: Array<[number, number]> = [];

  function say(message: string): void {
    notice.textContent = message;
  }

  function redraw(): void {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (frameImage.complete && frameImage.naturalWidth > 0) {
      ctx.drawImage(frameImage, 0, 0);
    }
    if (view.frame) {
      drawOverlay(ctx, view.frame.overlay.constraints);
    }
    const kind = kindSelect.value as ConstraintKind;
    drawClicks(ctx, clicks, CLICK_LAYOUT[kind].fixed);
    drawSparkline(sparkCtx, view.sparkline);
    statusLabel.textContent = `${view.sessionState} / ${view.status} (step ${view.step})`;
    errorLabel.textContent = view.errorNorm === null ? "-" : view.errorNorm.toFixed(3);
  }

  async function refreshFrame(): Promise<void> {
    if (!sessionId) {
      return;
    }
    const frame = await client.fetchFrame(sessionId);
    view.applyFrame(frame);
    frameImage.onload = redraw;
    frameImage.src = client.framePngUrl(sessionId, view.step);
  }

  async function createSession(): Promise<void> {
    stream?.close();
    view.reset();
    clicks = [];
    const created = await client.createSession({
      scenario: scenarioSelect.value,
      use_plan: usePlan.checked,
    });
    sessionId = created.session_id;
    view.sessionState = created.state;
    say(`session ${sessionId} created (${created.state})`);
    stream = new UpdateStream(
      (fromStep) => client.streamUrl(sessionId!, fromStep),
      {
        onUpdate: (update) => {
          view.applyUpdate(update);
          void refreshFrame();
        },
        onTerminal: (message) => {
          view.applyTerminal(message);
          redraw();
          say(`finished: ${message.status}`);
        },
      },
    );
    stream.connect();
    await refreshFrame();
    redraw();
  }

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
    const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
    const kind = kindSelect.value as ConstraintKind;
    if (clicks.length >= clicksNeeded(kind)) {
      clicks = [];
    }
    clicks.push([x, y]);
    const remaining = clicksNeeded(kind) - clicks.length;
    say(remaining > 0 ? `${remaining} click(s) to go` : "ready to submit");
    redraw();
  });

  el<HTMLButtonElement>("create").addEventListener("click", () => {
    createSession().catch((err) => say(String(err)));
  });

  el<HTMLButtonElement>("submit").addEventListener("click", async () => {
    if (!sessionId) {
      say("create a session first");
      return;
    }
    const draft = { kind: kindSelect.value as ConstraintKind, clicks };
    const check = validateDraft(draft);
    if (!check.ok) {
      say(check.message);
      return;
    }
    try {
      const preview = draftPreview(draft);
      const ack = await client.submitAnnotation(sessionId, draftPayload(draft));
      const drift = Math.max(
        ...ack.error.map((value, i) => Math.abs(value - preview[i])),
      );
      say(`constraint ${ack.index} accepted (preview drift ${drift.toExponential(1)})`);
      clicks = [];
      await refreshFrame();
      redraw();
    } catch (err) {
      say(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err));
    }
  });

  for (const command of ["start", "pause", "step_once", "reset", "abort"] as Command[]) {
    el<HTMLButtonElement>(`cmd-${command}`).addEventListener("click", async () => {
      if (!sessionId) {
        say("create a session first");
        return;
      }
      try {
        const result = await client.sendCommand(sessionId, command);
        view.sessionState = result.state;
        if (command === "reset") {
          view.reset();
          view.sessionState = result.state;
          stream?.close();
          stream = null;
        }
        await refreshFrame();
        redraw();
      } catch (err) {
        // Illegal commands are a non-blocking notice, not a failure.
        say(err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err));
      }
    });
  }

  client
    .listScenarios()
    .then(({ scenarios }) => {
      scenarioSelect.innerHTML = "";
      for (const name of scenarios) {
        const option = document.createElement("option");
        option.value = name;
        option.textContent = name;
        scenarioSelect.appendChild(option);
      }
    })
    .catch((err) => say(`cannot reach service: ${err}`));
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", startApp);
}
