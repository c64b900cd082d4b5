"""Interactive session service driving simulated servoing episodes.

REST endpoints create sessions, fetch frames with vector overlays, accept
point/line annotations (the manual constraint path), and steer the servo
loop; a WebSocket pushes one StateUpdate per control step and supports
resuming from any step index after a reconnect.

Lifecycle per session: idle -> planned -> running -> paused/terminal.
Commands outside the lifecycle are rejected, never queued. Within a
session the control loop is the sole state mutator; each session runs
its loop on its own worker thread.
"""

from __future__ import annotations

import asyncio
import io
import itertools
import json
import threading
import time
from dataclasses import asdict

import numpy as np
from fastapi import FastAPI, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel, Field

from .controller import (
    ConstraintBinder,
    ControllerConfig,
    FeatureLost,
    ProbeFailed,
    ServoRun,
)
from .geometry import ConstraintKind, HomoPoint
from .saliency import AnnotatedFeatures, ConstraintSpec
from .simulator import SimSession, bundled_scenario_names, load_bundled_scenario

PROTOCOL_VERSION = 1

# Clicks per kind: leading points stay fixed in the image (gripper side),
# trailing points are anchored to the world and tracked (target side).
CLICK_LAYOUT = {
    "p2p": (1, 1),
    "p2l": (1, 2),
    "l2l": (2, 2),
    "par": (2, 2),
}

TERMINAL_STATES = ("done", "failed", "aborted")


class ServiceError(Exception):
    def __init__(self, code: str, message: str, http_status: int):
        self.code = code
        self.message = message
        self.http_status = http_status
        super().__init__(message)


def unknown_scenario(name):
    return ServiceError("UnknownScenario", f"no scenario named {name!r}", 404)


def unknown_session(sid):
    return ServiceError("UnknownSession", f"no session {sid!r}", 404)


def illegal_command(message):
    return ServiceError("IllegalCommand", message, 409)


class CreateSessionRequest(BaseModel):
    scenario: str
    seed: int = 0
    use_plan: bool = True
    config: dict = Field(default_factory=dict)


class AnnotationRequest(BaseModel):
    kind: str
    points: list[tuple[float, float]]


class CommandRequest(BaseModel):
    command: str


class LiveSession:
    """One interactive episode: simulator, constraints, servo worker."""

    def __init__(self, session_id: str, scenario_name: str, seed: int,
                 cfg: ControllerConfig, use_plan: bool, step_delay: float):
        self.id = session_id
        self.scenario_name = scenario_name
        self.seed = seed
        self.cfg = cfg
        self.step_delay = step_delay
        self.use_plan = use_plan
        self.lock = threading.RLock()
        self.messages: list[dict] = []
        self._worker: threading.Thread | None = None
        self._pause = threading.Event()
        self._abort = threading.Event()
        self._reset_world()

    def _reset_world(self):
        scenario = load_bundled_scenario(self.scenario_name)
        self.sim = SimSession(scenario, seed=self.seed)
        self.specs: list[ConstraintSpec] = []
        if self.use_plan and scenario.stages:
            self.specs = scenario.stages[0].constraint_specs(scenario.camera)
        self.binder = ConstraintBinder(self.specs) if self.specs else None
        self.run: ServoRun | None = None
        self.state = "planned" if self.specs else "idle"
        self.messages = []
        self._pause.clear()
        self._abort.clear()

    # -- constraint sources ---------------------------------------------------

    def submit_annotation(self, kind_code: str, points) -> tuple[int, list[float]]:
        if kind_code not in CLICK_LAYOUT:
            raise ServiceError("BadAnnotation", f"unknown constraint kind {kind_code!r}", 422)
        n_fixed, n_anchored = CLICK_LAYOUT[kind_code]
        if len(points) != n_fixed + n_anchored:
            raise ServiceError(
                "BadAnnotation",
                f"{kind_code} needs {n_fixed + n_anchored} clicks, got {len(points)}",
                422,
            )
        with self.lock:
            if self.state not in ("idle", "planned"):
                raise illegal_command(f"cannot annotate while {self.state}")
            fixed = tuple(HomoPoint(float(u), float(v), 1.0) for u, v in points[:n_fixed])
            anchors = tuple(
                self.sim.add_anchor(float(u), float(v)) for u, v in points[n_fixed:]
            )
            spec = ConstraintSpec(
                kind=ConstraintKind(kind_code),
                annotation=AnnotatedFeatures(fixed_points=fixed, anchor_ids=anchors),
            )
            self.specs = [*self.specs, spec]
            self.binder = ConstraintBinder(self.specs)
            errors, _ = ConstraintBinder([spec]).errors(self.sim.observe())
            self.state = "planned"
            return len(self.specs) - 1, [float(e) for e in errors]

    # -- lifecycle -------------------------------------------------------------

    def command(self, name: str) -> str:
        with self.lock:
            if name == "start":
                return self._start()
            if name == "pause":
                return self._pause_cmd()
            if name == "step_once":
                return self._step_once()
            if name == "reset":
                return self._reset_cmd()
            if name == "abort":
                return self._abort_cmd()
            raise ServiceError("BadCommand", f"unknown command {name!r}", 422)

    def _require_constraints(self):
        if not self.specs:
            raise illegal_command("no constraints defined yet")

    def _ensure_run(self):
        if self.run is None:
            self._require_constraints()
            self.run = ServoRun(self.sim, self.binder.errors, self.cfg)
            self.run.initialize()
            self._push_record(self.run.records[0])

    def _start(self) -> str:
        if self.state not in ("planned", "paused"):
            raise illegal_command(f"cannot start while {self.state}")
        self._require_constraints()
        self.state = "running"
        self._pause.clear()
        if self._worker is None or not self._worker.is_alive():
            self._abort.clear()
            self._worker = threading.Thread(target=self._worker_loop, daemon=True)
            self._worker.start()
        return self.state

    def _pause_cmd(self) -> str:
        if self.state != "running":
            raise illegal_command(f"cannot pause while {self.state}")
        self._pause.set()
        self.state = "paused"
        return self.state

    def _step_once(self) -> str:
        if self.state not in ("planned", "paused"):
            raise illegal_command(f"cannot step while {self.state}")
        try:
            self._ensure_run()
            record = self.run.step_once()
        except (FeatureLost, ProbeFailed):
            self._finish("failed", "feature_lost")
            return self.state
        if record is not None:
            self._push_record(record)
        if self.run.status is not None:
            self._finish_from_status()
        elif self.state == "planned":
            self.state = "paused"
        return self.state

    def _reset_cmd(self) -> str:
        if self.state == "running":
            raise illegal_command("pause or abort before reset")
        self._reset_world()
        return self.state

    def _abort_cmd(self) -> str:
        if self.state in TERMINAL_STATES:
            raise illegal_command(f"session already {self.state}")
        self._abort.set()
        self._pause.clear()
        self._finish("aborted", "aborted")
        return self.state

    # -- servo worker ----------------------------------------------------------

    def _worker_loop(self):
        try:
            with self.lock:
                if self._abort.is_set():
                    return
                self._ensure_run()
            while True:
                if self._abort.is_set():
                    return
                if self._pause.is_set():
                    time.sleep(0.005)
                    continue
                with self.lock:
                    if self._abort.is_set() or self._pause.is_set():
                        continue
                    record = self.run.step_once()
                    if record is not None:
                        self._push_record(record)
                    if self.run.status is not None:
                        self._finish_from_status()
                        return
                if self.step_delay:
                    time.sleep(self.step_delay)
        except (FeatureLost, ProbeFailed):
            with self.lock:
                self._finish("failed", "feature_lost")

    def _finish_from_status(self):
        status = self.run.status.value
        self._finish("done" if status == "converged" else "failed", status)

    def _finish(self, state: str, status: str):
        if self.state in TERMINAL_STATES:
            return
        self.state = state
        self.messages.append({"type": "terminal", "status": status, "state": state})

    def _push_record(self, record):
        self.messages.append({
            "type": "state_update",
            "step": record.step,
            "q": record.q,
            "error": record.error,
            "error_norm": record.error_norm,
            "status": self.run.status.value if self.run.status else "running",
        })

    # -- views -----------------------------------------------------------------

    def frame_info(self) -> dict:
        with self.lock:
            frame = self.sim.observe()
            overlay = {"constraints": [], "feature_lost": False}
            if self.binder is not None:
                try:
                    bound = self.binder.bind(frame)
                    for spec, features in zip(self.specs, bound):
                        entry = {"kind": spec.kind.value,
                                 "error": [float(x) for x in features.evaluate()]}
                        for name in ("f1", "f2"):
                            p = getattr(features, name)
                            if p is not None:
                                entry[name] = [p.x, p.y, p.w]
                        for name in ("f12", "f34"):
                            line = getattr(features, name)
                            if line is not None:
                                entry[name] = [line.a, line.b, line.c]
                        overlay["constraints"].append(entry)
                except FeatureLost:
                    overlay["feature_lost"] = True
            return {
                "step": frame.step,
                "q": [float(v) for v in frame.q],
                "state": self.state,
                "image": f"/sessions/{self.id}/frame.png",
                "masks": sorted(frame.masks),
                "overlay": overlay,
            }

    def frame_png(self) -> bytes:
        with self.lock:
            view = self.sim.compose_view()
        pixels = np.round(view.values * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="L").save(buf, format="PNG")
        return buf.getvalue()

    def status_info(self) -> dict:
        with self.lock:
            return {
                "session_id": self.id,
                "scenario": self.scenario_name,
                "seed": self.seed,
                "state": self.state,
                "constraints": len(self.specs),
                "steps": self.run.steps_taken if self.run else 0,
                "error_norm": self.run.error_norm if self.run and self.run.error is not None else None,
            }


PROTOCOL_DESCRIPTION = {
    "protocol_version": PROTOCOL_VERSION,
    "transport": {"rest": "http", "stream": "websocket"},
    "endpoints": {
        "list_scenarios": {"method": "GET", "path": "/scenarios"},
        "protocol": {"method": "GET", "path": "/protocol"},
        "create_session": {
            "method": "POST", "path": "/sessions",
            "body": {"scenario": "string", "seed": "int=0", "use_plan": "bool=true",
                     "config": "object (ControllerConfig overrides)"},
            "response": {"session_id": "string", "state": "string"},
        },
        "session_status": {"method": "GET", "path": "/sessions/{id}"},
        "fetch_frame": {
            "method": "GET", "path": "/sessions/{id}/frame",
            "response": {"step": "int", "q": "number[]", "state": "string",
                         "image": "url of lossless PNG", "masks": "string[]",
                         "overlay": {"constraints": [{
                             "kind": "p2p|p2l|l2l|par",
                             "error": "number[]",
                             "f1": "[x,y,w]?", "f2": "[x,y,w]?",
                             "f12": "[a,b,c]?", "f34": "[a,b,c]?"}],
                             "feature_lost": "bool"}},
        },
        "frame_image": {"method": "GET", "path": "/sessions/{id}/frame.png",
                        "response": "image/png (lossless)"},
        "submit_annotation": {
            "method": "POST", "path": "/sessions/{id}/annotations",
            "body": {"kind": "p2p|p2l|l2l|par",
                     "points": "[[u,v],...] leading points fixed (gripper side), "
                               "trailing points world-anchored (target side); "
                               "clicks per kind: p2p 1+1, p2l 1+2, l2l 2+2, par 2+2"},
            "response": {"index": "int", "error": "number[] (server-side error vector)"},
        },
        "command": {
            "method": "POST", "path": "/sessions/{id}/commands",
            "body": {"command": "start|pause|step_once|reset|abort"},
            "response": {"state": "string"},
        },
        "stream": {
            "method": "WS", "path": "/sessions/{id}/stream?from_step=N",
            "messages": [
                {"type": "state_update", "step": "int (strictly increasing, no gaps)",
                 "q": "number[]", "error": "number[]", "error_norm": "number",
                 "status": "running|converged|diverged|iter_budget|feature_lost"},
                {"type": "terminal", "status": "string", "state": "done|failed|aborted"},
            ],
            "resume": "pass from_step = last received step + 1 to resume without gaps",
        },
    },
    "errors": {
        "shape": {"error": {"code": "string", "message": "string"}},
        "codes": ["UnknownScenario", "UnknownSession", "IllegalCommand",
                  "BadAnnotation", "BadCommand"],
    },
    "state_machine": {
        "states": ["idle", "planned", "running", "paused", "done", "failed", "aborted"],
        "transitions": {
            "annotate": "idle|planned -> planned",
            "start": "planned -> running; paused -> running",
            "pause": "running -> paused",
            "step_once": "planned|paused -> paused or terminal",
            "reset": "any non-running -> planned|idle",
            "abort": "any non-terminal -> aborted",
        },
    },
}


def create_app(step_delay: float = 0.0, cfg: ControllerConfig | None = None) -> FastAPI:
    """Build the service; ``step_delay`` throttles the streaming loop."""
    app = FastAPI(title="salientservo session service")
    sessions: dict[str, LiveSession] = {}
    counter = itertools.count(1)
    base_cfg = cfg or ControllerConfig()

    def get_session(sid: str) -> LiveSession:
        if sid not in sessions:
            raise unknown_session(sid)
        return sessions[sid]

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.get("/scenarios")
    async def list_scenarios():
        return {"scenarios": bundled_scenario_names()}

    @app.get("/protocol")
    async def protocol():
        return PROTOCOL_DESCRIPTION

    @app.post("/sessions")
    async def create_session(req: CreateSessionRequest):
        if req.scenario not in bundled_scenario_names():
            raise unknown_scenario(req.scenario)
        try:
            session_cfg = ControllerConfig(**{**asdict(base_cfg), **req.config})
        except (TypeError, ValueError) as exc:
            raise ServiceError("BadConfig", str(exc), 422) from exc
        sid = f"s{next(counter)}"
        sessions[sid] = LiveSession(
            session_id=sid, scenario_name=req.scenario, seed=req.seed,
            cfg=session_cfg, use_plan=req.use_plan, step_delay=step_delay,
        )
        return {"session_id": sid, "state": sessions[sid].state}

    @app.get("/sessions/{sid}")
    async def session_status(sid: str):
        return get_session(sid).status_info()

    @app.get("/sessions/{sid}/frame")
    async def fetch_frame(sid: str):
        return get_session(sid).frame_info()

    @app.get("/sessions/{sid}/frame.png")
    async def frame_png(sid: str):
        return Response(content=get_session(sid).frame_png(), media_type="image/png")

    @app.post("/sessions/{sid}/annotations")
    async def submit_annotation(sid: str, req: AnnotationRequest):
        index, errors = get_session(sid).submit_annotation(req.kind, req.points)
        return {"index": index, "error": errors}

    @app.post("/sessions/{sid}/commands")
    async def command(sid: str, req: CommandRequest):
        state = get_session(sid).command(req.command)
        return {"state": state}

    @app.websocket("/sessions/{sid}/stream")
    async def stream(ws: WebSocket, sid: str, from_step: int = Query(default=0)):
        await ws.accept()
        if sid not in sessions:
            await ws.send_text(json.dumps(
                {"error": {"code": "UnknownSession", "message": sid}}
            ))
            await ws.close(code=4404)
            return
        live = sessions[sid]
        pos = 0
        try:
            while True:
                messages = live.messages  # append-only; replaced wholesale on reset
                if pos > len(messages):
                    pos = 0
                while pos < len(messages):
                    msg = messages[pos]
                    pos += 1
                    if msg["type"] == "state_update" and msg["step"] < from_step:
                        continue
                    await ws.send_text(json.dumps(msg))
                if live.state in TERMINAL_STATES and pos >= len(messages):
                    await ws.close()
                    return
                await asyncio.sleep(0.005)
        except WebSocketDisconnect:
            return

    return app
