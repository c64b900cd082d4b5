"""Episode traces: per-step records, JSONL streaming, summaries, replay.

A trace is one task execution: up to three attempts, each running the
scenario's stages in order. Step records stream as one JSON object per
line; the summary is a separate document. Replay re-runs the geometry
over the recorded configurations and must reproduce the recorded errors
bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .controller import ConstraintBinder, StepRecord
from .simulator import SimSession

FORMAT_VERSION = 1


@dataclass
class StageTrace:
    name: str
    status: str
    predicate_ok: bool
    initial_error_norm: float
    final_error_norm: float
    steps_taken: int
    records: list[StepRecord] = field(default_factory=list)


@dataclass
class AttemptTrace:
    index: int  # 1-based
    success: bool
    status: str
    stages: list[StageTrace] = field(default_factory=list)


@dataclass
class EpisodeTrace:
    scenario: str
    seed: int
    config: dict
    attempts: list[AttemptTrace] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    success_rate: float = 0.0
    format_version: int = FORMAT_VERSION


def _clean(value):
    """JSON-safe floats: non-finite becomes null."""
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def summary_dict(trace: EpisodeTrace) -> dict:
    """Summary document: everything except the per-step records."""
    return {
        "format_version": trace.format_version,
        "scenario": trace.scenario,
        "seed": trace.seed,
        "config": trace.config,
        "statuses": trace.statuses,
        "success_rate": trace.success_rate,
        "attempts": [
            {
                "attempt": a.index,
                "success": a.success,
                "status": a.status,
                "stages": [
                    {
                        "name": s.name,
                        "status": s.status,
                        "predicate_ok": s.predicate_ok,
                        "initial_error_norm": _clean(s.initial_error_norm),
                        "final_error_norm": _clean(s.final_error_norm),
                        "steps_taken": s.steps_taken,
                    }
                    for s in a.stages
                ],
            }
            for a in trace.attempts
        ],
    }


def write_summary(trace: EpisodeTrace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary_dict(trace), indent=2) + "\n")


def trace_lines(trace: EpisodeTrace):
    """Yield the JSONL stream: header, step records, terminal markers."""
    yield {
        "type": "header",
        "format_version": trace.format_version,
        "scenario": trace.scenario,
        "seed": trace.seed,
        "config": trace.config,
    }
    for attempt in trace.attempts:
        for stage in attempt.stages:
            for record in stage.records:
                yield {
                    "type": "step",
                    "attempt": attempt.index,
                    "stage": stage.name,
                    **record.to_dict(),
                }
            yield {
                "type": "stage_end",
                "attempt": attempt.index,
                "stage": stage.name,
                "status": stage.status,
                "predicate_ok": stage.predicate_ok,
                "steps_taken": stage.steps_taken,
            }
        yield {
            "type": "attempt_end",
            "attempt": attempt.index,
            "status": attempt.status,
            "success": attempt.success,
        }
    yield {
        "type": "summary",
        "statuses": trace.statuses,
        "success_rate": trace.success_rate,
    }


def write_jsonl(trace: EpisodeTrace, path: str | Path) -> None:
    with open(path, "w") as fp:
        for line in trace_lines(trace):
            fp.write(json.dumps(line) + "\n")


def read_jsonl(path: str | Path) -> EpisodeTrace:
    """Reconstruct a trace from its JSONL stream."""
    trace = None
    attempts: dict[int, AttemptTrace] = {}
    stages: dict[tuple[int, str], StageTrace] = {}
    with open(path) as fp:
        for raw in fp:
            line = json.loads(raw)
            kind = line.pop("type")
            if kind == "header":
                trace = EpisodeTrace(
                    scenario=line["scenario"], seed=line["seed"],
                    config=line["config"],
                    format_version=line["format_version"],
                )
            elif kind == "step":
                key = (line["attempt"], line["stage"])
                if key not in stages:
                    stages[key] = StageTrace(
                        name=line["stage"], status="", predicate_ok=False,
                        initial_error_norm=float("nan"),
                        final_error_norm=float("nan"), steps_taken=0,
                    )
                cond = line["jacobian_cond"]
                stages[key].records.append(StepRecord(
                    step=line["step"], q=line["q"], error=line["error"],
                    error_norm=line["error_norm"], features=line["features"],
                    jacobian_cond=float("inf") if cond is None else cond,
                ))
            elif kind == "stage_end":
                key = (line["attempt"], line["stage"])
                stage = stages.setdefault(key, StageTrace(
                    name=line["stage"], status="", predicate_ok=False,
                    initial_error_norm=float("nan"),
                    final_error_norm=float("nan"), steps_taken=0,
                ))
                stage.status = line["status"]
                stage.predicate_ok = line["predicate_ok"]
                stage.steps_taken = line["steps_taken"]
                if stage.records:
                    stage.initial_error_norm = stage.records[0].error_norm
                    stage.final_error_norm = stage.records[-1].error_norm
                attempt = attempts.setdefault(
                    line["attempt"], AttemptTrace(index=line["attempt"], success=False, status="")
                )
                attempt.stages.append(stage)
            elif kind == "attempt_end":
                attempt = attempts.setdefault(
                    line["attempt"], AttemptTrace(index=line["attempt"], success=False, status="")
                )
                attempt.status = line["status"]
                attempt.success = line["success"]
            elif kind == "summary":
                trace.statuses = line["statuses"]
                trace.success_rate = line["success_rate"]
    if trace is None:
        raise ValueError(f"no header line in {path}")
    trace.attempts = [attempts[i] for i in sorted(attempts)]
    return trace


def attempt_session_seed(seed: int, attempt_index: int) -> list[int]:
    """Seed material for one attempt's session; deterministic per attempt."""
    return [seed, attempt_index]


def replay(trace: EpisodeTrace, scenario, tau: float = 0.5) -> dict:
    """Re-run geometry over the recorded configurations and compare errors.

    Returns a report with the number of records checked and the maximum
    absolute error difference (0.0 means bit-identical).
    """
    checked = 0
    max_diff = 0.0
    for attempt in trace.attempts:
        session = SimSession(scenario, seed=attempt_session_seed(trace.seed, attempt.index))
        for stage_trace, stage_plan in zip(attempt.stages, scenario.stages):
            binder = ConstraintBinder(stage_plan.constraint_specs(scenario.camera), tau=tau)
            for record in stage_trace.records:
                session.set_q(np.asarray(record.q))
                errors, _ = binder.errors(session.observe())
                recorded = np.asarray(record.error)
                if errors.shape != recorded.shape:
                    raise ValueError(
                        f"replay shape mismatch at attempt {attempt.index} "
                        f"stage {stage_trace.name} step {record.step}"
                    )
                diff = float(np.max(np.abs(errors - recorded))) if errors.size else 0.0
                max_diff = max(max_diff, diff)
                checked += 1
            stage_ok = (stage_trace.status == "converged" and stage_trace.predicate_ok)
            if stage_ok and not session.finished:
                session.advance_stage()
            else:
                break
    return {"records_checked": checked, "max_abs_diff": max_diff,
            "identical": max_diff == 0.0}
