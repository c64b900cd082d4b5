"""Task execution: run a scenario's stages under the attempt protocol.

A task gets up to three attempts, stopping at the first success. Within
an attempt the stages run in order; every stage must both converge and
satisfy its world-frame predicate. The Jacobian is re-estimated for every
stage of every attempt.
"""

from __future__ import annotations

import dataclasses
from dataclasses import asdict

from .controller import AttemptStatus, ControllerConfig, run_attempt, score_task
from .saliency import EmptyMask, PairingMode, pca_extract, propose_constraint_kinds, threshold_mask
from .simulator import SimSession, evaluate_stage_success
from .simulator.scenario import Scenario
from .trace import AttemptTrace, EpisodeTrace, StageTrace, attempt_session_seed


def _stage_kinds(session, stage, kind_overrides, propose, tau):
    """Constraint kinds for a stage: plan, file override, or rule proposer."""
    if kind_overrides and stage.name in kind_overrides:
        return tuple(kind_overrides[stage.name])
    if propose and stage.mode is PairingMode.OBJECT_GRIPPER:
        frame = session.observe()
        mask = frame.masks.get(stage.prompts[0])
        if mask is not None:
            try:
                feats = pca_extract(threshold_mask(mask, tau))
            except EmptyMask:
                return stage.kinds
            return propose_constraint_kinds(feats)
    return stage.kinds


def run_task_attempt(session: SimSession, cfg: ControllerConfig, tau: float = 0.5,
                     kind_overrides=None, propose: bool = False) -> AttemptTrace:
    """Run all stages on a fresh session; fails at the first bad stage."""
    scenario = session.scenario
    stages = []
    step_offset = 0
    success = True
    final_status = AttemptStatus.CONVERGED
    for stage in scenario.stages:
        kinds = _stage_kinds(session, stage, kind_overrides, propose, tau)
        if kinds != stage.kinds:
            stage = dataclasses.replace(stage, kinds=kinds)
        specs = stage.constraint_specs(scenario.camera)
        result = run_attempt(session, specs, cfg, tau=tau)
        predicate_ok = (
            result.status is AttemptStatus.CONVERGED
            and evaluate_stage_success(session, stage)
        )
        for record in result.records:
            record.step += step_offset
        if result.records:
            step_offset = result.records[-1].step + 1
        stages.append(StageTrace(
            name=stage.name,
            status=result.status.value,
            predicate_ok=predicate_ok,
            initial_error_norm=result.initial_error_norm,
            final_error_norm=result.final_error_norm,
            steps_taken=result.steps_taken,
            records=result.records,
        ))
        if not predicate_ok:
            success = False
            if result.status is AttemptStatus.CONVERGED:
                # Converged in the image but missed the world-frame goal.
                final_status = AttemptStatus.DIVERGED
            else:
                final_status = result.status
            break
        session.advance_stage()
    return AttemptTrace(index=0, success=success, status=final_status.value, stages=stages)


def run_task(scenario: Scenario, seed: int, cfg: ControllerConfig | None = None,
             tau: float = 0.5, kind_overrides=None, propose: bool = False) -> EpisodeTrace:
    """Execute a task with the attempt protocol and assemble its trace.

    Attempts stop at the first success, or once the score is decided:
    two failures already pin the rate at 0%. ``kind_overrides`` maps stage
    names to replacement constraint kinds (the file-sourced plan);
    ``propose`` lets the rule-based proposer pick kinds from the initial
    mask of each object-gripper stage.
    """
    cfg = cfg or ControllerConfig()
    trace = EpisodeTrace(scenario=scenario.name, seed=seed, config=asdict(cfg))
    statuses = []
    for attempt_index in range(1, cfg.max_attempts + 1):
        session = SimSession(scenario, seed=attempt_session_seed(seed, attempt_index))
        attempt = run_task_attempt(session, cfg, tau=tau,
                                   kind_overrides=kind_overrides, propose=propose)
        attempt.index = attempt_index
        trace.attempts.append(attempt)
        statuses.append(AttemptStatus(attempt.status))
        if attempt.success or len(statuses) >= 2:
            break
    trace.statuses = [s.value for s in statuses]
    trace.success_rate = score_task(statuses)
    return trace
