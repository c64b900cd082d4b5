"""Uncalibrated image-based visual servoing.

No camera or robot calibration is assumed: the visuomotor Jacobian that
maps robot motion to image-error motion is estimated by finite-difference
probing and then kept current with Broyden rank-one updates driven by
measured (dq, de) pairs. Control steps invert the estimate with damped
least squares so rectangular and transiently rank-deficient systems stay
solvable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

import numpy as np

from .geometry import ConstraintKind, HomoLine, HomoPoint, line_through_points, stack_errors
from .saliency import BoundFeatures, ConstraintSpec, EmptyMask, features_for_constraint

log = logging.getLogger(__name__)


class ProbeFailed(RuntimeError):
    """Error-evaluation callback failed during Jacobian probing."""


class SingularSystem(RuntimeError):
    """Damped normal equations unsolvable; signals NaN contamination."""


class FeatureLost(RuntimeError):
    """Constraint features cannot be extracted from the current frame."""


class AttemptStatus(Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    ITER_BUDGET = "iter_budget"
    FEATURE_LOST = "feature_lost"


@dataclass(frozen=True)
class ControllerConfig:
    """Servo loop tuning; defaults are engineering choices, all overridable."""

    gain: float = 0.1                 # error-to-motion scale per step
    damping: float = 1e-3             # least-squares regularizer
    max_step: float = 0.02            # per-DOF clamp, meters or radians
    fd_delta: float = 0.005           # finite-difference probe magnitude
    min_dq_norm: float = 1e-6         # Broyden update floor
    converge_eps: float = 2.0         # error-norm convergence threshold, pixels
    max_iters: int = 200
    max_attempts: int = 3
    diverge_factor: float = 4.0       # error growth ratio that counts as divergence
    diverge_patience: int = 10        # consecutive bad steps before giving up
    diverge_floor: float = 50.0       # reference floor so near-goal starts are not
                                      # flagged on benign transients (pixels)

    def __post_init__(self):
        if self.gain <= 0 or self.max_step <= 0 or self.fd_delta <= 0:
            raise ValueError("gain, max_step and fd_delta must be positive")
        if self.damping < 0 or self.min_dq_norm <= 0 or self.converge_eps <= 0:
            raise ValueError("damping must be >= 0; floors must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not 1 <= self.max_attempts <= 3:
            raise ValueError("between 1 and 3 attempts are allowed")


@dataclass
class StepRecord:
    """One control step of an episode trace."""

    step: int
    q: list[float]
    error: list[float]
    error_norm: float
    features: list[dict]
    jacobian_cond: float

    def to_dict(self) -> dict:
        cond = self.jacobian_cond
        return {
            "step": self.step,
            "q": self.q,
            "error": self.error,
            "error_norm": self.error_norm,
            "features": self.features,
            "jacobian_cond": cond if np.isfinite(cond) else None,
        }


@dataclass
class AttemptResult:
    status: AttemptStatus
    records: list[StepRecord]
    initial_error_norm: float
    final_error_norm: float
    steps_taken: int


class ServoSession(Protocol):
    """What the controller needs from a plant: reposition, step, observe."""

    @property
    def q(self) -> np.ndarray: ...

    def observe(self): ...

    def set_q(self, q: np.ndarray): ...

    def apply(self, dq: np.ndarray): ...


def estimate_jacobian(probe: Callable[[np.ndarray], np.ndarray],
                      q0: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """Estimate the visuomotor Jacobian by central-difference probing.

    Column j is (e(q0 + d*u_j) - e(q0 - d*u_j)) / (2d). The probe is called
    once more at q0 afterwards so a side-effecting plant ends up where it
    started.

    Raises:
        ProbeFailed: if the callback errors at any probe configuration.
    """
    q0 = np.asarray(q0, dtype=float)
    delta = cfg.fd_delta
    cols = []
    try:
        for j in range(q0.size):
            up = q0.copy()
            up[j] += delta
            down = q0.copy()
            down[j] -= delta
            cols.append((np.asarray(probe(up)) - np.asarray(probe(down))) / (2.0 * delta))
    except Exception as exc:
        raise ProbeFailed(f"probe failed near q0 (DOF {len(cols)}): {exc}") from exc
    finally:
        try:
            probe(q0)
        except Exception:
            log.warning("could not re-evaluate at q0 after probing")
    return np.column_stack(cols)


def broyden_update(jac: np.ndarray, dq: np.ndarray, de: np.ndarray,
                   cfg: ControllerConfig) -> np.ndarray:
    """Rank-one secant update: J' = J + (de - J dq) dq^T / (dq^T dq).

    The returned estimate maps dq to de exactly. Motions below the
    configured floor are skipped to avoid amplifying noise.
    """
    dq = np.asarray(dq, dtype=float)
    de = np.asarray(de, dtype=float)
    norm_sq = float(dq @ dq)
    if np.sqrt(norm_sq) < cfg.min_dq_norm:
        log.debug("skipping Broyden update: |dq| = %.3g below floor", np.sqrt(norm_sq))
        return jac
    residual = de - jac @ dq
    return jac + np.outer(residual, dq) / norm_sq


def control_step(jac: np.ndarray, error: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """Damped least-squares step: dq = -gain * (J^T J + mu I)^-1 J^T e.

    Each component is clamped to +/- max_step. For square invertible J and
    vanishing damping this reduces to -gain * J^-1 e.

    Raises:
        SingularSystem: if inputs or the solve produce non-finite values.
    """
    jac = np.asarray(jac, dtype=float)
    error = np.asarray(error, dtype=float)
    if not (np.all(np.isfinite(jac)) and np.all(np.isfinite(error))):
        raise SingularSystem("non-finite Jacobian or error vector")
    n = jac.shape[1]
    normal = jac.T @ jac + cfg.damping * np.eye(n)
    try:
        solution = np.linalg.solve(normal, jac.T @ error)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"damped normal equations unsolvable: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise SingularSystem("solve produced non-finite step")
    return np.clip(-cfg.gain * solution, -cfg.max_step, cfg.max_step)


def score_task(statuses: list[AttemptStatus]) -> float:
    """Attempt arithmetic: first-try success 100%, second-try 50%, else 0%.

    Attempts must stop at the first success and number at most three.
    """
    if not 1 <= len(statuses) <= 3:
        raise ValueError("between 1 and 3 attempt outcomes expected")
    for i, status in enumerate(statuses[:-1]):
        if status is AttemptStatus.CONVERGED:
            raise ValueError(f"attempts continued after success at attempt {i + 1}")
    if statuses[0] is AttemptStatus.CONVERGED:
        return 100.0
    if len(statuses) >= 2 and statuses[1] is AttemptStatus.CONVERGED:
        return 50.0
    return 0.0


def _feature_dict(bound: BoundFeatures) -> dict:
    out = {"kind": bound.kind.value}
    for name in ("f1", "f2"):
        p: HomoPoint | None = getattr(bound, name)
        if p is not None:
            out[name] = [p.x, p.y, p.w]
    for name in ("f12", "f34"):
        l: HomoLine | None = getattr(bound, name)
        if l is not None:
            out[name] = [l.a, l.b, l.c]
    return out


class ConstraintBinder:
    """Evaluates constraint specs on frames.

    Holds the per-episode cache of frozen carried-object features for
    object-object pairings: they are extracted on the first frame and
    reused afterwards, while target features refresh every call.
    """

    def __init__(self, specs: list[ConstraintSpec], tau: float = 0.5):
        if not specs:
            raise ValueError("need at least one constraint")
        self.specs = list(specs)
        self.tau = tau
        self._carried: dict[int, object] = {}

    @property
    def error_dim(self) -> int:
        return sum(s.kind.error_dim for s in self.specs)

    def bind(self, frame) -> list[BoundFeatures]:
        bound_all = []
        for idx, spec in enumerate(self.specs):
            if spec.policy is not None:
                try:
                    masks = [frame.masks[p] for p in spec.policy.prompts]
                except KeyError as exc:
                    raise FeatureLost(f"no mask for prompt {exc}") from exc
                try:
                    bound = features_for_constraint(
                        spec.kind, spec.policy, masks,
                        carried=self._carried.get(idx), tau=self.tau,
                    )
                except EmptyMask as exc:
                    raise FeatureLost(str(exc)) from exc
                if bound.carried is not None:
                    self._carried.setdefault(idx, bound.carried)
            else:
                bound = self._bind_annotation(spec, frame)
            bound_all.append(bound)
        return bound_all

    def errors(self, frame) -> tuple[np.ndarray, list[BoundFeatures]]:
        bound = self.bind(frame)
        return stack_errors([b.evaluate() for b in bound]), bound

    def _bind_annotation(self, spec: ConstraintSpec, frame) -> BoundFeatures:
        ann = spec.annotation
        try:
            anchors = [frame.anchors[a] for a in ann.anchor_ids]
        except KeyError as exc:
            raise FeatureLost(f"annotation anchor lost: {exc}") from exc
        kind = spec.kind
        if kind is ConstraintKind.POINT_TO_POINT:
            return BoundFeatures(kind, f1=ann.fixed_points[0], f2=anchors[0])
        if kind is ConstraintKind.POINT_TO_LINE:
            return BoundFeatures(kind, f1=ann.fixed_points[0],
                                 f34=line_through_points(anchors[0], anchors[1]))
        if kind is ConstraintKind.LINE_TO_LINE:
            return BoundFeatures(kind, f1=ann.fixed_points[0], f2=ann.fixed_points[1],
                                 f34=line_through_points(anchors[0], anchors[1]))
        return BoundFeatures(
            kind,
            f12=line_through_points(ann.fixed_points[0], ann.fixed_points[1]),
            f34=line_through_points(anchors[0], anchors[1]),
        )


class ServoRun:
    """One servoing attempt, advanced step by step.

    Separating initialization from stepping lets interactive callers pause
    between control steps; ``run_attempt`` just drives it to a terminal
    status.
    """

    def __init__(self, session: ServoSession, error_source, cfg: ControllerConfig):
        self.session = session
        self.error_source = error_source
        self.cfg = cfg
        self.status: AttemptStatus | None = None
        self.records: list[StepRecord] = []
        self.steps_taken = 0
        self.jac: np.ndarray | None = None
        self.error: np.ndarray | None = None
        self.initial_error_norm: float | None = None
        self._bad_steps = 0

    def initialize(self) -> None:
        """Observe, evaluate initial errors, estimate the Jacobian."""
        frame = self.session.observe()
        self.error, features = self.error_source(frame)
        self.initial_error_norm = float(np.linalg.norm(self.error))
        q0 = self.session.q

        def probe(q):
            probe_frame = self.session.set_q(q)
            errors, _ = self.error_source(probe_frame)
            return errors

        self.jac = estimate_jacobian(probe, q0, self.cfg)
        self._record(0, q0, self.error, features)

    def step_once(self) -> StepRecord | None:
        """Advance one control step; returns its record, or None if terminal."""
        if self.status is not None:
            return None
        if self.jac is None:
            self.initialize()
        norm = float(np.linalg.norm(self.error))
        if norm < self.cfg.converge_eps:
            self._set_status(AttemptStatus.CONVERGED)
            return None
        if self.steps_taken >= self.cfg.max_iters:
            self._set_status(AttemptStatus.ITER_BUDGET)
            return None

        dq = control_step(self.jac, self.error, self.cfg)
        q_before = self.session.q
        frame = self.session.apply(dq)
        dq_actual = np.asarray(frame.q, dtype=float) - q_before
        new_error, features = self.error_source(frame)
        self.jac = broyden_update(self.jac, dq_actual, new_error - self.error, self.cfg)
        self.error = new_error
        self.steps_taken += 1

        new_norm = float(np.linalg.norm(new_error))
        reference = max(self.initial_error_norm, self.cfg.diverge_floor)
        if new_norm > self.cfg.diverge_factor * reference:
            self._bad_steps += 1
        else:
            self._bad_steps = 0
        record = self._record(self.steps_taken, frame.q, new_error, features)
        if self._bad_steps >= self.cfg.diverge_patience:
            self._set_status(AttemptStatus.DIVERGED)
        elif new_norm < self.cfg.converge_eps:
            self._set_status(AttemptStatus.CONVERGED)
        return record

    def drive(self) -> AttemptStatus:
        """Run until a terminal status is reached."""
        try:
            while self.status is None:
                self.step_once()
        except (FeatureLost, ProbeFailed) as exc:
            log.info("attempt lost features: %s", exc)
            self._set_status(AttemptStatus.FEATURE_LOST)
        return self.status

    @property
    def error_norm(self) -> float:
        if self.error is None:
            return float("nan")
        return float(np.linalg.norm(self.error))

    def _set_status(self, status: AttemptStatus) -> None:
        if self.status is not None:
            raise RuntimeError("attempt status already set")
        self.status = status

    def _record(self, step, q, error, features) -> StepRecord:
        record = StepRecord(
            step=step,
            q=[float(v) for v in np.asarray(q).ravel()],
            error=[float(v) for v in np.asarray(error).ravel()],
            error_norm=float(np.linalg.norm(error)),
            features=[_feature_dict(b) for b in features],
            jacobian_cond=float(np.linalg.cond(self.jac)) if self.jac is not None else float("inf"),
        )
        self.records.append(record)
        return record


def run_attempt(session: ServoSession, constraints: list[ConstraintSpec],
                cfg: ControllerConfig, tau: float = 0.5) -> AttemptResult:
    """Run one servoing attempt over a live session.

    Loops frame acquisition, feature refresh, error stacking, damped
    control steps and Broyden updates until convergence, the iteration
    budget, divergence, or feature loss.
    """
    binder = ConstraintBinder(constraints, tau=tau)
    run = ServoRun(session, binder.errors, cfg)
    status = run.drive()
    final_norm = run.error_norm if run.error is not None else float("nan")
    return AttemptResult(
        status=status,
        records=run.records,
        initial_error_norm=run.initial_error_norm if run.initial_error_norm is not None else float("nan"),
        final_error_norm=final_norm,
        steps_taken=run.steps_taken,
    )
