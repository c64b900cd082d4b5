"""Tests for Jacobian estimation, Broyden updates and the servo loop."""

import numpy as np
import pytest

from conftest import FunctionPlant, function_error_source
from salientservo.controller import (
    AttemptStatus,
    ControllerConfig,
    ProbeFailed,
    ServoRun,
    SingularSystem,
    broyden_update,
    control_step,
    estimate_jacobian,
    score_task,
)

CFG = ControllerConfig()


def random_conditioned_matrix(rng, n, cond_max=50.0):
    """Random square matrix with singular values in [1, cond_max]."""
    u, _ = np.linalg.qr(rng.normal(size=(n, n)))
    v, _ = np.linalg.qr(rng.normal(size=(n, n)))
    s = rng.uniform(1.0, cond_max, size=n)
    s[0] = 1.0
    s[-1] = cond_max
    return u @ np.diag(s) @ v.T


class TestEstimateJacobian:
    def test_linear_map_exact(self):
        a = np.array([[2.0, 0.0], [0.0, 3.0]])
        jac = estimate_jacobian(lambda q: a @ q, np.zeros(2), CFG)
        assert np.allclose(jac, a, atol=1e-9)

    def test_constant_map_zero(self):
        jac = estimate_jacobian(lambda q: np.array([5.0, -1.0]), np.ones(3), CFG)
        assert np.allclose(jac, 0.0)

    def test_smooth_map_second_order(self):
        jac = estimate_jacobian(
            lambda q: np.array([q[0] ** 2, q[1]]), np.array([1.0, 0.0]), CFG
        )
        assert np.allclose(jac, [[2.0, 0.0], [0.0, 1.0]], atol=1e-4)

    def test_analytic_jacobian_relative_accuracy(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a, b = rng.uniform(0.5, 2.0, size=2)

            def fn(q):
                return np.array([np.sin(a * q[0]) + q[1], np.exp(b * q[1]) * q[0]])

            q0 = rng.uniform(-0.5, 0.5, size=2)
            jac = estimate_jacobian(fn, q0, CFG)
            analytic = np.array([
                [a * np.cos(a * q0[0]), 1.0],
                [np.exp(b * q0[1]), b * q0[0] * np.exp(b * q0[1])],
            ])
            assert np.allclose(jac, analytic, rtol=1e-3, atol=1e-6)

    def test_plant_restored_to_q0(self):
        plant = FunctionPlant([0.3, -0.2])
        source = function_error_source(lambda q: 2 * q)

        def probe(q):
            frame = plant.set_q(q)
            return source(frame)[0]

        q0 = plant.q
        estimate_jacobian(probe, q0, CFG)
        assert np.array_equal(plant.q, q0)

    def test_probe_failure(self):
        def bad_probe(q):
            raise RuntimeError("feature left field of view")

        with pytest.raises(ProbeFailed):
            estimate_jacobian(bad_probe, np.zeros(2), CFG)


class TestBroydenUpdate:
    def test_scalar_case(self):
        jac = broyden_update(np.array([[1.0]]), np.array([1.0]), np.array([2.0]), CFG)
        assert np.allclose(jac, [[2.0]])

    def test_zero_residual_noop(self):
        rng = np.random.default_rng(1)
        jac = rng.normal(size=(3, 2))
        dq = rng.normal(size=2)
        updated = broyden_update(jac, dq, jac @ dq, CFG)
        assert np.allclose(updated, jac, atol=1e-14)

    def test_floor_skip(self):
        jac = np.array([[1.0, 2.0]])
        out = broyden_update(jac, np.zeros(2), np.array([9.0]), CFG)
        assert out is jac

    def test_secant_condition(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            e_dim = int(rng.integers(1, 6))
            n_dim = int(rng.integers(1, 6))
            jac = rng.normal(size=(e_dim, n_dim))
            dq = rng.normal(size=n_dim)
            de = rng.normal(size=e_dim)
            updated = broyden_update(jac, dq, de, CFG)
            assert np.linalg.norm(updated @ dq - de) <= 1e-9 * (1 + np.linalg.norm(de))


class TestControlStep:
    def test_identity_jacobian(self):
        cfg = ControllerConfig(damping=0.0, max_step=10.0)
        dq = control_step(np.eye(2), np.array([4.0, -2.0]), cfg)
        assert np.allclose(dq, [-0.4, 0.2])

    def test_zero_error(self):
        assert np.allclose(control_step(np.eye(3), np.zeros(3), CFG), 0.0)

    def test_damped_solve_then_clamp(self):
        jac = np.array([[2.0, 0.0], [0.0, 3.0]])
        e = np.array([2.0, 3.0])
        free = control_step(jac, e, ControllerConfig(max_step=1.0))
        assert np.allclose(free, [-0.09997500624843789, -0.09998889012332], atol=1e-9)
        clamped = control_step(jac, e, CFG)
        assert np.allclose(clamped, [-0.02, -0.02])

    def test_predicted_descent(self):
        rng = np.random.default_rng(3)
        cfg = ControllerConfig(damping=1e-9, max_step=1e9, gain=0.5)
        for _ in range(50):
            e_dim = int(rng.integers(2, 6))
            n_dim = int(rng.integers(1, e_dim + 1))
            jac = rng.normal(size=(e_dim, n_dim))
            # Keep full column rank away from zero.
            if np.linalg.matrix_rank(jac) < n_dim:
                continue
            e = jac @ rng.normal(size=n_dim)  # reachable error component
            if np.linalg.norm(e) < 1e-9:
                continue
            dq = control_step(jac, e, cfg)
            assert np.linalg.norm(e + jac @ dq) < np.linalg.norm(e)

    def test_nan_rejected(self):
        with pytest.raises(SingularSystem):
            control_step(np.array([[np.nan]]), np.array([1.0]), CFG)


class TestConfigValidation:
    def test_rejects_nonpositive_core_params(self):
        with pytest.raises(ValueError):
            ControllerConfig(gain=0.0)
        with pytest.raises(ValueError):
            ControllerConfig(max_step=-1.0)
        with pytest.raises(ValueError):
            ControllerConfig(fd_delta=0.0)
        with pytest.raises(ValueError):
            ControllerConfig(converge_eps=0.0)

    def test_attempt_bounds(self):
        with pytest.raises(ValueError):
            ControllerConfig(max_attempts=0)
        with pytest.raises(ValueError):
            ControllerConfig(max_attempts=4)
        assert ControllerConfig(max_attempts=3).max_attempts == 3

    def test_zero_damping_allowed(self):
        assert ControllerConfig(damping=0.0).damping == 0.0

    def test_negative_iters_rejected(self):
        with pytest.raises(ValueError):
            ControllerConfig(max_iters=-1)


class TestScoreTask:
    def test_first_try(self):
        assert score_task([AttemptStatus.CONVERGED]) == 100.0

    def test_second_try(self):
        assert score_task([AttemptStatus.DIVERGED, AttemptStatus.CONVERGED]) == 50.0

    def test_two_failures(self):
        assert score_task([AttemptStatus.DIVERGED, AttemptStatus.ITER_BUDGET]) == 0.0

    def test_third_try_scores_zero(self):
        statuses = [AttemptStatus.ITER_BUDGET, AttemptStatus.ITER_BUDGET,
                    AttemptStatus.CONVERGED]
        assert score_task(statuses) == 0.0

    def test_arity(self):
        with pytest.raises(ValueError):
            score_task([])
        with pytest.raises(ValueError):
            score_task([AttemptStatus.DIVERGED] * 4)

    def test_no_attempts_after_success(self):
        with pytest.raises(ValueError):
            score_task([AttemptStatus.CONVERGED, AttemptStatus.CONVERGED])


class TestServoLoop:
    def servo_linear(self, a, q0, cfg):
        plant = FunctionPlant(q0)
        run = ServoRun(plant, function_error_source(lambda q: a @ q), cfg)
        status = run.drive()
        return status, run

    def test_newton_like_convergence(self):
        rng = np.random.default_rng(4)
        cfg = ControllerConfig(gain=1.0, damping=1e-9, max_step=np.inf,
                               converge_eps=1e-6, max_iters=50)
        for _ in range(20):
            n = int(rng.integers(2, 5))
            a = random_conditioned_matrix(rng, n)
            status, run = self.servo_linear(a, rng.uniform(-1, 1, size=n), cfg)
            assert status is AttemptStatus.CONVERGED
            assert run.steps_taken <= 50
            assert run.error_norm < 1e-6

    def test_linear_rate_with_small_gain(self):
        rng = np.random.default_rng(5)
        cfg = ControllerConfig(gain=0.2, damping=1e-6, max_step=np.inf,
                               converge_eps=1e-9, max_iters=400)
        a = random_conditioned_matrix(rng, 3, cond_max=10.0)
        plant = FunctionPlant(rng.uniform(-1, 1, size=3))
        run = ServoRun(plant, function_error_source(lambda q: a @ q), cfg)
        run.initialize()
        norms = [run.error_norm]
        for _ in range(30):
            if run.step_once() is None:
                break
            norms.append(run.error_norm)
        for before, after in zip(norms, norms[1:]):
            assert after <= (1 - cfg.gain / 2) * before + 1e-12

    def test_iter_budget_immediate(self):
        cfg = ControllerConfig(max_iters=0)
        status, run = self.servo_linear(np.eye(2) * 100, [1.0, 1.0], cfg)
        assert status is AttemptStatus.ITER_BUDGET
        assert run.steps_taken == 0

    def test_converged_at_start(self):
        cfg = ControllerConfig(max_iters=0, converge_eps=2.0)
        status, _ = self.servo_linear(np.eye(2), [1e-3, 0.0], cfg)
        assert status is AttemptStatus.CONVERGED

    def test_divergence_detector(self):
        # Runaway target: the error grows regardless of the applied motion.
        cfg = ControllerConfig(gain=1.0, max_step=np.inf, diverge_patience=10,
                               max_iters=500, converge_eps=1e-9)
        plant = FunctionPlant([1.0])
        calls = iter(range(10_000))

        def runaway(q):
            return np.array([10.0 * 1.3 ** next(calls)])

        run = ServoRun(plant, function_error_source(runaway), cfg)
        assert run.drive() is AttemptStatus.DIVERGED
        assert run.steps_taken < 30

    def test_records_are_monotone(self):
        cfg = ControllerConfig(gain=0.5, converge_eps=1e-3, max_step=np.inf)
        _, run = self.servo_linear(np.eye(2) * 3, [1.0, -1.0], cfg)
        steps = [r.step for r in run.records]
        assert steps == sorted(steps)
        assert steps[0] == 0
        assert len(set(steps)) == len(steps)

    def test_broyden_tracks_drifting_map(self):
        # Mildly nonlinear map: exact-init Newton would misstep, Broyden adapts.
        cfg = ControllerConfig(gain=0.5, damping=1e-8, max_step=np.inf,
                               converge_eps=1e-8, max_iters=200)
        plant = FunctionPlant([0.8, -0.6])

        def fn(q):
            return np.array([2.0 * q[0] + 0.3 * q[1] ** 2, 3.0 * q[1] + 0.2 * q[0] ** 2])

        run = ServoRun(plant, function_error_source(fn), cfg)
        assert run.drive() is AttemptStatus.CONVERGED
