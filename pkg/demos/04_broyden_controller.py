"""
Broyden-updated control on an analytic plant
============================================

The servo core needs no camera: any error function of the configuration
works. Central differences seed the Jacobian estimate; rank-one secant
updates keep it current while damped least squares picks each step.
"""

import numpy as np

from salientservo.controller import ControllerConfig, broyden_update, control_step, estimate_jacobian

rng = np.random.default_rng(3)


def plant(q):
    # Mildly nonlinear 3-error, 2-DOF map.
    return np.array([
        2.0 * q[0] + 0.3 * q[1] ** 2,
        3.0 * q[1] - 0.2 * q[0] * q[1],
        0.5 * (q[0] + q[1]),
    ])


cfg = ControllerConfig(gain=0.5, damping=1e-6, max_step=1.0, converge_eps=1e-8)
q = rng.uniform(-1, 1, size=2)
jac = estimate_jacobian(plant, q, cfg)
print("initial |e| =", round(float(np.linalg.norm(plant(q))), 4))

for step in range(30):
    e = plant(q)
    if np.linalg.norm(e) < cfg.converge_eps:
        print(f"converged after {step} steps")
        break
    dq = control_step(jac, e, cfg)
    e_next = plant(q + dq)
    jac = broyden_update(jac, dq, e_next - e, cfg)
    q = q + dq
    print(f"step {step:2d}: |e| = {np.linalg.norm(e_next):.3e}  "
          f"secant residual = {np.linalg.norm(jac @ dq - (e_next - e)):.1e}")
