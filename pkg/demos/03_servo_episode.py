"""
A full servoing episode on a bundled scenario
=============================================

Runs the pick-and-place scenario under the attempt protocol and plots the
error-norm history of the winning attempt.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from salientservo.controller import ControllerConfig
from salientservo.runner import run_task
from salientservo.simulator import load_bundled_scenario

scenario = load_bundled_scenario("place_lemon_bowl")
print("scenario:", scenario.name, "| stages:", [s.name for s in scenario.stages])

trace = run_task(scenario, seed=0, cfg=ControllerConfig())
print("statuses:", trace.statuses, "| success rate:", trace.success_rate, "%")

attempt = trace.attempts[-1]
fig, ax = plt.subplots(figsize=(7, 3.5))
for stage in attempt.stages:
    steps = [r.step for r in stage.records]
    norms = [r.error_norm for r in stage.records]
    ax.plot(steps, norms, marker=".", label=f"stage: {stage.name}")
ax.set_xlabel("control step")
ax.set_ylabel("error norm (px)")
ax.set_yscale("log")
ax.legend()
ax.set_title("error norm per control step")
fig.tight_layout()
fig.savefig("servo_episode_errors.png", dpi=120)
print("wrote servo_episode_errors.png")
