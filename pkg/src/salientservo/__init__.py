"""Saliency-driven geometric constraints and uncalibrated visual servoing.

The toolkit turns per-pixel saliency masks and user annotations into
point/line constraint errors on the image plane and drives a simulated
eye-in-hand camera rig to task completion with a Broyden-updated
visuomotor controller. It also ships standalone numerical kernels for
masked token-fusion attention and the focal+dice segmentation loss, plus
the segmentation evaluation metrics used to grade mask quality.
"""

from . import controller, fusion, geometry, metrics, runner, saliency, simulator, trace
from .controller import AttemptStatus, ControllerConfig, run_attempt, score_task
from .geometry import ConstraintKind, HomoLine, HomoPoint
from .runner import run_task
from .saliency import ConstraintSpec, PairingMode, PairingPolicy, SaliencyMap, load_mask
from .simulator import SimSession, bundled_scenario_names, load_bundled_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "AttemptStatus",
    "ConstraintKind",
    "ConstraintSpec",
    "ControllerConfig",
    "HomoLine",
    "HomoPoint",
    "PairingMode",
    "PairingPolicy",
    "SaliencyMap",
    "SimSession",
    "bundled_scenario_names",
    "controller",
    "fusion",
    "geometry",
    "load_bundled_scenario",
    "load_mask",
    "load_scenario",
    "metrics",
    "run_attempt",
    "run_task",
    "runner",
    "saliency",
    "score_task",
    "simulator",
    "trace",
]
