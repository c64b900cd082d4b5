"""Shared test helpers."""

from types import SimpleNamespace

import numpy as np


class FunctionPlant:
    """Minimal servo session whose error is an analytic function of q.

    Satisfies the controller's session protocol without any rendering;
    frames carry only the configuration vector.
    """

    def __init__(self, q0):
        self._q = np.asarray(q0, dtype=float).copy()

    @property
    def q(self):
        return self._q.copy()

    def observe(self):
        return SimpleNamespace(q=self.q)

    def set_q(self, q):
        self._q = np.asarray(q, dtype=float).copy()
        return self.observe()

    def apply(self, dq):
        self._q = self._q + np.asarray(dq, dtype=float)
        return self.observe()


def function_error_source(fn):
    """Adapt e = fn(q) to the (errors, features) source the servo loop expects."""

    def source(frame):
        return np.asarray(fn(frame.q), dtype=float), []

    return source
