from typing import Callable, List

import numpy as np

from config.log_config import app_logger
from spinCore.operators import SpinOperators
from spinCore.spin_system import SpinSystem

H_START = 1e-4
H_MIN = 1e-6


class StepSizeError(RuntimeError):
    pass


def richardson_derivative(
    fn: Callable[[float], float],
    x: float,
    h_start: float = H_START,
    h_min: float = H_MIN,
    rtol: float = 1e-6,
    atol: float = 1e-6,
) -> float:
    """Derivative of fn at x by Richardson-extrapolated central differences.

    The step is halved from h_start until two successive extrapolations agree;
    StepSizeError is raised if that does not happen before h_min.
    """
    def central(h):
        return (fn(x + h) - fn(x - h)) / (2 * h)

    h = h_start
    d_h = central(h)
    previous = None
    while h / 2 >= h_min * (1 - 1e-12):
        d_half = central(h / 2)
        estimate = (4 * d_half - d_h) / 3
        if previous is not None and abs(estimate - previous) <= atol + rtol * abs(estimate):
            return float(estimate)
        previous = estimate
        h /= 2
        d_h = d_half
    raise StepSizeError(f"Derivative at x={x:.9g} did not converge for steps down to {h_min:g}")


def d2fdB2(trans, system: SpinSystem, ops: SpinOperators, **kwargs) -> float:
    """Second field derivative of the transition frequency, from the analytic slope of its branch."""
    from .tracking import BranchEvaluator

    key_i, key_j = trans.key
    evaluator = BranchEvaluator(system, ops, key_i, key_j)
    return richardson_derivative(evaluator.dfdb, trans.B0, **kwargs)


def curvatures(transitions: List, system: SpinSystem, ops: SpinOperators) -> List[float]:
    values = []
    for trans in transitions:
        try:
            values.append(d2fdB2(trans, system, ops))
        except StepSizeError as e:
            app_logger.warning(f"Curvature of {trans.name} at B0={trans.B0}: {e}")
            values.append(np.nan)
    return values
