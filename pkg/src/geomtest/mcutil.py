"""Small shared Monte Carlo helpers."""

from typing import NamedTuple

import numpy as np


class MCEstimate(NamedTuple):
    """A Monte Carlo estimate with its standard error."""

    value: float
    se: float


def mc_mean(values: np.ndarray) -> MCEstimate:
    v = np.asarray(values, float)
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))))


def binomial_se(p_hat: float, n: int) -> float:
    return float(np.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n))
