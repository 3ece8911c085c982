"""Order-statistic quantile rules shared by calibration and the baselines."""

from __future__ import annotations

import math

import numpy as np

from .exceptions import ValidationError

QUANTILE_RULES = ("higher", "conformal")


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 <= alpha < 1.0):
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha!r}")
    return alpha


def order_statistic_rank(m: int, alpha: float, rule: str = "higher") -> int:
    """1-based rank of the order statistic used as the (1 - alpha) quantile.

    ``higher``:    ceil((1 - alpha) * m)
    ``conformal``: ceil((m + 1) * (1 - alpha)), clipped to m
    """
    if m < 1:
        raise ValidationError("quantile of an empty sample")
    level = 1.0 - check_alpha(alpha)
    if rule == "higher":
        x = level * m
    elif rule == "conformal":
        x = level * (m + 1)
    else:
        raise ValidationError(f"unknown quantile rule {rule!r}; expected {QUANTILE_RULES}")
    # guard against products like 95.00000000000001 from binary fractions
    rank = math.ceil(x - 1e-9 * max(1.0, x))
    return min(max(rank, 1), m)


def empirical_quantile(values, alpha: float, rule: str = "higher") -> float:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValidationError("quantile of an empty sample")
    r = order_statistic_rank(v.size, alpha, rule)
    return float(np.partition(v, r - 1)[r - 1])
