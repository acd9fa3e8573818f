"""Tie-aware rank correlations.

Spearman uses average ranks and the Pearson correlation of the rank
vectors; Kendall is tau-b. Both refuse constant inputs instead of
returning a misleading 0.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class DegenerateInput(ValueError):
    pass


def _check(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DegenerateInput("inputs must be 1-D and of equal length")
    if len(x) < 2:
        raise DegenerateInput("need at least two samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("inputs must be finite")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("correlation is undefined for a constant input")
    return x, y


def _clip(v: float) -> float:
    return max(-1.0, min(1.0, v))


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    x, y = _check(xs, ys)
    rx = rankdata(x) - (len(x) + 1) / 2
    ry = rankdata(y) - (len(y) + 1) / 2
    return _clip(float(np.dot(rx, ry) / math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))))


def kendall(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Kendall tau-b: (C - D) / sqrt((n0 - n1)(n0 - n2))."""
    x, y = _check(xs, ys)
    iu = np.triu_indices(len(x), k=1)
    dx = np.sign(x[:, None] - x[None, :])[iu]
    dy = np.sign(y[:, None] - y[None, :])[iu]
    s = float(np.sum(dx * dy))
    untied_x = float(np.count_nonzero(dx))
    untied_y = float(np.count_nonzero(dy))
    return _clip(s / math.sqrt(untied_x * untied_y))
