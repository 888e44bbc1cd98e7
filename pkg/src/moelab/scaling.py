"""Effective-parameter-multiplier arithmetic on log-linear scaling laws.

A dense baseline family is summarized by f(N) = a * ln N + b fitted by
ordinary least squares on accuracy-vs-parameter-count points.  Inverting
f at a treated model's score gives its effective parameter count; the
ratio to its physical count is the multiplier lambda, and lambda * N is
the iso-accuracy baseline size.

Natural log is fixed as the convention; changing the base rescales
(a, b) but leaves every inverted quantity unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DomainError, FitError


@dataclass(frozen=True)
class AccuracyPoint:
    """One benchmark observation of a baseline model."""

    n_params: float
    score: float

    def __post_init__(self) -> None:
        if not self.n_params > 0:
            raise DomainError(f"n_params must be positive, got {self.n_params!r}")


@dataclass(frozen=True)
class ScalingLawFit:
    """Coefficients of score = a * ln(n_params) + b."""

    a: float
    b: float
    residual_rms: float
    n_points: int

    def predict(self, n_params: float) -> float:
        if n_params <= 0:
            raise DomainError(f"n_params must be positive, got {n_params!r}")
        return self.a * math.log(n_params) + self.b

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "residual_rms": self.residual_rms,
                "n_points": self.n_points}


def fit_log_linear(points: Iterable[AccuracyPoint] | Sequence[tuple[float, float]]
                   ) -> ScalingLawFit:
    """Least-squares fit of score against ln(parameter count)."""
    pts = [p if isinstance(p, AccuracyPoint) else AccuracyPoint(*p) for p in points]
    if len({p.n_params for p in pts}) < 2:
        raise FitError("need at least 2 points with distinct parameter counts")
    xs = [math.log(p.n_params) for p in pts]
    ys = [p.score for p in pts]
    n = len(pts)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    a = sxy / sxx
    b = mean_y - a * mean_x
    rss = sum((y - (a * x + b)) ** 2 for x, y in zip(xs, ys))
    return ScalingLawFit(a=a, b=b, residual_rms=math.sqrt(rss / n), n_points=n)


def invert_scaling_law(fit: ScalingLawFit, score: float) -> float:
    """Parameter count at which the fitted baseline reaches ``score``."""
    if fit.a == 0.0:
        raise DomainError("flat scaling law (a = 0) cannot be inverted")
    return math.exp((score - fit.b) / fit.a)


def epm_lambda(n_eff: float, n_treat: float) -> float:
    """Effective-capacity multiplier: effective over physical parameters."""
    if n_treat <= 0:
        raise DomainError(f"n_treat must be positive, got {n_treat!r}")
    return n_eff / n_treat


def iso_accuracy_size(lam: float, n_treat: float) -> tuple[float, float]:
    """Baseline size matching the treated model's accuracy, and the increase."""
    if lam <= 0 or n_treat <= 0:
        raise DomainError("lambda and n_treat must be positive")
    n_iso = lam * n_treat
    return n_iso, n_iso - n_treat
