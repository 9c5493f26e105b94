"""Error and risk statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError, NumericalError


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=float).ravel()
    actual = np.asarray(actual, dtype=float).ravel()
    if pred.shape != actual.shape:
        raise DataError(f"length mismatch: {pred.size} predictions vs {actual.size} actuals")
    if pred.size == 0:
        raise DataError("need at least one observation")
    return pred, actual


def rmae(pred, actual) -> float:
    """Mean absolute error relative to the mean actual, in percent."""
    pred, actual = _pair(pred, actual)
    denom = actual.mean()
    if denom == 0:
        raise NumericalError("mean of actuals is zero; RMAE undefined")
    return float(np.abs(pred - actual).mean() / denom * 100.0)


def rmse(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def _lower_rank(q: float, n: int) -> int:
    # 1-based rank ceil(q*n); rounding first keeps decimal q (0.01*700) exact
    return max(1, math.ceil(round(q * n, 9)))


def value_at_risk(samples, q: float = 0.05) -> float:
    """Lower empirical q-quantile: the order statistic of rank ceil(q*n)."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise DataError("value_at_risk needs at least one sample")
    if not 0 < q < 1:
        raise DataError(f"quantile level must be in (0, 1), got {q}")
    k = _lower_rank(q, s.size)
    return float(np.partition(s, k - 1)[k - 1])


def quantiles(samples, levels) -> np.ndarray:
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise DataError("quantiles need at least one sample")
    return np.array([s[_lower_rank(q, s.size) - 1] for q in levels])


def coefficient_of_variation(samples) -> float:
    """|std / mean| with population std."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise DataError("coefficient_of_variation needs samples")
    mu = s.mean()
    if mu == 0:
        raise NumericalError("mean is zero; coefficient of variation undefined")
    return float(abs(s.std() / mu))


@dataclass(frozen=True)
class MetricReport:
    rmae: float
    rmse: float
    var5: float
    n: int

    def to_dict(self):
        return asdict(self)


def report(pred, actual, predictive_samples=None) -> MetricReport:
    """Bundle RMAE, RMSE and a 5% VaR.

    ``var5`` is the 5% VaR of ``predictive_samples`` when given (e.g. posterior
    predictive draws of the total), otherwise of the residuals ``actual - pred``,
    i.e. the 5% worst shortfall of actuals below the forecast, in target units.
    """
    pred, actual = _pair(pred, actual)
    src = actual - pred if predictive_samples is None else predictive_samples
    return MetricReport(
        rmae=rmae(pred, actual),
        rmse=rmse(pred, actual),
        var5=value_at_risk(src, 0.05),
        n=int(pred.size),
    )
