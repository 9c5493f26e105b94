"""Seeded generators with known ground truth.

Every generator is a pure function of its arguments; the seed only drives the
noise (and per-store draws when those are not given explicitly).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .core import TimeSeriesFrame
from .errors import ConfigError

DEFAULT_WEEKLY = (1.0, 0.95, 0.95, 1.0, 1.1, 1.25, 0.75)


@dataclass
class GeneratorSpec:
    n_stores: int = 5
    n_days: int = 365
    start: str = "2015-01-01"
    weekly: tuple = DEFAULT_WEEKLY  # multipliers Mon..Sun
    promo_freq: float = 0.3
    promo_lift: float = 0.25
    base_range: tuple = (4000.0, 8000.0)
    base_levels: tuple | None = None
    slope_range: tuple = (0.0, 0.0)  # per-store slope drawn uniformly, per day
    slopes: tuple | None = None
    noise_sd: float = 200.0
    outlier_rate: float = 0.0
    outlier_magnitude: float = 1.0  # in units of the store's base level
    seed: int = 0

    def __post_init__(self):
        self.weekly = tuple(float(w) for w in self.weekly)
        if len(self.weekly) != 7:
            raise ConfigError("weekly profile needs 7 multipliers")
        if not 0 <= self.promo_freq <= 1:
            raise ConfigError("promo_freq must be in [0, 1]")
        if self.n_stores < 1 or self.n_days < 1:
            raise ConfigError("n_stores and n_days must be positive")
        for name in ("base_levels", "slopes"):
            v = getattr(self, name)
            if v is not None and len(v) != self.n_stores:
                raise ConfigError(f"{name} must have one entry per store")
        if self.base_levels is not None and min(self.base_levels) <= 0:
            raise ConfigError("base levels must be positive")
        if self.base_levels is None and min(self.base_range) <= 0:
            raise ConfigError("base levels must be positive")


def generate_sales(spec: GeneratorSpec):
    """Rossmann-like daily store sales.

    ``sales = base * weekly[weekday] * (1 + lift*promo) * (1 + slope*t) + noise``,
    clipped at 0, with ``t`` in days since ``start``.  Returns ``(frame, truth)``;
    the frame carries covariates ``promo`` (0/1), ``weekday``, ``dayofmonth``,
    ``month`` (categorical) and ``time`` (days since start).
    """
    rng = np.random.default_rng(spec.seed)
    S, D = spec.n_stores, spec.n_days
    base = (
        np.asarray(spec.base_levels, float)
        if spec.base_levels is not None
        else rng.uniform(*spec.base_range, size=S)
    )
    slope = (
        np.asarray(spec.slopes, float)
        if spec.slopes is not None
        else rng.uniform(*spec.slope_range, size=S)
    )
    dates = pd.date_range(spec.start, periods=D, freq="D")
    t = np.arange(D, dtype=float)
    wd = dates.weekday.to_numpy()
    weekly = np.asarray(spec.weekly)
    promo = (rng.random((S, D)) < spec.promo_freq).astype(int)
    mean = (
        base[:, None]
        * weekly[wd][None, :]
        * (1 + spec.promo_lift * promo)
        * (1 + slope[:, None] * t[None, :])
    )
    noise = rng.normal(0.0, spec.noise_sd, size=(S, D)) if spec.noise_sd > 0 else 0.0
    sales = mean + noise
    outliers = rng.random((S, D)) < spec.outlier_rate
    sales = sales + outliers * spec.outlier_magnitude * base[:, None]
    sales = np.maximum(sales, 0.0)
    names = [f"store_{i + 1}" for i in range(S)]
    df = pd.DataFrame(
        {
            "date": np.tile(dates, S),
            "entity": np.repeat(names, D),
            "target": sales.ravel(),
            "promo": promo.ravel(),
            "weekday": np.tile(wd, S),
            "dayofmonth": np.tile(dates.day.to_numpy(), S),
            "month": np.tile(dates.month.to_numpy(), S),
            "time": np.tile(t, S),
        }
    )
    frame = TimeSeriesFrame(df, categorical=("weekday", "dayofmonth", "month"))
    truth = {
        "stores": names,
        "base": base.tolist(),
        "slope": slope.tolist(),
        "weekly": list(weekly),
        "promo_lift": spec.promo_lift,
        "spec": asdict(spec),
    }
    return frame, truth


def logistic_curve(t, alpha, beta, t0, scale=1e5):
    return alpha * scale / (1.0 + np.exp(-beta * (np.asarray(t, dtype=float) - t0)))


def generate_logistic_cases(alpha, beta, t0, noise_sd=0.0, n_weeks=20, seed=0):
    """Cumulative case counts on weekly grid ``t = 0..n_weeks-1``.

    With ``noise_sd == 0`` the series is exactly ``alpha*1e5/(1+exp(-beta(t-t0)))``.
    Noise (in case counts) is added then the series is made non-decreasing and
    non-negative.  Returns ``(t, cases)``.
    """
    if alpha <= 0 or beta <= 0:
        raise ConfigError("alpha and beta must be positive")
    t = np.arange(n_weeks, dtype=float)
    cases = logistic_curve(t, alpha, beta, t0)
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        cases = np.maximum.accumulate(np.maximum(cases + rng.normal(0, noise_sd, t.size), 0.0))
    return t, cases


def generate_demand(
    n_days=400,
    start="2015-01-01",
    base=0.3,
    weekly=DEFAULT_WEEKLY,
    promo_freq=0.3,
    promo_lift=0.4,
    noise_sd=0.02,
    seed=0,
) -> pd.DataFrame:
    """Normalized daily demand in relative units: columns ``date,demand,promo``."""
    rng = np.random.default_rng(seed)
    dates = pd.date_range(start, periods=n_days, freq="D")
    wd = dates.weekday.to_numpy()
    promo = (rng.random(n_days) < promo_freq).astype(int)
    demand = base * np.asarray(weekly)[wd] * (1 + promo_lift * promo)
    demand = np.maximum(demand + rng.normal(0, noise_sd, n_days), 0.0)
    return pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), "demand": demand, "promo": promo})


@dataclass
class ReturnsSpec:
    n_days: int = 1500
    start: str = "2017-01-02"
    sd: float = 0.01
    df: float = 4.0
    shifts: dict = field(default_factory=dict)  # name -> (start, end, mean shift)
    seed: int = 0


def generate_returns(spec: ReturnsSpec) -> pd.DataFrame:
    """Daily returns with Student-t noise and injected mean shifts per window."""
    rng = np.random.default_rng(spec.seed)
    dates = pd.bdate_range(spec.start, periods=spec.n_days)
    r = spec.sd * rng.standard_t(spec.df, size=spec.n_days) / np.sqrt(spec.df / (spec.df - 2))
    for lo, hi, shift in spec.shifts.values():
        m = (dates >= pd.Timestamp(lo)) & (dates <= pd.Timestamp(hi))
        r = r + shift * m
    return pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), "return": r})
