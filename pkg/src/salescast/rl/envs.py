"""Pricing and supply-demand environments.

Both environments draw all randomness from the generator passed to
:meth:`reset`, so an episode is a pure function of that generator's state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError

PRICE_ACTIONS = (0.0, 0.15, 0.25, 0.5, 0.75, 0.85, 1.0, 1.5)
SUPPLY_ACTIONS = (0, 2, 4, 6, 8, 10, 12)


# ---------------------------------------------------------------------------
# Extra-price optimization


@dataclass
class PricingEnvConfig:
    price_m: float = 1.0
    a: float = 1.0
    b: float = 1.0
    c: float = 7.0
    d: float = 1.7
    actions: tuple = PRICE_ACTIONS
    steps: int = 7
    demand_low: float = 0.0
    demand_high: float = 1.0

    def __post_init__(self):
        self.actions = tuple(float(x) for x in self.actions)
        if min(self.actions) < 0:
            raise ConfigError("extra prices must be >= 0")
        if self.steps < 1 or not self.demand_high >= self.demand_low >= 0:
            raise ConfigError("invalid pricing env config")
        vals = (self.price_m, self.a, self.b, self.c, self.d)
        if not np.isfinite(vals).all():
            raise ConfigError("pricing parameters must be finite")


# two demand-curve steepness settings
PRICING_PRESETS = {
    "moderate": {"price_m": 1.0, "a": 1.0, "b": 1.0, "c": 7.0, "d": 1.7},
    "steep": {"price_m": 1.0, "a": 1.0, "b": 1.0, "c": 15.0, "d": 1.5},
}


def f_sales(price_e, cfg: PricingEnvConfig):
    """Retained fraction of sales ``a / (1 + b exp(c (Price_m (1 + price_e) - d)))``."""
    z = cfg.c * (cfg.price_m * (1.0 + np.asarray(price_e, float)) - cfg.d)
    return cfg.a / (1.0 + cfg.b * np.exp(np.clip(z, -700, 700)))


def expected_pricing_rewards(cfg: PricingEnvConfig) -> np.ndarray:
    """Closed-form expected reward per action: ``E[demand] * F(p) * p``."""
    p = np.asarray(cfg.actions)
    return 0.5 * (cfg.demand_low + cfg.demand_high) * f_sales(p, cfg) * p


class PricingEnv:
    """State: one-hot of the step within the episode plus the last demand."""

    def __init__(self, config: PricingEnvConfig | None = None):
        self.cfg = config or PricingEnvConfig()
        self.n_actions = len(self.cfg.actions)
        self.state_dim = self.cfg.steps + 1
        self.t = 0
        self.last_demand = 0.0
        self.rng = None

    def _state(self):
        s = np.zeros(self.state_dim)
        if self.t < self.cfg.steps:
            s[self.t] = 1.0
        s[-1] = self.last_demand
        return s

    def reset(self, rng: np.random.Generator):
        self.rng = rng
        self.t = 0
        self.last_demand = 0.0
        return self._state()

    def step(self, action: int):
        if not 0 <= int(action) < self.n_actions:
            raise ConfigError(f"action {action} out of range [0, {self.n_actions})")
        p = self.cfg.actions[int(action)]
        demand = float(self.rng.uniform(self.cfg.demand_low, self.cfg.demand_high))
        reward = demand * float(f_sales(p, self.cfg)) * p
        self.t += 1
        self.last_demand = demand
        done = self.t >= self.cfg.steps
        return self._state(), reward, done, {"demand": demand, "price_e": p}


# ---------------------------------------------------------------------------
# Supply-demand


@dataclass
class SupplyEnvConfig:
    demand: np.ndarray = None
    promo: np.ndarray = None
    weekday: np.ndarray = None
    episode_length: int = 150
    actions: tuple = SUPPLY_ACTIONS
    pack_size: float = 0.05  # 0.025 is the finer alternative
    profit: float = 1.0
    cost_rate: float = 0.5
    stop_reward: float = -1.0
    max_lag: int = 25
    dates: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.demand is None:
            raise ConfigError("supply env needs a demand series")
        self.demand = np.asarray(self.demand, float)
        n = self.demand.size
        self.promo = np.zeros(n) if self.promo is None else np.asarray(self.promo, float)
        self.weekday = np.arange(n) % 7 if self.weekday is None else np.asarray(self.weekday, int)
        if not np.isfinite(self.demand).all() or (self.demand < 0).any():
            raise DataError("demand series must be finite and non-negative")
        if self.promo.size != n or self.weekday.size != n:
            raise DataError("demand, promo and weekday must have equal length")
        if any(int(a) != a or a < 0 for a in self.actions):
            raise ConfigError("supply actions must be non-negative integers")
        self.actions = tuple(int(a) for a in self.actions)
        if self.episode_length < 1 or self.max_lag < 0 or self.pack_size <= 0:
            raise ConfigError("invalid supply env config")
        if n < self.episode_length + self.max_lag + 2:
            raise DataError(
                f"demand series of length {n} too short for episodes of "
                f"{self.episode_length} days with lag up to {self.max_lag}"
            )

    @classmethod
    def from_frame(cls, df: pd.DataFrame, **kw) -> "SupplyEnvConfig":
        need = {"date", "demand", "promo"}
        if not need <= set(df.columns):
            raise DataError(f"demand data needs columns {sorted(need)}")
        dates = pd.to_datetime(df["date"])
        return cls(
            demand=df["demand"].to_numpy(float), promo=df["promo"].to_numpy(float),
            weekday=dates.dt.weekday.to_numpy(), dates=dates.dt.strftime("%Y-%m-%d").to_numpy(), **kw,
        )


def read_demand_csv(path, **kw) -> SupplyEnvConfig:
    return SupplyEnvConfig.from_frame(pd.read_csv(path), **kw)


class SupplyEnv:
    """State: ``[promo, previous-day demand, weekday one-hot (7), stock]``.

    Each step: ``supply = packs * pack_size`` joins the stock, ``sales =
    min(stock + supply, demand)``, leftover stock carries over, and
    ``reward = profit * sales - cost_rate * (stock + supply)``.  The episode
    stops after ``episode_length`` days or as soon as the reward drops below
    ``stop_reward``.
    """

    state_dim = 10

    def __init__(self, config: SupplyEnvConfig):
        self.cfg = config
        self.n_actions = len(config.actions)
        self.start = 1
        self.t = 0
        self.stock = 0.0

    def _state(self):
        i = self.start + self.t
        s = np.zeros(self.state_dim)
        s[0] = self.cfg.promo[i]
        s[1] = self.cfg.demand[i - 1]
        s[2 + self.cfg.weekday[i]] = 1.0
        s[9] = self.stock
        return s

    def reset(self, rng: np.random.Generator):
        self.start = 1 + int(rng.integers(0, self.cfg.max_lag + 1))
        self.t = 0
        self.stock = 0.0
        return self._state()

    def step(self, action: int):
        if not 0 <= int(action) < self.n_actions:
            raise ConfigError(f"action {action} out of range [0, {self.n_actions})")
        cfg = self.cfg
        i = self.start + self.t
        demand = float(cfg.demand[i])
        stock_before = self.stock
        supply = cfg.actions[int(action)] * cfg.pack_size
        available = stock_before + supply
        sales = min(available, demand)
        shortage = max(0.0, demand - available)
        reward = cfg.profit * sales - cfg.cost_rate * available
        self.stock = available - sales
        self.t += 1
        done = self.t >= cfg.episode_length or reward < cfg.stop_reward
        info = {
            "index": i, "demand": demand, "supply": supply, "sales": sales,
            "shortage": shortage, "stock_before": stock_before, "stock": self.stock,
            "weekday": int(cfg.weekday[i]), "stopped": bool(reward < cfg.stop_reward),
        }
        return self._state(), reward, done, info
