"""Reproducible synthetic experiments backing the directional claims.

Each function is deterministic in its ``seed`` and returns plain dicts so the
CLI and the acceptance tests share one code path.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from . import metrics
from .core import SplitSpec, TimeSeriesFrame, time_split
from .learners import fit_learner
from .stacking import build_meta_matrix, error_table, stack_fit_lasso
from .synthdata import GeneratorSpec, generate_sales

STACK_FEATURES = ("store", "promo", "weekday", "month", "time")
STACK_LEARNERS = {
    "lasso": {},
    "extratrees": {"n_trees": 30},
    "randomforest": {"n_trees": 30},
    "perceptron": {"epochs": 60},
}


def stacking_spec(seed: int) -> GeneratorSpec:
    """5 stores, 2 years, mild per-store trends and noise."""
    return GeneratorSpec(
        n_stores=5, n_days=540, slope_range=(-0.0005, 0.001), noise_sd=300.0, seed=seed
    )


def stacking_frame(seed: int) -> TimeSeriesFrame:
    frame, _ = generate_sales(stacking_spec(seed))
    return frame.with_column("store", frame.entity, categorical=True)


def noisy_external(frame: TimeSeriesFrame, rel_sd=0.12, seed=0, name="arima") -> pd.DataFrame:
    """Stand-in for an externally produced forecast: actuals times lognormal noise."""
    rng = np.random.default_rng(seed)
    pred = frame.target * np.exp(rng.normal(0.0, rel_sd, len(frame)))
    return pd.DataFrame(
        {"date": frame.dates.astype(str), "entity": frame.entity, "model_name": name,
         "prediction": pred}
    )


def stacking_experiment(seed: int = 0, lam: float = 0.01, frame: TimeSeriesFrame | None = None):
    """Four base learners plus one noisy external column, Lasso meta-model.

    Split: first 70% of days train, next 15% stack_train, last 15% stack_test.
    """
    frame = stacking_frame(seed) if frame is None else frame
    days = np.unique(frame.dates)
    split = SplitSpec(days[int(0.70 * days.size)], days[int(0.85 * days.size)])
    train, valid, oos = time_split(frame, split)
    models = [
        fit_learner(name, train, list(STACK_FEATURES), seed=seed, **params)
        for name, params in STACK_LEARNERS.items()
    ]
    tail = frame.select(frame.dates >= np.datetime64(split.boundary_date.date(), "D"))
    ext = noisy_external(tail, seed=seed + 10_000)
    meta = build_meta_matrix(models, frame, split, external=ext)
    stacked = stack_fit_lasso(meta, lam)
    table = error_table(meta, stacked)
    singles = table.iloc[:-1]
    stack_row = table.iloc[-1]
    return {
        "seed": seed,
        "table": table,
        "weights": stacked.to_dict(),
        "best_single_validation_rmae": float(singles["validation_rmae"].min()),
        "stack_validation_rmae": float(stack_row["validation_rmae"]),
        "stack_out_of_sample_rmae": float(stack_row["out_of_sample_rmae"]),
        "meta": meta,
        "stacked": stacked,
    }


def trend_experiment(seed: int = 0, slope: float = 0.003, config=None, n_stores=5, n_days=365):
    """Validation RMSE of the trend net with and without its trend block.

    Per-store slopes are drawn uniformly in ``[-slope, slope]`` per day; the
    last ~2 months are held out for validation.
    """
    from .trendnet import TrendNetConfig, train

    spec = GeneratorSpec(
        n_stores=n_stores, n_days=n_days, slope_range=(-slope, slope), noise_sd=200.0, seed=seed
    )
    frame, truth = generate_sales(spec)
    days = np.unique(frame.dates)
    tr, va = time_split(frame, SplitSpec(days[int(0.83 * days.size)]))
    cfg = config or TrendNetConfig(seed=seed)
    out = {"seed": seed, "slopes": truth["slope"]}
    for flag, key in ((True, "rmse_trend"), (False, "rmse_plain")):
        net = train(tr, cfg, with_trend=flag, valid_frame=va)
        out[key] = metrics.rmse(net.predict(va), va.target)
        out["net_trend" if flag else "net_plain"] = net
    return out
