"""Two-level stacking: level-1 predictions on the validation window become
regressors of a level-2 (Lasso or Bayesian) meta-model.

Windows, in time order::

    train  |  stack_train  |  stack_test
           ^ boundary      ^ out_of_sample_date (or the validation midpoint)

Level-1 models only ever see ``train``; the meta-model is fit on
``stack_train`` and scored on ``stack_test``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import metrics
from .core import SplitSpec, TimeSeriesFrame, zscore_fit_arrays
from .errors import ConfigError, DataError
from .learners import lasso_fit

WINDOWS = ("stack_train", "stack_test")


@dataclass
class MetaMatrix:
    names: list
    X: np.ndarray  # (rows, models)
    target: np.ndarray
    dates: np.ndarray
    entity: np.ndarray
    window: np.ndarray  # "stack_train" / "stack_test" per row

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ConfigError(f"model names must be unique: {self.names}")
        self.X = np.asarray(self.X, float).reshape(len(self.target), len(self.names))

    def part(self, window: str):
        if window not in WINDOWS:
            raise ConfigError(f"window must be one of {WINDOWS}")
        m = self.window == window
        return self.X[m], self.target[m]

    def column(self, name):
        return self.X[:, self.names.index(name)]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(
            {"date": self.dates.astype(str), "entity": self.entity, "window": self.window,
             "target": self.target}
        )
        for i, n in enumerate(self.names):
            df[n] = self.X[:, i]
        return df


def read_predictions(path) -> pd.DataFrame:
    """Load the ``date,entity,model_name,prediction`` exchange format."""
    df = pd.read_csv(path)
    need = {"date", "entity", "model_name", "prediction"}
    if not need <= set(df.columns):
        raise DataError(f"predictions file needs columns {sorted(need)}")
    return df


def write_predictions(df: pd.DataFrame, path) -> None:
    df[["date", "entity", "model_name", "prediction"]].to_csv(
        path, index=False, lineterminator="\n", float_format="%.10g"
    )


def _align_external(ext: pd.DataFrame, frame: TimeSeriesFrame):
    ext = ext.copy()
    ext["date"] = pd.to_datetime(ext["date"]).dt.normalize()
    ext["entity"] = ext["entity"].astype(str)
    if ext.duplicated(["date", "entity", "model_name"]).any():
        raise DataError("duplicate (date, entity, model_name) rows in external predictions")
    keys = pd.DataFrame({"date": pd.to_datetime(frame.dates), "entity": frame.entity})
    cols = {}
    for name, g in ext.groupby("model_name", sort=True):
        merged = keys.merge(g[["date", "entity", "prediction"]], on=["date", "entity"], how="left")
        if merged["prediction"].isna().any() or len(g) != len(keys):
            raise DataError(
                f"external predictions for {name!r} are misaligned with the stacking window"
            )
        cols[str(name)] = merged["prediction"].to_numpy(float)
    return cols


def build_meta_matrix(
    models, frame: TimeSeriesFrame, split: SplitSpec, external: pd.DataFrame | None = None,
    stack_train_frac: float = 0.5,
) -> MetaMatrix:
    """Columns are level-1 predictions on every row dated at or after the boundary.

    ``models`` are :class:`FittedModel` instances; each must have been trained
    strictly before the boundary.  ``external`` holds predictions from other
    tools in the exchange format and must cover exactly the same rows.
    """
    b = np.datetime64(split.boundary_date.date(), "D")
    for m in models:
        if not m.train_end < b:
            raise DataError(
                f"model {m.name!r} was trained through {m.train_end}, overlapping the "
                f"validation window starting {b}"
            )
    win = frame.select(frame.dates >= b)
    if len(win) == 0:
        raise DataError("no rows at or after the boundary")
    cols = {m.name: m.predict(win) for m in models}
    if external is not None:
        ext = _align_external(external, win)
        clash = set(ext) & set(cols)
        if clash:
            raise ConfigError(f"external model names clash with fitted models: {sorted(clash)}")
        cols.update(ext)
    if not cols:
        raise ConfigError("need at least one level-1 model")
    dates = win.dates
    if split.out_of_sample_date is not None:
        cut = np.datetime64(split.out_of_sample_date.date(), "D")
    else:
        if not 0 < stack_train_frac < 1:
            raise ConfigError("stack_train_frac must be in (0, 1)")
        uniq = np.unique(dates)
        cut = uniq[min(int(np.ceil(stack_train_frac * uniq.size)), uniq.size - 1)]
    window = np.where(dates < cut, "stack_train", "stack_test")
    names = list(cols)
    X = np.column_stack([cols[n] for n in names])
    if not np.isfinite(X).all():
        raise DataError("non-finite level-1 predictions")
    return MetaMatrix(names, X, win.target, dates, win.entity, window)


@dataclass
class StackedModel:
    names: list
    weights: np.ndarray
    intercept: float
    lam: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def included(self) -> list:
        return [n for n, w in zip(self.names, self.weights) if w != 0]

    @property
    def excluded(self) -> list:
        return [n for n, w in zip(self.names, self.weights) if w == 0]

    def predict(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, float) @ self.weights

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "lambda": self.lam,
            "included": self.included,
            "excluded": self.excluded,
            **self.info,
        }


def _meta_stats(X, y, names):
    sd = X.std(axis=0)
    live = sd > 0
    if not live.any():
        return None, None, live
    xs = zscore_fit_arrays({n: X[:, i] for i, n in enumerate(names) if live[i]})
    if not y.std() > 0:
        raise DataError("stacking target is constant on stack_train")
    ys = zscore_fit_arrays({"target": y})
    return xs, ys, live


def stack_fit_lasso(meta: MetaMatrix, lam: float = 0.01, tol: float = 1e-10) -> StackedModel:
    """Lasso on z-scored meta-columns (stack_train statistics), mapped back to raw units.

    Columns constant on stack_train cannot be standardized and get weight 0.
    """
    X, y = meta.part("stack_train")
    if X.shape[0] < 2:
        raise DataError("stack_fit_lasso needs at least 2 stack_train rows")
    xs, ys, live = _meta_stats(X, y, meta.names)
    w = np.zeros(len(meta.names))
    if xs is None:
        return StackedModel(list(meta.names), w, float(y.mean()), lam)
    live_names = [n for n, ok in zip(meta.names, live) if ok]
    Z = np.column_stack([xs.transform(n, X[:, meta.names.index(n)]) for n in live_names])
    yz = ys.transform("target", y)
    fit = lasso_fit(Z, yz, lam, tol=tol)
    y_mu, y_sd = ys.mean["target"], ys.std["target"]
    raw = fit.weights * y_sd / np.array([xs.std[n] for n in live_names])
    w[live] = raw
    b = y_mu + y_sd * fit.intercept - sum(raw[i] * xs.mean[n] for i, n in enumerate(live_names))
    return StackedModel(list(meta.names), w, float(b), lam, {"converged": fit.converged})


def stack_fit_bayes(meta: MetaMatrix, prior=None, config=None, nonneg=False) -> StackedModel:
    """Student-t meta-regression on z-scored columns; weights are posterior means.

    The posterior itself is kept in ``info['samples']`` (not serialized).
    """
    from .bayes import PriorSpec, fit_robust_linear

    X, y = meta.part("stack_train")
    if X.shape[0] < 2:
        raise DataError("stack_fit_bayes needs at least 2 stack_train rows")
    xs, ys, live = _meta_stats(X, y, meta.names)
    if xs is None:
        raise DataError("every meta-column is constant on stack_train")
    live_names = [n for n, ok in zip(meta.names, live) if ok]
    Z = np.column_stack([xs.transform(n, X[:, meta.names.index(n)]) for n in live_names])
    prior = prior or PriorSpec(constraint="nonneg" if nonneg else None)
    post = fit_robust_linear(Z, ys.transform("target", y), prior, config, names=live_names)
    y_mu, y_sd = ys.mean["target"], ys.std["target"]
    raw = np.array([post[n].mean() for n in live_names]) * y_sd / np.array(
        [xs.std[n] for n in live_names]
    )
    w = np.zeros(len(meta.names))
    w[live] = raw
    b = y_mu + y_sd * post["alpha"].mean() - sum(raw[i] * xs.mean[n] for i, n in enumerate(live_names))
    return StackedModel(list(meta.names), w, float(b), None, {"samples": post})


def bias_correct(pred, actual):
    """Least-squares ``actual ~ slope * pred + intercept``; returns ``(slope, intercept)``.

    Constant predictions leave the slope undefined: the identity map ``(1, 0)``
    is returned with a warning.
    """
    pred = np.asarray(pred, float).ravel()
    actual = np.asarray(actual, float).ravel()
    if pred.size != actual.size:
        raise DataError("pred and actual lengths differ")
    if pred.size < 2:
        raise DataError("bias correction needs at least 2 points")
    pc = pred - pred.mean()
    ss = float(pc @ pc)
    if ss == 0 or ss <= 1e-24 * max(float(pred @ pred), 1e-300):
        warnings.warn("constant predictions: bias correction falls back to identity", stacklevel=2)
        return 1.0, 0.0
    slope = float(pc @ (actual - actual.mean())) / ss
    return slope, float(actual.mean() - slope * pred.mean())


def evaluate_stack(stacked: StackedModel, meta: MetaMatrix, window: str = "stack_test"):
    X, y = meta.part(window)
    if y.size == 0:
        raise DataError(f"{window} window is empty")
    return metrics.report(stacked.predict(X), y)


def error_table(meta: MetaMatrix, stacked: StackedModel, label: str = "Stacking") -> pd.DataFrame:
    """RMAE (percent) per level-1 model and for the stack on both windows."""
    rows = []
    for i, n in enumerate(meta.names):
        row = {"model": n}
        for w, col in zip(WINDOWS, ("validation_rmae", "out_of_sample_rmae")):
            X, y = meta.part(w)
            row[col] = metrics.rmae(X[:, i], y) if y.size else float("nan")
        rows.append(row)
    row = {"model": label}
    for w, col in zip(WINDOWS, ("validation_rmae", "out_of_sample_rmae")):
        X, y = meta.part(w)
        row[col] = metrics.rmae(stacked.predict(X), y) if y.size else float("nan")
    rows.append(row)
    return pd.DataFrame(rows)
