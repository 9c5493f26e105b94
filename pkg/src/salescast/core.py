"""Data model and feature engineering shared by every other module.

A :class:`TimeSeriesFrame` is a thin immutable wrapper over a pandas frame with
three reserved columns (``date``, ``entity``, ``target``) plus named
covariates.  Every operation here returns a new frame.

Conventions fixed for the whole package:

* standard deviations are population (divide by N) standard deviations;
* the split boundary row belongs to the validation side;
* rows with missing lag values are dropped from training matrices, never imputed;
* a categorical level unseen at fit time encodes as an all-zeros one-hot row.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError

RESERVED = ("date", "entity", "target")


def _to_day(values) -> pd.Series:
    s = pd.to_datetime(pd.Series(values), errors="raise")
    return s.dt.normalize()


class TimeSeriesFrame:
    """Timestamped, entity-keyed rows of target plus covariates.

    Rows are kept sorted by ``(date, entity)``.  The underlying frame is copied
    in and out, so instances behave as values.
    """

    __slots__ = ("_df", "_categorical")

    def __init__(self, df: pd.DataFrame, categorical: Iterable[str] = ()):
        missing = [c for c in RESERVED if c not in df.columns]
        if missing:
            raise DataError(f"frame is missing required columns: {missing}")
        df = df.copy()
        df["date"] = _to_day(df["date"]).to_numpy()
        df["entity"] = df["entity"].astype(str)
        df["target"] = pd.to_numeric(df["target"], errors="raise").astype(float)
        cats = set(categorical)
        for c in df.columns:
            if c in RESERVED:
                continue
            if df[c].dtype == object or isinstance(df[c].dtype, pd.CategoricalDtype):
                cats.add(c)
        unknown = cats - set(df.columns)
        if unknown:
            raise ConfigError(f"categorical columns not in frame: {sorted(unknown)}")
        dup = df.duplicated(["entity", "date"])
        if dup.any():
            row = df.loc[dup].iloc[0]
            raise DataError(
                f"duplicate (entity, date) pair: ({row['entity']}, {row['date'].date()})"
            )
        df = df.sort_values(["date", "entity"], kind="mergesort").reset_index(drop=True)
        self._df = df
        self._categorical = frozenset(cats)

    # -- accessors -----------------------------------------------------
    def __len__(self) -> int:
        return len(self._df)

    def __repr__(self) -> str:
        return (
            f"TimeSeriesFrame(rows={len(self)}, entities={self.entities.size}, "
            f"covariates={self.covariates})"
        )

    @property
    def categorical(self) -> frozenset:
        return self._categorical

    @property
    def columns(self) -> list[str]:
        return list(self._df.columns)

    @property
    def covariates(self) -> list[str]:
        return [c for c in self._df.columns if c not in RESERVED]

    @property
    def dates(self) -> np.ndarray:
        return self._df["date"].to_numpy(dtype="datetime64[D]")

    @property
    def entity(self) -> np.ndarray:
        return self._df["entity"].to_numpy()

    @property
    def entities(self) -> np.ndarray:
        return np.unique(self._df["entity"].to_numpy())

    @property
    def target(self) -> np.ndarray:
        return self._df["target"].to_numpy(dtype=float)

    def column(self, name: str) -> np.ndarray:
        if name not in self._df.columns:
            raise ConfigError(f"unknown column {name!r}")
        return self._df[name].to_numpy()

    def to_pandas(self) -> pd.DataFrame:
        return self._df.copy()

    # -- derivation ----------------------------------------------------
    def replace(self, df: pd.DataFrame, categorical: Iterable[str] | None = None):
        cats = self._categorical if categorical is None else categorical
        cats = [c for c in cats if c in df.columns]
        return TimeSeriesFrame(df, cats)

    def select(self, mask) -> "TimeSeriesFrame":
        mask = np.asarray(mask, dtype=bool)
        return self.replace(self._df.loc[mask])

    def with_column(self, name: str, values, categorical: bool = False):
        df = self._df.copy()
        df[name] = np.asarray(values)
        cats = set(self._categorical)
        if categorical:
            cats.add(name)
        return self.replace(df, cats)

    @property
    def time_range(self) -> tuple[np.datetime64, np.datetime64]:
        d = self.dates
        return d.min(), d.max()


# ---------------------------------------------------------------------------
# CSV ingestion


def read_csv(path, categorical: Iterable[str] = ()) -> TimeSeriesFrame:
    """Load the ``date,entity,target,<covariates...>`` CSV schema."""
    df = pd.read_csv(path, encoding="utf-8", dtype={"entity": str})
    return TimeSeriesFrame(df, categorical)


def write_csv(frame: TimeSeriesFrame, path) -> None:
    df = frame.to_pandas()
    df["date"] = df["date"].dt.strftime("%Y-%m-%d")
    df.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")


def add_calendar_features(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Append categorical ``weekday`` (0=Mon), ``dayofmonth`` and ``month``."""
    df = frame.to_pandas()
    df["weekday"] = df["date"].dt.weekday
    df["dayofmonth"] = df["date"].dt.day
    df["month"] = df["date"].dt.month
    return frame.replace(df, set(frame.categorical) | {"weekday", "dayofmonth", "month"})


# ---------------------------------------------------------------------------
# One-hot encoding


def one_hot_encode(frame: TimeSeriesFrame, column: str, levels: Sequence | None = None):
    """Replace ``column`` by one binary column per level.

    ``levels`` defaults to the sorted distinct values of the column.  Passing the
    training levels when encoding a later window keeps the layout fixed; values
    outside ``levels`` get an all-zeros row.
    """
    if column not in frame.columns or column in RESERVED:
        raise ConfigError(f"unknown covariate column {column!r}")
    df = frame.to_pandas()
    values = df[column].to_numpy()
    if levels is None:
        levels = sorted(pd.unique(values), key=lambda v: (str(type(v)), v))
    if len(levels) < 1:
        raise DataError(f"column {column!r} has no values to encode")
    pos = list(df.columns).index(column)
    left = df.iloc[:, :pos]
    right = df.iloc[:, pos + 1 :]
    onehot = pd.DataFrame(
        {f"{column}_{lv}": (values == lv).astype(np.int8) for lv in levels}, index=df.index
    )
    out = pd.concat([left, onehot, right], axis=1)
    cats = set(frame.categorical) - {column}
    return frame.replace(out, cats)


# ---------------------------------------------------------------------------
# Normalization


@dataclass(frozen=True)
class NormalizerStats:
    """Per-column mean and population std (always > 0)."""

    mean: Mapping[str, float]
    std: Mapping[str, float]

    def __post_init__(self):
        for k, s in self.std.items():
            if not s > 0:
                raise DataError(f"column {k!r} has zero variance; cannot z-score")

    @property
    def columns(self) -> list[str]:
        return list(self.mean)

    def transform(self, name: str, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean[name]) / self.std[name]

    def inverse(self, name: str, values) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.std[name] + self.mean[name]

    def to_dict(self) -> dict:
        return {"mean": dict(self.mean), "std": dict(self.std)}

    @classmethod
    def from_dict(cls, d) -> "NormalizerStats":
        return cls(dict(d["mean"]), dict(d["std"]))


def zscore_fit_arrays(columns: Mapping[str, Sequence[float]]) -> NormalizerStats:
    mean, std = {}, {}
    for name, v in columns.items():
        v = np.asarray(v, dtype=float)
        if v.size == 0:
            raise DataError(f"column {name!r} is empty")
        mean[name] = float(v.mean())
        std[name] = float(v.std())
        if not std[name] > 0:
            raise DataError(f"column {name!r} has zero variance; cannot z-score")
    return NormalizerStats(mean, std)


def zscore_fit(frame: TimeSeriesFrame, columns: Sequence[str]) -> NormalizerStats:
    for c in columns:
        if c in frame.categorical:
            raise ConfigError(f"column {c!r} is categorical; cannot z-score")
    return zscore_fit_arrays({c: frame.column(c).astype(float) for c in columns})


def zscore_apply(frame: TimeSeriesFrame, stats: NormalizerStats) -> TimeSeriesFrame:
    df = frame.to_pandas()
    for c in stats.columns:
        if c not in df.columns:
            raise ConfigError(f"unknown column {c!r}")
        df[c] = stats.transform(c, df[c].to_numpy(dtype=float))
    return frame.replace(df)


# ---------------------------------------------------------------------------
# Time splits


@dataclass(frozen=True)
class SplitSpec:
    boundary_date: date
    out_of_sample_date: date | None = None

    def __post_init__(self):
        b = pd.Timestamp(self.boundary_date).normalize()
        object.__setattr__(self, "boundary_date", b)
        if self.out_of_sample_date is not None:
            o = pd.Timestamp(self.out_of_sample_date).normalize()
            object.__setattr__(self, "out_of_sample_date", o)
            if not o > b:
                raise ConfigError("out_of_sample_date must be after boundary_date")


def time_split(frame: TimeSeriesFrame, spec: SplitSpec):
    """Partition rows by date: train < boundary <= validation [< oos <= ...].

    Returns ``(train, validation)`` or ``(train, validation, out_of_sample)``.
    """
    d = frame.dates
    b = np.datetime64(spec.boundary_date.date(), "D")
    lo, hi = d.min(), d.max()
    if not (lo < b <= hi):
        raise DataError(
            f"boundary {b} must lie strictly inside the observed range ({lo}, {hi}]"
        )
    train = d < b
    if spec.out_of_sample_date is None:
        parts = [train, ~train]
        labels = ["train", "validation"]
    else:
        o = np.datetime64(spec.out_of_sample_date.date(), "D")
        oos = d >= o
        parts = [train, ~train & ~oos, oos]
        labels = ["train", "validation", "out_of_sample"]
    for m, name in zip(parts, labels):
        if not m.any():
            raise DataError(f"{name} partition is empty")
    return tuple(frame.select(m) for m in parts)


# ---------------------------------------------------------------------------
# Lags and group aggregates


def lag_features(frame: TimeSeriesFrame, column: str, lags: Sequence[int]):
    """Add ``{column}_lag{k}`` for each k, shifted within each entity.

    Rows without enough history hold NaN; :func:`training_matrix` drops them.
    """
    if column not in frame.columns:
        raise ConfigError(f"unknown column {column!r}")
    lags = list(lags)
    if not lags or any(int(k) != k or k < 1 for k in lags):
        raise ConfigError(f"lags must be positive integers, got {lags}")
    df = frame.to_pandas()
    sizes = df.groupby("entity").size()
    grouped = df.groupby("entity", sort=False)[column]
    for k in lags:
        short = sizes[sizes <= k]
        if len(short):
            warnings.warn(
                f"lag {k} >= series length for entities {list(short.index)}; "
                "they contribute no trainable rows",
                stacklevel=2,
            )
        df[f"{column}_lag{k}"] = grouped.shift(int(k)).astype(float)
    return frame.replace(df)


def group_aggregate(
    train: TimeSeriesFrame,
    frame: TimeSeriesFrame,
    by: Sequence[str],
    column: str = "target",
    stat: str = "mean",
) -> np.ndarray:
    """Annotate each row of ``frame`` with its group's mean over ``train``.

    Groups absent from ``train`` fall back to the global training mean.
    """
    if stat != "mean":
        raise ConfigError(f"unsupported aggregate {stat!r}")
    if len(train) == 0:
        raise DataError("cannot aggregate over an empty training window")
    by = list(by)
    tdf = train.to_pandas()
    fdf = frame.to_pandas()
    for c in by + [column]:
        if c not in tdf.columns or (c != column and c not in fdf.columns):
            raise ConfigError(f"unknown column {c!r}")
    means = tdf.groupby(by)[column].mean().rename("_agg").reset_index()
    merged = fdf[by].merge(means, on=by, how="left")
    out = merged["_agg"].to_numpy(dtype=float)
    out[np.isnan(out)] = float(tdf[column].mean())
    return out


# ---------------------------------------------------------------------------
# Feature matrices


def training_matrix(frame: TimeSeriesFrame, features: Sequence[str]):
    """Return ``(X, y, keep)`` with rows containing missing features dropped."""
    df = frame.to_pandas()
    for c in features:
        if c not in df.columns:
            raise ConfigError(f"unknown column {c!r}")
    X = df[list(features)].to_numpy(dtype=float)
    keep = np.isfinite(X).all(axis=1)
    return X[keep], df["target"].to_numpy(dtype=float)[keep], keep


@dataclass
class FeatureEncoder:
    """One-hot categoricals and z-score real covariates using training stats."""

    categorical: dict = field(default_factory=dict)  # column -> levels
    real: list = field(default_factory=list)
    stats: NormalizerStats | None = None

    @classmethod
    def fit(cls, frame: TimeSeriesFrame, columns: Sequence[str] | None = None):
        columns = frame.covariates if columns is None else list(columns)
        cats, real = {}, []
        for c in columns:
            if c in frame.categorical:
                cats[c] = sorted(pd.unique(frame.column(c)).tolist())
            else:
                real.append(c)
        stats = None
        if real:
            vals = {c: frame.column(c).astype(float) for c in real}
            vals = {c: v[np.isfinite(v)] for c, v in vals.items()}
            stats = zscore_fit_arrays(vals)
        return cls(cats, real, stats)

    @property
    def feature_names(self) -> list[str]:
        names = [f"{c}_{lv}" for c, levels in self.categorical.items() for lv in levels]
        return names + list(self.real)

    def transform(self, frame: TimeSeriesFrame) -> np.ndarray:
        blocks = []
        for c, levels in self.categorical.items():
            v = frame.column(c)
            blocks.append(np.stack([(v == lv) for lv in levels], axis=1).astype(float))
        for c in self.real:
            blocks.append(self.stats.transform(c, frame.column(c).astype(float))[:, None])
        if not blocks:
            return np.zeros((len(frame), 0))
        return np.concatenate(blocks, axis=1)

    def to_dict(self) -> dict:
        return {
            "categorical": {k: [_jsonable(v) for v in lv] for k, lv in self.categorical.items()},
            "real": list(self.real),
            "stats": None if self.stats is None else self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "FeatureEncoder":
        stats = None if d["stats"] is None else NormalizerStats.from_dict(d["stats"])
        return cls(dict(d["categorical"]), list(d["real"]), stats)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return v
