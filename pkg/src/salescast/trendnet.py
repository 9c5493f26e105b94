"""Dense sales network with a trend-correction block.

Layout::

    [embeddings | one-hots | numeric] -> input block (Dense+ReLU) -> h
    h -> main block  -> main_output
    h -> trend block -> trend_weight
    prediction = main_output + trend_weight * t_norm

Everything is in normalized units: the target is z-scored on the training
window and ``t_norm = (t - t_min) / (t_max - t_min)`` on that window, so
validation dates extrapolate past 1.  Time itself is not a network input; it
only enters through the trend term.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics
from .core import NormalizerStats, TimeSeriesFrame, zscore_fit_arrays
from .errors import ConfigError, DataError, NumericalError
from .nn import Adam, DenseStack


@dataclass
class TrendNetConfig:
    embed: dict = field(default_factory=lambda: {"store": 4})  # column -> embedding dim
    onehot: tuple = ("weekday", "promo")
    numeric: tuple = ()
    input_width: int = 32
    main_widths: tuple = (32, 16)
    trend_width: int = 16
    dropout: float = 0.0
    epochs: int = 40
    batch_size: int = 64
    lr: float = 3e-3
    lr_decay: float = 0.97
    seed: int = 0

    def __post_init__(self):
        self.onehot = tuple(self.onehot)
        self.numeric = tuple(self.numeric)
        self.main_widths = tuple(int(w) for w in self.main_widths)
        widths = [self.input_width, self.trend_width, *self.main_widths, *self.embed.values()]
        if min(widths) < 1:
            raise ConfigError("all widths and embedding dims must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must be in [0, 1)")
        if self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ConfigError("lr must be > 0 and lr_decay in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")


def _day_number(frame):
    return frame.dates.astype(np.int64).astype(float)


def _frame_column(frame, name):
    # "store" is an alias for the entity key when the frame has no such column
    if name not in frame.columns and name in ("store", "entity"):
        return frame.entity
    return frame.column(name)


@dataclass
class Batch:
    emb: list  # int index arrays, one per embedded column (0 = unknown)
    dense: np.ndarray
    t: np.ndarray
    y: np.ndarray | None = None

    def __len__(self):
        return self.t.size

    def take(self, idx):
        return Batch(
            [e[idx] for e in self.emb], self.dense[idx], self.t[idx],
            None if self.y is None else self.y[idx],
        )


class TrendNet:
    """Trained network plus every statistic needed to encode new frames."""

    def __init__(self, config, levels, onehot_levels, num_stats, y_stats, t_range,
                 with_trend=True, params=None):
        self.config = config
        self.levels = levels  # embedded column -> list of levels
        self.onehot_levels = onehot_levels
        self.num_stats = num_stats
        self.y_stats = y_stats
        self.t_min, self.t_max = float(t_range[0]), float(t_range[1])
        self.with_trend = bool(with_trend)
        self.history = []
        cfg = config
        rng = np.random.default_rng(cfg.seed)
        d_in = sum(cfg.embed[c] for c in levels) + sum(len(v) for v in onehot_levels.values())
        d_in += len(cfg.numeric)
        if params is None:
            self.emb = []
            for c in levels:
                E = rng.normal(0.0, 0.1, size=(len(levels[c]) + 1, cfg.embed[c]))
                E[0] = 0.0  # unknown level
                self.emb.append(E)
            self.input = DenseStack([max(d_in, 1), cfg.input_width], rng, final_relu=True,
                                    dropout=cfg.dropout)
            self.main = DenseStack([cfg.input_width, *cfg.main_widths, 1], rng, dropout=cfg.dropout)
            self.trend = DenseStack([cfg.input_width, cfg.trend_width, 1], rng, dropout=cfg.dropout)
        else:
            self.emb = [np.asarray(e, float) for e in params["emb"]]
            self.input = DenseStack.from_dict(params["input"])
            self.main = DenseStack.from_dict(params["main"])
            self.trend = DenseStack.from_dict(params["trend"])

    # -- parameters -------------------------------------------------------
    @property
    def params(self) -> list:
        return [*self.emb, *self.input.params, *self.main.params, *self.trend.params]

    def copy(self) -> "TrendNet":
        return TrendNet.from_dict(self.to_dict())

    # -- encoding ---------------------------------------------------------
    def t_norm(self, t):
        span = self.t_max - self.t_min
        return (np.asarray(t, float) - self.t_min) / (span if span > 0 else 1.0)

    def encode(self, frame: TimeSeriesFrame, with_target=True) -> Batch:
        emb = []
        for c, lv in self.levels.items():
            lookup = {v: i + 1 for i, v in enumerate(lv)}
            emb.append(np.array([lookup.get(_key(v), 0) for v in _frame_column(frame, c)], np.int64))
        blocks = []
        for c, lv in self.onehot_levels.items():
            v = np.array([_key(x) for x in _frame_column(frame, c)], dtype=object)
            blocks.append(np.stack([v == x for x in lv], axis=1).astype(float))
        for c in self.config.numeric:
            blocks.append(self.num_stats.transform(c, frame.column(c).astype(float))[:, None])
        n = len(frame)
        dense = np.concatenate(blocks, axis=1) if blocks else np.zeros((n, 0))
        if dense.shape[1] == 0 and not self.levels:
            dense = np.ones((n, 1))
        y = self.y_stats.transform("target", frame.target) if with_target else None
        return Batch(emb, dense, self.t_norm(_day_number(frame)), y)

    # -- forward / backward ----------------------------------------------
    def forward(self, batch: Batch, train=False, rng=None):
        """Return ``{prediction, main_output, trend_weight}`` (normalized units) and a cache."""
        parts = [E[i] for E, i in zip(self.emb, batch.emb)]
        x = np.concatenate([*parts, batch.dense], axis=1)
        h, c_in = self.input.forward(x, train, rng)
        main, c_main = self.main.forward(h, train, rng)
        w, c_tr = self.trend.forward(h, train, rng)
        main, w = main[:, 0], w[:, 0]
        pred = main + w * batch.t if self.with_trend else main.copy()
        out = {"prediction": pred, "main_output": main, "trend_weight": w}
        return out, (batch, c_in, c_main, c_tr)

    def backward(self, cache, dpred):
        batch, c_in, c_main, c_tr = cache
        g_main, dh = self.main.backward(c_main, dpred[:, None])
        if self.with_trend:
            g_tr, dh_t = self.trend.backward(c_tr, (dpred * batch.t)[:, None])
            dh = dh + dh_t
        else:
            g_tr = [np.zeros_like(p) for p in self.trend.params]
        g_in, dx = self.input.backward(c_in, dh)
        g_emb = []
        col = 0
        for E, idx in zip(self.emb, batch.emb):
            k = E.shape[1]
            g = np.zeros_like(E)
            np.add.at(g, idx, dx[:, col : col + k])
            g_emb.append(g)
            col += k
        return [*g_emb, *g_in, *g_main, *g_tr]

    def loss_and_grads(self, batch: Batch, train=False, rng=None):
        """Mean squared error on normalized targets and gradients aligned with :attr:`params`."""
        out, cache = self.forward(batch, train, rng)
        diff = out["prediction"] - batch.y
        loss = float(np.mean(diff**2))
        return loss, self.backward(cache, 2.0 * diff / diff.size)

    def predict(self, frame: TimeSeriesFrame) -> np.ndarray:
        out, _ = self.forward(self.encode(frame, with_target=False))
        return self.y_stats.inverse("target", out["prediction"])

    # -- persistence ------------------------------------------------------
    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["onehot"] = list(cfg["onehot"])
        cfg["numeric"] = list(cfg["numeric"])
        cfg["main_widths"] = list(cfg["main_widths"])
        return {
            "config": cfg,
            "levels": self.levels,
            "onehot_levels": self.onehot_levels,
            "num_stats": None if self.num_stats is None else self.num_stats.to_dict(),
            "y_stats": self.y_stats.to_dict(),
            "t_range": [self.t_min, self.t_max],
            "with_trend": self.with_trend,
            "params": {
                "emb": [e.tolist() for e in self.emb],
                "input": self.input.to_dict(),
                "main": self.main.to_dict(),
                "trend": self.trend.to_dict(),
            },
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d) -> "TrendNet":
        num = None if d["num_stats"] is None else NormalizerStats.from_dict(d["num_stats"])
        net = cls(
            TrendNetConfig(**d["config"]), d["levels"], d["onehot_levels"], num,
            NormalizerStats.from_dict(d["y_stats"]), d["t_range"], d["with_trend"], d["params"],
        )
        net.history = list(d.get("history", []))
        return net

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrendNet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _key(v):
    # JSON-safe level keys (numpy scalars -> python, everything else as str)
    if isinstance(v, (np.integer, int, bool, np.bool_)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return str(v)


def _levels(frame, col):
    vals = sorted({_key(v) for v in _frame_column(frame, col)}, key=lambda x: (str(type(x)), x))
    return vals


def build_net(frame: TimeSeriesFrame, config: TrendNetConfig, with_trend=True) -> TrendNet:
    """Fit encoders and normalizers on ``frame`` and initialise weights."""
    if len(frame) < 2:
        raise DataError("need at least two training rows")
    levels = {c: _levels(frame, c) for c in config.embed}
    onehot = {c: _levels(frame, c) for c in config.onehot}
    num = zscore_fit_arrays({c: frame.column(c).astype(float) for c in config.numeric}) \
        if config.numeric else None
    ys = zscore_fit_arrays({"target": frame.target})
    d = _day_number(frame)
    return TrendNet(config, levels, onehot, num, ys, (d.min(), d.max()), with_trend)


class TrainingDiverged(NumericalError):
    def __init__(self, msg, checkpoint):
        super().__init__(msg)
        self.checkpoint = checkpoint


def train(train_frame: TimeSeriesFrame, config: TrendNetConfig | None = None, with_trend=True,
          valid_frame: TimeSeriesFrame | None = None, diverge_at=1e6) -> TrendNet:
    """Mini-batch Adam with ``lr = lr0 * decay**epoch``.

    ``net.history`` holds one ``{epoch, lr, train_loss, valid_loss}`` record per
    epoch (losses are MSE in normalized units, evaluated without dropout).  On
    divergence a :class:`TrainingDiverged` is raised carrying the last good
    checkpoint.
    """
    cfg = config or TrendNetConfig()
    net = build_net(train_frame, cfg, with_trend)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    batch = net.encode(train_frame)
    vbatch = net.encode(valid_frame) if valid_frame is not None and len(valid_frame) else None
    opt = Adam(net.params, lr=cfg.lr)
    n = len(batch)
    last_good = net.to_dict()
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr * cfg.lr_decay**epoch
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            mb = batch.take(order[s : s + cfg.batch_size])
            _, grads = net.loss_and_grads(mb, train=True, rng=rng)
            opt.step(net.params, grads)
        tl = _mse(net, batch)
        vl = _mse(net, vbatch) if vbatch is not None else float("nan")
        if not np.isfinite(tl) or tl > diverge_at:
            raise TrainingDiverged(
                f"training diverged at epoch {epoch} (loss={tl:.3g}, lr={opt.lr:.3g})", last_good
            )
        net.history.append({"epoch": epoch, "lr": opt.lr, "train_loss": tl, "valid_loss": vl})
        last_good = net.to_dict()
    return net


def _mse(net, batch):
    out, _ = net.forward(batch)
    return float(np.mean((out["prediction"] - batch.y) ** 2))


def write_telemetry(net: TrendNet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "lr", "train_loss", "valid_loss"])
        for r in net.history:
            w.writerow([r["epoch"], f"{r['lr']:.10g}", f"{r['train_loss']:.10g}", f"{r['valid_loss']:.10g}"])


def permutation_importance(net: TrendNet, frame: TimeSeriesFrame, features=None, repeats=5,
                           seed=0, metric=metrics.rmse) -> dict:
    """Increase of ``metric`` (sales units) when one feature is shuffled across rows.

    ``features`` defaults to every input column; ``"time"`` permutes the dates
    seen by the trend term.  Each repeat uses its own seeded permutation.
    """
    if len(frame) < 2:
        raise DataError("permutation importance needs at least two rows")
    cfg = net.config
    features = list(features) if features is not None else [*cfg.embed, *cfg.onehot, *cfg.numeric]
    base_batch = net.encode(frame)
    y = frame.target

    def score(b):
        out, _ = net.forward(b)
        return metric(net.y_stats.inverse("target", out["prediction"]), y)

    base = score(base_batch)
    rng = np.random.default_rng(seed)
    out = {}
    for f in features:
        deltas = []
        for _ in range(repeats):
            perm = rng.permutation(len(frame))
            b = _permuted(net, frame, base_batch, f, perm)
            deltas.append(score(b) - base)
        out[f] = float(np.mean(deltas))
    return out


def _permuted(net, frame, batch, feature, perm):
    cfg = net.config
    emb = list(batch.emb)
    dense = batch.dense.copy()
    t = batch.t
    if feature == "time":
        t = t[perm]
    elif feature in cfg.embed:
        i = list(net.levels).index(feature)
        emb[i] = emb[i][perm]
    else:
        col = 0
        for c, lv in net.onehot_levels.items():
            if c == feature:
                dense[:, col : col + len(lv)] = dense[perm, col : col + len(lv)]
                break
            col += len(lv)
        else:
            if feature not in cfg.numeric:
                raise ConfigError(f"unknown feature {feature!r}")
            col += list(cfg.numeric).index(feature)
            dense[:, col] = dense[perm, col]
    return Batch(emb, dense, t, batch.y)
