"""Level-1 regressors: Lasso, extremely randomized trees / random forest, MLP.

All learners take plain ``(X, y)`` arrays.  :class:`FittedModel` couples a
learner with its feature encoder and the last training date so the stacking
layer can check for leakage.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import FeatureEncoder, TimeSeriesFrame
from .errors import ConfigError, DataError, NumericalError
from .nn import Adam, DenseStack


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError(f"X shape {X.shape} incompatible with y of length {y.size}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DataError("non-finite values in X or y")
    return X, y


# ---------------------------------------------------------------------------
# Lasso


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@dataclass
class LassoModel:
    weights: np.ndarray
    intercept: float
    lam: float
    converged: bool = True
    n_iter: int = 0

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.weights + self.intercept

    def to_dict(self):
        return {
            "kind": "lasso",
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "lambda": self.lam,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"], float), d["intercept"], d["lambda"], d["converged"], d["n_iter"])


def lasso_fit(X, y, lam, max_iter=10_000, tol=1e-10, fit_intercept=True) -> LassoModel:
    """Cyclic coordinate descent on (1/2n)||y - Xw - b||^2 + lam*||w||_1.

    Stops when the largest coordinate change in a sweep drops below ``tol``.
    If ``max_iter`` sweeps are exhausted the last iterate is returned with
    ``converged=False``.
    """
    X, y = _check_xy(X, y)
    if lam < 0:
        raise ConfigError("lambda must be non-negative")
    n, p = X.shape
    if n == 0:
        raise DataError("lasso_fit needs at least one row")
    sd = X.std(axis=0)
    nz = sd[sd > 0]
    if nz.size and (nz.max() / nz.min() > 10 or nz.max() > 100 or nz.min() < 1e-2):
        warnings.warn("lasso_fit: X does not look standardized; lambda acts unevenly", stacklevel=2)
    if fit_intercept:
        xm, ym = X.mean(axis=0), y.mean()
    else:
        xm, ym = np.zeros(p), 0.0
    Xc = X - xm
    r = y - ym
    a = (Xc * Xc).sum(axis=0) / n
    w = np.zeros(p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(p):
            if a[j] == 0.0:
                continue
            xj = Xc[:, j]
            old = w[j]
            rho = xj @ r / n + a[j] * old
            new = soft_threshold(rho, lam) / a[j]
            if new != old:
                r -= xj * (new - old)
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"lasso_fit did not converge in {max_iter} sweeps", stacklevel=2)
    return LassoModel(w, float(ym - xm @ w), float(lam), converged, it)


# ---------------------------------------------------------------------------
# Tree ensembles


@dataclass
class TreeConfig:
    n_trees: int = 50
    max_depth: int = 12
    min_leaf: int = 5
    max_features: float = 1.0  # fraction of features tried per node
    splitter: str = "random"  # "random" = extra-trees, "best" = CART
    bootstrap: bool = False
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 0 or self.min_leaf < 1:
            raise ConfigError(f"invalid tree config {self}")
        if not 0 < self.max_features <= 1:
            raise ConfigError("max_features must be a fraction in (0, 1]")
        if self.splitter not in ("random", "best"):
            raise ConfigError(f"unknown splitter {self.splitter!r}")


@dataclass
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def apply(self, X) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self):
        return {k: v.tolist() for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], np.int64),
            np.asarray(d["threshold"], float),
            np.asarray(d["left"], np.int64),
            np.asarray(d["right"], np.int64),
            np.asarray(d["value"], float),
            np.asarray(d["n_samples"], np.int64),
        )


def _sse(s, s2, n):
    return s2 - s * s / n


def _best_random_split(x, y, lo, hi, rng, min_leaf):
    thr = rng.uniform(lo, hi)
    left = x <= thr
    nl = int(left.sum())
    nr = x.size - nl
    if nl < min_leaf or nr < min_leaf:
        return None
    yl, yr = y[left], y[~left]
    return thr, _sse(yl.sum(), (yl * yl).sum(), nl) + _sse(yr.sum(), (yr * yr).sum(), nr)


def _best_exhaustive_split(x, y, min_leaf):
    order = np.argsort(x, kind="mergesort")
    xs, ys = x[order], y[order]
    n = xs.size
    cs = np.cumsum(ys)
    cs2 = np.cumsum(ys * ys)
    nl = np.arange(1, n)
    ok = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (n - nl >= min_leaf)
    if not ok.any():
        return None
    sl, sl2 = cs[:-1], cs2[:-1]
    sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
    cost = _sse(sl, sl2, nl) + _sse(sr, sr2, n - nl)
    cost = np.where(ok, cost, np.inf)
    i = int(np.argmin(cost))  # first minimum -> lowest threshold
    return 0.5 * (xs[i] + xs[i + 1]), float(cost[i])


def _grow_tree(X, y, cfg: TreeConfig, rng: np.random.Generator) -> Tree:
    n, p = X.shape
    k = max(1, int(round(cfg.max_features * p)))
    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        counts.append(idx.size)
        return len(feature) - 1

    root_idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
    stack = [(new_node(root_idx), root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yi = y[idx]
        if depth >= cfg.max_depth or idx.size < 2 * cfg.min_leaf or np.ptp(yi) == 0:
            continue
        parent = _sse(yi.sum(), (yi * yi).sum(), idx.size)
        cand = np.sort(rng.permutation(p)[:k])
        best = None  # (cost, feature, threshold)
        for f in cand:
            x = X[idx, f]
            lo, hi = x.min(), x.max()
            if lo == hi:
                continue
            if cfg.splitter == "random":
                res = _best_random_split(x, yi, lo, hi, rng, cfg.min_leaf)
            else:
                res = _best_exhaustive_split(x, yi, cfg.min_leaf)
            if res is None:
                continue
            thr, cost = res
            # strict improvement only: ties keep the lower feature index
            if best is None or cost < best[0]:
                best = (cost, int(f), float(thr))
        if best is None or best[0] >= parent:
            continue
        _, f, thr = best
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(
        np.asarray(feature, np.int64),
        np.asarray(threshold, float),
        np.asarray(left, np.int64),
        np.asarray(right, np.int64),
        np.asarray(value, float),
        np.asarray(counts, np.int64),
    )


@dataclass
class ExtraTreesModel:
    config: TreeConfig
    trees: list = field(default_factory=list)

    @property
    def n_trees(self):
        return len(self.trees)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_dict(self):
        return {
            "kind": "trees",
            "config": asdict(self.config),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(TreeConfig(**d["config"]), [Tree.from_dict(t) for t in d["trees"]])


def extra_trees_fit(X, y, config: TreeConfig | None = None) -> ExtraTreesModel:
    """Fit a forest; each tree gets its own RNG stream spawned from the seed,
    so results do not depend on ``n_jobs``."""
    cfg = config or TreeConfig()
    X, y = _check_xy(X, y)
    if X.shape[0] < 2:
        raise DataError("tree ensembles need at least two training rows")
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)
    rngs = [np.random.default_rng(s) for s in streams]
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as ex:
            trees = list(ex.map(lambda r: _grow_tree(X, y, cfg, r), rngs))
    else:
        trees = [_grow_tree(X, y, cfg, r) for r in rngs]
    return ExtraTreesModel(cfg, trees)


def random_forest_fit(X, y, config: TreeConfig | None = None) -> ExtraTreesModel:
    cfg = config or TreeConfig(splitter="best", bootstrap=True, max_features=0.5)
    return extra_trees_fit(X, y, cfg)


# ---------------------------------------------------------------------------
# Perceptron


@dataclass
class PerceptronConfig:
    hidden: tuple = (32, 16)
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError(f"invalid perceptron config {self}")


@dataclass
class PerceptronModel:
    net: DenseStack
    y_mean: float
    y_std: float
    config: PerceptronConfig
    loss_history: list = field(default_factory=list)

    def predict(self, X):
        out = self.net.predict(np.asarray(X, dtype=float))[:, 0]
        return out * self.y_std + self.y_mean

    def to_dict(self):
        return {
            "kind": "perceptron",
            "config": asdict(self.config),
            "net": self.net.to_dict(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, d):
        cfg = PerceptronConfig(**d["config"])
        return cls(DenseStack.from_dict(d["net"]), d["y_mean"], d["y_std"], cfg, d["loss_history"])


def mse_loss_and_grad(net: DenseStack, X, y):
    """Mean squared error of ``net`` on ``(X, y)`` and its parameter gradients."""
    out, cache = net.forward(X)
    diff = out[:, 0] - y
    loss = float(np.mean(diff**2))
    grads, _ = net.backward(cache, (2.0 / y.size) * diff[:, None])
    return loss, grads


def perceptron_fit(X, y, config: PerceptronConfig | None = None) -> PerceptronModel:
    """Mini-batch Adam on squared error.  The target is z-scored internally."""
    cfg = config or PerceptronConfig()
    X, y = _check_xy(X, y)
    n, p = X.shape
    rng = np.random.default_rng(cfg.seed)
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    yz = (y - y_mean) / y_std
    net = DenseStack([p, *cfg.hidden, 1], rng=rng)
    opt = Adam(net.params, lr=cfg.lr)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            b = order[start : start + cfg.batch_size]
            _, grads = mse_loss_and_grad(net, X[b], yz[b])
            opt.step(net.params, grads)
        loss = float(np.mean((net.predict(X)[:, 0] - yz) ** 2))
        if not np.isfinite(loss) or loss > 1e6:
            raise NumericalError(
                f"perceptron diverged at epoch {epoch}: loss={loss:.3g}, "
                f"lr={cfg.lr}, last finite loss={history[-1] if history else None}"
            )
        history.append(loss)
    return PerceptronModel(net, y_mean, y_std, cfg, history)


# ---------------------------------------------------------------------------
# Fitted-model wrapper and (de)serialization

LEARNERS = ("lasso", "extratrees", "randomforest", "perceptron")


def model_from_dict(d):
    kind = d["kind"]
    if kind == "lasso":
        return LassoModel.from_dict(d)
    if kind == "trees":
        return ExtraTreesModel.from_dict(d)
    if kind == "perceptron":
        return PerceptronModel.from_dict(d)
    raise ConfigError(f"unknown model kind {kind!r}")


@dataclass
class FittedModel:
    """A trained learner bound to its feature layout and training window."""

    name: str
    model: object
    encoder: FeatureEncoder
    train_end: np.datetime64

    def predict(self, frame: TimeSeriesFrame) -> np.ndarray:
        return self.model.predict(self.encoder.transform(frame))

    def to_dict(self):
        return {
            "name": self.name,
            "train_end": str(self.train_end),
            "encoder": self.encoder.to_dict(),
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["name"],
            model_from_dict(d["model"]),
            FeatureEncoder.from_dict(d["encoder"]),
            np.datetime64(d["train_end"], "D"),
        )


def fit_learner(name: str, train: TimeSeriesFrame, features=None, seed=0, **params) -> FittedModel:
    """Fit one of :data:`LEARNERS` on a training frame."""
    enc = FeatureEncoder.fit(train, features)
    X = enc.transform(train)
    y = train.target
    if name == "lasso":
        # fit on a z-scored target so lambda is scale-free, then map back
        y_mu, y_sd = float(y.mean()), float(y.std()) or 1.0
        model = lasso_fit(
            X, (y - y_mu) / y_sd, params.get("lam", 0.01),
            max_iter=params.get("max_iter", 10_000), tol=params.get("tol", 1e-7),
        )
        model.weights = model.weights * y_sd
        model.intercept = model.intercept * y_sd + y_mu
    elif name == "extratrees":
        model = extra_trees_fit(X, y, TreeConfig(seed=seed, **params))
    elif name == "randomforest":
        defaults = {"splitter": "best", "bootstrap": True, "max_features": 0.5}
        model = extra_trees_fit(X, y, TreeConfig(seed=seed, **{**defaults, **params}))
    elif name == "perceptron":
        model = perceptron_fit(X, y, PerceptronConfig(seed=seed, **params))
    else:
        raise ConfigError(f"unknown learner {name!r}; choose from {LEARNERS}")
    return FittedModel(name, model, enc, train.time_range[1])
