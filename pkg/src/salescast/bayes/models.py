"""Bayesian regression models sampled with :func:`mcmc_sample`.

Each model is a small class exposing an unconstrained parameter vector, a log
posterior over it, and a map from raw draws to reported parameters.  Scale
parameters are sampled on the log scale (with the Jacobian term) and reported
on the natural scale.  Every Gaussian/Student-t scale carries a tiny floor,
``1e-4 * std(target)``, so that exactly noiseless data still yields a proper
posterior.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.special import gammaln

from ..core import TimeSeriesFrame, zscore_fit_arrays
from ..errors import ConfigError, DataError
from .mcmc import PosteriorSamples, mcmc_sample

LOG_2PI = np.log(2 * np.pi)
WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


@dataclass
class PriorSpec:
    """Independent Gaussian priors, ``N(mean, sd)`` unless overridden per name.

    Scale parameters (``sigma``) use the same Gaussian truncated to positive
    values.  ``constraint`` restricts regression slopes to ``"nonneg"`` or
    ``"nonpos"``; ``fixed_nu`` pins the Student-t degrees of freedom.
    """

    mean: float = 0.0
    sd: float = 1.0
    overrides: dict = field(default_factory=dict)
    constraint: str | None = None
    fixed_nu: float | None = None
    nu_shape: float = 2.0  # Gamma prior on nu when it is sampled
    nu_rate: float = 0.1

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigError("prior sd must be positive")
        for k, (m, s) in self.overrides.items():
            if not s > 0:
                raise ConfigError(f"prior sd for {k!r} must be positive")
        if self.constraint not in (None, "nonneg", "nonpos"):
            raise ConfigError(f"unknown constraint {self.constraint!r}")
        if self.fixed_nu is not None and not self.fixed_nu > 0:
            raise ConfigError("fixed_nu must be positive")

    def get(self, name):
        return self.overrides.get(name, (self.mean, self.sd))

    def with_defaults(self, defaults: dict) -> "PriorSpec":
        """Copy with ``defaults`` filled in for names the caller did not set."""
        merged = {**defaults, **self.overrides}
        return PriorSpec(
            self.mean, self.sd, merged, self.constraint, self.fixed_nu, self.nu_shape, self.nu_rate
        )


def normal_logpdf(x, m, s):
    z = (x - m) / s
    return -0.5 * (LOG_2PI + z * z) - np.log(s)


def student_t_logpdf(x, nu, mu, sigma):
    z = (x - mu) / sigma
    return (
        gammaln(0.5 * (nu + 1))
        - gammaln(0.5 * nu)
        - 0.5 * np.log(nu * np.pi)
        - np.log(sigma)
        - 0.5 * (nu + 1) * np.log1p(z * z / nu)
    )


def _scale_floor(y):
    y = np.asarray(y, dtype=float)
    s = float(y.std()) if y.size > 1 else 0.0
    return 1e-4 * (s if s > 0 else 1.0)


class _Model:
    raw_names: list
    out_names: list

    def log_post(self, theta) -> float:
        raise NotImplementedError

    def to_output(self, raw: np.ndarray) -> np.ndarray:
        return raw

    def initial_points(self) -> list:
        raise NotImplementedError

    # shared prior helpers
    def _lp_normal(self, name, x):
        m, s = self.prior.get(name)
        return normal_logpdf(x, m, s)

    def _lp_log_scale(self, name, log_s):
        # truncated-normal prior on s = exp(log_s) plus Jacobian
        m, s = self.prior.get(name)
        return normal_logpdf(np.exp(log_s), m, s) + log_s

    def _lp_log_nu(self, log_nu):
        nu = np.exp(log_nu)
        a, b = self.prior.nu_shape, self.prior.nu_rate
        return (a - 1) * log_nu - b * nu + log_nu


def _map_estimate(model: _Model):
    def nlp(th):
        v = model.log_post(th)
        return -v if np.isfinite(v) else 1e300

    best = None
    for x0 in model.initial_points():
        x0 = np.asarray(x0, dtype=float)
        if not np.isfinite(model.log_post(x0)):
            continue
        res = optimize.minimize(nlp, x0, method="BFGS", options={"maxiter": 2000, "gtol": 1e-8})
        x = res.x if np.isfinite(model.log_post(res.x)) else x0
        if nlp(x) > nlp(x0):
            x = x0
        if best is None or nlp(x) < nlp(best):
            best = x
    if best is None:
        raise ConfigError("no feasible starting point for the log posterior")
    return best


def _laplace_cov(model: _Model, x):
    """Inverse finite-difference Hessian of -log posterior at ``x``."""
    d = x.size
    h = 1e-4 * np.maximum(1.0, np.abs(x))
    f0 = model.log_post(x)
    H = np.empty((d, d))
    try:
        for i in range(d):
            for j in range(i, d):
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i] = h[i]
                ej[j] = h[j]
                if i == j:
                    v = (model.log_post(x + ei) - 2 * f0 + model.log_post(x - ei)) / h[i] ** 2
                else:
                    v = (
                        model.log_post(x + ei + ej)
                        - model.log_post(x + ei - ej)
                        - model.log_post(x - ei + ej)
                        + model.log_post(x - ei - ej)
                    ) / (4 * h[i] * h[j])
                H[i, j] = H[j, i] = -v
        if not np.isfinite(H).all():
            raise np.linalg.LinAlgError
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        if w.min() <= 0:
            raise np.linalg.LinAlgError
        return (V / w) @ V.T
    except np.linalg.LinAlgError:
        return np.diag((0.05 * np.maximum(np.abs(x), 0.1)) ** 2)


@dataclass
class SamplerConfig:
    n_draws: int = 4000
    burn_in: int = 3000
    n_chains: int = 2
    seed: int = 0


def _sample(model: _Model, config: SamplerConfig | None, init=None, meta=None) -> PosteriorSamples:
    cfg = config or SamplerConfig()
    if init is None:
        x = _map_estimate(model)
    else:
        x = np.asarray(init, dtype=float)
        if not np.isfinite(model.log_post(x)):
            raise ConfigError("supplied init violates the model constraints")
    cov = _laplace_cov(model, x)
    raw = mcmc_sample(
        model.log_post, x, n_draws=cfg.n_draws, burn_in=cfg.burn_in, seed=cfg.seed,
        proposal_cov=cov, n_chains=cfg.n_chains, names=model.raw_names,
    )
    return PosteriorSamples(
        list(model.out_names), model.to_output(raw.draws), raw.acceptance_rate, cfg.seed,
        raw.chain, dict(meta or {}),
    )


# ---------------------------------------------------------------------------
# Robust (Student-t) linear regression


class RobustLinear(_Model):
    """``y ~ Student_t(nu, alpha + X beta, sigma)``."""

    def __init__(self, X, y, prior: PriorSpec, names=None):
        self.X = np.asarray(X, dtype=float).reshape(len(y), -1) if len(y) else np.asarray(X, float)
        self.y = np.asarray(y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise DataError(f"X shape {self.X.shape} incompatible with y of length {self.y.size}")
        self.k = self.X.shape[1]
        self.prior = prior
        self.beta_names = list(names) if names is not None else [f"beta_{i}" for i in range(self.k)]
        if len(self.beta_names) != self.k:
            raise ConfigError("need one name per column of X")
        self.fixed_nu = prior.fixed_nu
        self.floor = _scale_floor(self.y)
        self.raw_names = ["alpha", *self.beta_names, "log_sigma"]
        if self.fixed_nu is None:
            self.raw_names.append("log_nu")
        self.out_names = ["alpha", *self.beta_names, "sigma", "nu"]

    def _beta_ok(self, beta):
        c = self.prior.constraint
        if c == "nonneg":
            return bool((beta >= 0).all())
        if c == "nonpos":
            return bool((beta <= 0).all())
        return True

    def log_post(self, th):
        alpha, beta = th[0], th[1 : 1 + self.k]
        if not self._beta_ok(beta):
            return -np.inf
        ls = th[1 + self.k]
        nu = self.fixed_nu if self.fixed_nu is not None else np.exp(th[2 + self.k])
        sigma = self.floor + np.exp(ls)
        lp = self._lp_normal("alpha", alpha) + self._lp_log_scale("sigma", ls)
        for name, b in zip(self.beta_names, beta):
            lp += self._lp_normal(name, b)
        if self.fixed_nu is None:
            lp += self._lp_log_nu(th[2 + self.k])
        if self.y.size:
            mu = alpha + self.X @ beta
            lp += student_t_logpdf(self.y, nu, mu, sigma).sum()
        return float(lp)

    def to_output(self, raw):
        k = self.k
        sigma = self.floor + np.exp(raw[:, 1 + k])
        nu = np.full(raw.shape[0], float(self.fixed_nu)) if self.fixed_nu is not None else np.exp(raw[:, 2 + k])
        return np.column_stack([raw[:, : 1 + k], sigma, nu])

    def initial_points(self):
        n, k = self.X.shape
        if n > k + 1:
            A = np.column_stack([np.ones(n), self.X])
            coef, *_ = np.linalg.lstsq(A, self.y, rcond=None)
            resid = self.y - A @ coef
            s = max(float(resid.std()), 10 * self.floor)
        else:
            coef = np.zeros(k + 1)
            s = 1.0
        beta = coef[1:]
        if self.prior.constraint == "nonneg":
            beta = np.maximum(beta, 1e-3)
        elif self.prior.constraint == "nonpos":
            beta = np.minimum(beta, -1e-3)
        base = [coef[0], *beta, np.log(s)]
        pts = []
        for log_nu in ([] if self.fixed_nu is not None else [np.log(5.0), np.log(30.0)]) or [None]:
            pts.append(base + ([] if log_nu is None else [log_nu]))
        return pts


def fit_robust_linear(
    X, y, prior: PriorSpec | None = None, config: SamplerConfig | None = None,
    names=None, init=None, standardize=False,
) -> PosteriorSamples:
    """Student-t regression ``mu = alpha + sum_i beta_i x_i``.

    With ``standardize=True`` the columns of ``X`` and ``y`` are z-scored first
    (population std); the statistics are recorded in ``samples.meta`` and the
    coefficients are reported in standardized units.
    """
    prior = prior or PriorSpec()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    meta = {"model": "robust_linear"}
    if standardize and y.size:
        cols = {f"x{i}": X[:, i] for i in range(X.shape[1])}
        xs = zscore_fit_arrays(cols)
        ys = zscore_fit_arrays({"y": y})
        X = np.column_stack([xs.transform(f"x{i}", X[:, i]) for i in range(X.shape[1])])
        y = ys.transform("y", y)
        meta.update(x_stats=xs.to_dict(), y_stats=ys.to_dict())
    model = RobustLinear(X, y, prior, names)
    meta["floor"] = model.floor
    return _sample(model, config, init, meta)


def predict_linear(samples: PosteriorSamples, X, names=None, noise=False, seed=0):
    """Posterior (predictive) draws of ``alpha + X beta``; shape ``(n_draws, n_rows)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    names = names or [n for n in samples.names if n not in ("alpha", "sigma", "nu")]
    B = np.column_stack([samples[n] for n in names])
    mu = samples["alpha"][:, None] + B @ X.T
    if noise:
        rng = np.random.default_rng(seed)
        t = rng.standard_t(samples["nu"][:, None], size=mu.shape)
        mu = mu + samples["sigma"][:, None] * t
    return mu


# ---------------------------------------------------------------------------
# Logistic trend on log-sales


def _time_unit(dates, t_min, t_span):
    d = np.asarray(dates, dtype="datetime64[D]").astype(np.int64)
    return (d - t_min) / t_span


class LogisticTrend(_Model):
    """``log(Sales) ~ N(a/(1+exp(b t + c)) + b_promo promo + b_time t + sum_j b_wd_j wd_j, sigma)``."""

    def __init__(self, y, t, promo=None, weekday=None, time_term=True, prior=None):
        self.y = np.asarray(y, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.cols, self.col_names = [], []
        if promo is not None:
            self.cols.append(np.asarray(promo, float))
            self.col_names.append("beta_promo")
        if time_term:
            self.cols.append(self.t)
            self.col_names.append("beta_time")
        if weekday is not None:
            wd = np.asarray(weekday, int)
            for j, name in enumerate(WEEKDAYS):
                self.cols.append((wd == j).astype(float))
                self.col_names.append(f"beta_wd_{name}")
        self.Z = np.column_stack(self.cols) if self.cols else np.zeros((self.y.size, 0))
        top = float(np.abs(self.y).max()) if self.y.size else 1.0
        self.prior = (prior or PriorSpec()).with_defaults(
            {"a": (0.0, 2 * top + 1), "b": (0.0, 20.0), "c": (0.0, 20.0), "sigma": (0.0, top + 1)}
        )
        self.floor = _scale_floor(self.y)
        self.raw_names = ["a", "b", "c", *self.col_names, "log_sigma"]
        self.out_names = ["a", "b", "c", *self.col_names, "sigma"]

    def mean(self, th, t=None, Z=None):
        t = self.t if t is None else t
        Z = self.Z if Z is None else Z
        a, b, c = th[0], th[1], th[2]
        z = np.clip(b * t + c, -500, 500)
        return a / (1 + np.exp(z)) + Z @ th[3 : 3 + Z.shape[1]]

    def log_post(self, th):
        lp = self._lp_normal("a", th[0]) + self._lp_normal("b", th[1]) + self._lp_normal("c", th[2])
        for name, v in zip(self.col_names, th[3:-1]):
            lp += self._lp_normal(name, v)
        ls = th[-1]
        lp += self._lp_log_scale("sigma", ls)
        sigma = self.floor + np.exp(ls)
        lp += normal_logpdf(self.y, self.mean(th), sigma).sum()
        return float(lp)

    def to_output(self, raw):
        out = raw.copy()
        out[:, -1] = self.floor + np.exp(raw[:, -1])
        return out

    def initial_points(self):
        top = float(self.y.max())
        k = self.Z.shape[1]
        pts = []
        for b in (-10.0, -3.0, 3.0, 10.0):
            c = -b / 2  # midpoint inside the window
            pts.append([top * 1.05, b, c, *np.zeros(k), np.log(max(self.y.std(), 1e-3))])
        return pts


def _design_for_logistic(frame: TimeSeriesFrame, promo, weekday):
    df = frame.to_pandas()
    p = df["promo"].to_numpy(float) if promo and "promo" in df.columns else None
    wd = df["date"].dt.weekday.to_numpy() if weekday else None
    return p, wd


def fit_logistic_trend(
    frame: TimeSeriesFrame, prior: PriorSpec | None = None, config: SamplerConfig | None = None,
    promo=True, weekday=True, time_term=True,
) -> PosteriorSamples:
    """Fit the logistic-trend model to one series (entities are pooled by date order).

    Time is mapped to ``(day - first_day) / (last_day - first_day)`` on the fit
    window; later dates extrapolate beyond 1.
    """
    y = frame.target
    if (y <= 0).any():
        raise DataError("logistic trend model needs strictly positive sales (log taken)")
    days = frame.dates.astype(np.int64)
    t_min = int(days.min())
    t_span = max(int(days.max()) - t_min, 1)
    t = (days - t_min) / t_span
    p, wd = _design_for_logistic(frame, promo, weekday)
    model = LogisticTrend(np.log(y), t, p, wd, time_term, prior)
    meta = {
        "model": "logistic_trend",
        "t_min": str(np.datetime64(t_min, "D")),
        "t_span_days": t_span,
        "promo": p is not None,
        "weekday": wd is not None,
        "time_term": bool(time_term),
    }
    return _sample(model, config, meta=meta)


def predict_logistic_trend(samples: PosteriorSamples, frame: TimeSeriesFrame, q=0.05, seed=0):
    """Posterior-predictive mean and lower ``q`` quantile (VaR) of sales per row."""
    meta = samples.meta
    t = _time_unit(frame.dates, np.datetime64(meta["t_min"], "D").astype(np.int64), meta["t_span_days"])
    p, wd = _design_for_logistic(frame, meta["promo"], meta["weekday"])
    cols = []
    if meta["promo"]:
        cols.append(p)
    if meta["time_term"]:
        cols.append(t)
    if meta["weekday"]:
        cols.extend((wd == j).astype(float) for j in range(7))
    Z = np.column_stack(cols) if cols else np.zeros((len(frame), 0))
    th = samples.draws
    a, b, c = th[:, :1], th[:, 1:2], th[:, 2:3]
    k = Z.shape[1]
    mu = a / (1 + np.exp(np.clip(b * t[None, :] + c, -500, 500))) + th[:, 3 : 3 + k] @ Z.T
    rng = np.random.default_rng(seed)
    logy = mu + samples["sigma"][:, None] * rng.standard_normal(mu.shape)
    sales = np.exp(logy)
    from ..metrics import value_at_risk

    var = np.array([value_at_risk(sales[:, i], q) for i in range(sales.shape[1])])
    return pd.DataFrame(
        {
            "date": frame.dates.astype(str),
            "entity": frame.entity,
            "mean": sales.mean(axis=0),
            f"var{int(round(q * 100))}": var,
            "trend": np.exp(mu).mean(axis=0),
        }
    )


# ---------------------------------------------------------------------------
# Hierarchical (per-store) intercepts


class HierarchicalIntercept(_Model):
    """``Sales ~ N(alpha[store] + b_promo promo + b_time t + sum_j b_wd_j wd_j, sigma)``."""

    def __init__(self, y, store_idx, stores, Z, col_names, prior):
        self.y = np.asarray(y, float)
        self.store_idx = np.asarray(store_idx, int)
        self.stores = list(stores)
        self.Z = Z
        self.col_names = list(col_names)
        self.prior = prior
        self.floor = _scale_floor(self.y)
        self.S = len(self.stores)
        alpha_names = [f"alpha_{s}" for s in self.stores]
        self.raw_names = [*alpha_names, *self.col_names, "log_sigma"]
        self.out_names = [*alpha_names, *self.col_names, "sigma"]

    def log_post(self, th):
        S = self.S
        alpha, beta, ls = th[:S], th[S:-1], th[-1]
        lp = 0.0
        for name, v in zip(self.raw_names[:-1], th[:-1]):
            lp += self._lp_normal(name, v)
        lp += self._lp_log_scale("sigma", ls)
        mu = alpha[self.store_idx] + self.Z @ beta
        lp += normal_logpdf(self.y, mu, self.floor + np.exp(ls)).sum()
        return float(lp)

    def to_output(self, raw):
        out = raw.copy()
        out[:, -1] = self.floor + np.exp(raw[:, -1])
        return out

    def initial_points(self):
        # ridge solution = posterior mode for fixed sigma under the N(m, s) priors
        n = self.y.size
        A = np.column_stack([np.eye(self.S)[self.store_idx], self.Z])
        m = np.array([self.prior.get(nm)[0] for nm in self.raw_names[:-1]])
        s = np.array([self.prior.get(nm)[1] for nm in self.raw_names[:-1]])
        sig = max(float(self.y.std()), 1e-3) * 0.5
        P = np.diag(sig**2 / s**2)
        coef = np.linalg.solve(A.T @ A + P, A.T @ self.y + P @ m)
        resid = self.y - A @ coef
        ls = np.log(max(float(resid.std()), 10 * self.floor)) if n > 1 else 0.0
        return [[*coef, ls]]


def fit_hierarchical(
    frame: TimeSeriesFrame, prior: PriorSpec | None = None, config: SamplerConfig | None = None,
    stores=None, promo=True, weekday=True, time_term=True,
) -> PosteriorSamples:
    """Shared slopes, one intercept per store.

    Sales are z-scored over the fit frame and time is mapped to [0, 1]; the
    intercepts are reported in standardized sales units (stats in ``meta``).
    Shared covariates are centred on their fit-frame means.  Without this the
    seven weekday dummies sum to the intercept column and every ``alpha``
    inherits the same prior-limited spread; centred, ``alpha`` is the store's
    mean level and its sd reflects that store's own data.
    Listed ``stores`` without rows are dropped with a warning.
    """
    stores = list(frame.entities) if stores is None else [str(s) for s in stores]
    present = set(frame.entities)
    empty = [s for s in stores if s not in present]
    if empty:
        warnings.warn(f"stores without rows excluded: {empty}", stacklevel=2)
    stores = [s for s in stores if s in present]
    if len(stores) < 2:
        raise DataError("hierarchical model needs at least two stores with data")
    frame = frame.select(np.isin(frame.entity, stores))
    df = frame.to_pandas()
    ys = zscore_fit_arrays({"target": frame.target})
    y = ys.transform("target", frame.target)
    days = frame.dates.astype(np.int64)
    t = (days - days.min()) / max(days.max() - days.min(), 1)
    cols, names = [], []
    if promo and "promo" in df.columns:
        cols.append(df["promo"].to_numpy(float))
        names.append("beta_promo")
    if time_term:
        cols.append(t)
        names.append("beta_time")
    if weekday:
        wd = df["date"].dt.weekday.to_numpy()
        for j, nm in enumerate(WEEKDAYS):
            cols.append((wd == j).astype(float))
            names.append(f"beta_wd_{nm}")
    Z = np.column_stack(cols) if cols else np.zeros((len(y), 0))
    z_mean = Z.mean(axis=0)
    Z = Z - z_mean
    idx = np.array([stores.index(e) for e in frame.entity])
    model = HierarchicalIntercept(y, idx, stores, Z, names, prior or PriorSpec())
    meta = {
        "model": "hierarchical",
        "stores": stores,
        "rows_per_store": {s: int((idx == i).sum()) for i, s in enumerate(stores)},
        "y_stats": ys.to_dict(),
        "covariate_means": dict(zip(names, z_mean.tolist())),
    }
    return _sample(model, config, meta=meta)


# ---------------------------------------------------------------------------
# Epidemic logistic curve

CASE_SCALE = 1e5


class EpidemicLogistic(_Model):
    """``n ~ N(alpha / (1 + exp(-beta (t - t0))) * 1e5, sigma)`` with t in weeks.

    The likelihood is evaluated on ``n / 1e5``; ``sigma`` is reported in cases.
    """

    def __init__(self, t, cases, prior):
        self.t = np.asarray(t, float)
        self.y = np.asarray(cases, float) / CASE_SCALE
        top = float(self.y.max()) if self.y.size else 1.0
        span = float(self.t.max() - self.t.min()) if self.t.size else 1.0
        self.prior = (prior or PriorSpec()).with_defaults(
            {
                "alpha": (0.0, 10 * top + 1),
                "beta": (0.0, 5.0),
                "t0": (float(self.t.mean()) if self.t.size else 0.0, 2 * span + 1),
                "sigma": (0.0, top + 1e-3),
            }
        )
        self.floor = _scale_floor(self.y)
        self.raw_names = ["alpha", "beta", "t0", "log_sigma"]
        self.out_names = ["alpha", "beta", "t0", "sigma"]

    @staticmethod
    def curve(t, alpha, beta, t0):
        return alpha / (1 + np.exp(np.clip(-beta * (t - t0), -500, 500)))

    def log_post(self, th):
        alpha, beta, t0, ls = th
        lp = (
            self._lp_normal("alpha", alpha)
            + self._lp_normal("beta", beta)
            + self._lp_normal("t0", t0)
            + self._lp_log_scale("sigma", ls)
        )
        mu = self.curve(self.t, alpha, beta, t0)
        lp += normal_logpdf(self.y, mu, self.floor + np.exp(ls)).sum()
        return float(lp)

    def to_output(self, raw):
        out = raw.copy()
        out[:, 3] = (self.floor + np.exp(raw[:, 3])) * CASE_SCALE
        return out

    def initial_points(self):
        top = float(self.y.max())
        inc = np.diff(self.y)
        t_peak = float(self.t[1:][np.argmax(inc)]) if inc.size else float(self.t.mean())
        pts = []
        for beta in (0.5, 1.0, 2.0):
            for alpha in (top * 1.05, top * 2.0):
                # least squares on the curve gives a good start for the MAP search
                def res(p):
                    return self.curve(self.t, *p) - self.y

                fit = optimize.least_squares(res, [alpha, beta, t_peak])
                s = max(float(np.std(fit.fun)), 10 * self.floor)
                pts.append([*fit.x, np.log(s)])
        return pts


def fit_epidemic(t, cases, prior: PriorSpec | None = None, config: SamplerConfig | None = None):
    """Posterior over ``(alpha, beta, t0, sigma)`` for a cumulative case series."""
    t = np.asarray(t, float)
    cases = np.asarray(cases, float)
    if t.shape != cases.shape or t.size < 4:
        raise DataError("need matching t and cases arrays with at least 4 points")
    if (cases < 0).any():
        raise DataError("case counts must be non-negative")
    if (np.diff(cases) < 0).any():
        raise DataError("cumulative case series must be non-decreasing")
    model = EpidemicLogistic(t, cases, prior)
    return _sample(model, config, meta={"model": "epidemic", "case_scale": CASE_SCALE})


def epidemic_peak(samples: PosteriorSamples, start_date=None, grid_step=0.01) -> dict:
    """Week of maximum daily growth of the posterior-mean curve, plus the t0 posterior.

    For the logistic curve the growth rate peaks at ``t0`` (the "half time").
    """
    a, b, t0 = samples["alpha"], samples["beta"], samples["t0"]
    lo, hi = float(np.min(t0)) - 5, float(np.max(t0)) + 5
    grid = np.arange(lo, hi, grid_step)
    curve = np.mean(
        [EpidemicLogistic.curve(grid, ai, bi, ti) for ai, bi, ti in zip(a[::10], b[::10], t0[::10])],
        axis=0,
    )
    peak = float(grid[1:][np.argmax(np.diff(curve))])
    out = {
        "peak_week": peak,
        "t0_mean": float(t0.mean()),
        "t0_q05": float(np.quantile(t0, 0.05)),
        "t0_q95": float(np.quantile(t0, 0.95)),
    }
    if start_date is not None:
        out["peak_date"] = str(
            (pd.Timestamp(start_date) + pd.Timedelta(days=round(peak * 7))).date()
        )
    return out


# ---------------------------------------------------------------------------
# Crisis dummies on returns

DEFAULT_CRISES = {
    "crisis_2008": ("2008-01-01", "2009-01-31"),
    "down_turn_2018": ("2018-10-01", "2019-01-03"),
    "coronavirus": ("2020-02-18", "2020-03-25"),
}


def crisis_dummies(dates, periods: dict):
    d = pd.to_datetime(pd.Series(dates)).dt.normalize()
    cols = {}
    for name, (lo, hi) in periods.items():
        m = ((d >= pd.Timestamp(lo)) & (d <= pd.Timestamp(hi))).to_numpy(float)
        if m.sum() == 0:
            raise DataError(f"crisis period {name!r} [{lo}, {hi}] has no data rows")
        cols[name] = m
    return cols


def fit_crisis_weights(
    dates, returns, periods: dict | None = None, prior: PriorSpec | None = None,
    config: SamplerConfig | None = None,
) -> PosteriorSamples:
    """Student-t regression of daily returns on one 0/1 dummy per crisis window.

    Windows may overlap.  Parameters are ``alpha``, ``w_<name>``, ``sigma``, ``nu``.
    """
    periods = DEFAULT_CRISES if periods is None else periods
    returns = np.asarray(returns, float)
    cols = crisis_dummies(dates, periods)
    X = np.column_stack(list(cols.values()))
    names = [f"w_{n}" for n in cols]
    model = RobustLinear(X, returns, prior or PriorSpec(), names)
    return _sample(model, config, meta={"model": "crisis", "periods": {k: list(v) for k, v in periods.items()}})
