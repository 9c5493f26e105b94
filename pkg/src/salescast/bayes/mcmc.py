"""Adaptive random-walk Metropolis sampler and the posterior container."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .. import metrics
from ..errors import ConfigError, DataError, NumericalError

SUMMARY_QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.99)


@dataclass
class PosteriorSamples:
    """MCMC draws, one column per parameter, chains stacked row-wise."""

    names: list
    draws: np.ndarray
    acceptance_rate: float
    seed: int
    chain: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.draws.shape[1] != len(self.names):
            raise DataError("draws must have one column per parameter name")
        if self.draws.shape[0] < 1:
            raise DataError("posterior needs at least one draw")
        if not np.isfinite(self.draws).all():
            raise NumericalError("posterior draws contain non-finite values")

    def __getitem__(self, name) -> np.ndarray:
        try:
            return self.draws[:, self.names.index(name)]
        except ValueError:
            raise ConfigError(f"unknown parameter {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self.names

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.draws, columns=self.names)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.10g")

    @classmethod
    def from_csv(cls, path, acceptance_rate=float("nan"), seed=-1) -> "PosteriorSamples":
        df = pd.read_csv(path)
        return cls(list(df.columns), df.to_numpy(dtype=float), acceptance_rate, seed)


def summarize(samples: PosteriorSamples, min_draws: int = 100) -> dict:
    """Per-parameter mean, sd, lower empirical quantiles and |cv|.

    ``cv`` is ``None`` when the posterior mean is exactly zero.
    """
    if samples.n_draws < min_draws:
        raise DataError(f"summarize needs at least {min_draws} draws, got {samples.n_draws}")
    out = {}
    for i, name in enumerate(samples.names):
        d = samples.draws[:, i]
        qs = metrics.quantiles(d, SUMMARY_QUANTILES)
        try:
            cv = metrics.coefficient_of_variation(d)
        except NumericalError:
            cv = None
        out[name] = {
            "mean": float(d.mean()),
            "sd": float(d.std()),
            "quantiles": {str(q): float(v) for q, v in zip(SUMMARY_QUANTILES, qs)},
            "cv": cv,
        }
    return out


def write_summary(samples: PosteriorSamples, path) -> None:
    payload = {
        "n_draws": samples.n_draws,
        "acceptance_rate": samples.acceptance_rate,
        "seed": samples.seed,
        "meta": samples.meta,
        "parameters": summarize(samples),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _safe_cholesky(C):
    C = 0.5 * (C + C.T)
    d = C.shape[0]
    jitter = 1e-12 * max(np.trace(C) / d, 1e-300)
    for _ in range(8):
        try:
            return np.linalg.cholesky(C + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            jitter *= 100
    w, V = np.linalg.eigh(C)
    w = np.maximum(w, 1e-12 * max(w.max(), 1e-300))
    return np.linalg.cholesky((V * w) @ V.T)


def _run_chain(log_posterior, x0, n_draws, burn_in, rng, L0, adapt_every):
    d = x0.size
    target = 0.44 if d == 1 else 0.234
    x = x0.copy()
    lp = log_posterior(x)
    L = L0.copy()
    log_scale = np.log(2.38 / np.sqrt(d))
    hist = np.empty((burn_in, d))
    out = np.empty((n_draws, d))
    accepted = 0
    total = burn_in + n_draws
    Z = rng.standard_normal((total, d))
    logU = np.log(rng.random(total))
    for i in range(total):
        prop = x + np.exp(log_scale) * (L @ Z[i])
        lp_prop = log_posterior(prop)
        if not np.isfinite(lp_prop):
            lp_prop = -np.inf
        log_a = lp_prop - lp
        if logU[i] < log_a:
            x, lp = prop, lp_prop
            if i >= burn_in:
                accepted += 1
        if not np.isfinite(lp):
            raise NumericalError("log posterior became non-finite on an accepted state")
        if i < burn_in:
            a = float(np.exp(min(0.0, log_a))) if np.isfinite(log_a) else 0.0
            log_scale += (a - target) / (i + 1) ** 0.6
            hist[i] = x
            n = i + 1
            if n % adapt_every == 0 and n >= 2 * adapt_every:
                H = hist[n // 2 : n]
                if np.ptp(H, axis=0).min() > 0:
                    C = np.atleast_2d(np.cov(H.T))
                    L = _safe_cholesky(C)
                    log_scale = np.log(2.38 / np.sqrt(d))
        else:
            out[i - burn_in] = x
    return out, accepted / max(n_draws, 1)


def mcmc_sample(
    log_posterior,
    init,
    n_draws: int = 5000,
    burn_in: int = 2000,
    seed: int = 0,
    step_scales=None,
    proposal_cov=None,
    n_chains: int = 1,
    names=None,
    adapt_every: int = 100,
) -> PosteriorSamples:
    """Sample ``log_posterior`` with adaptive random-walk Metropolis.

    During burn-in the proposal covariance is re-estimated from the second
    half of the burn-in history every ``adapt_every`` steps and a global scale
    is tuned toward the optimal acceptance rate (0.234, or 0.44 in 1-D).  Both
    are frozen afterwards, so the retained draws come from a fixed-kernel
    Metropolis chain.  ``n_draws`` is per chain; chains use independent RNG
    streams spawned from ``seed`` and are stacked in order.
    """
    x0 = np.atleast_1d(np.asarray(init, dtype=float))
    d = x0.size
    if n_draws < 1 or burn_in < 0 or n_chains < 1:
        raise ConfigError("n_draws, n_chains must be >= 1 and burn_in >= 0")
    lp0 = log_posterior(x0)
    if not np.isfinite(lp0):
        raise ConfigError("log posterior is not finite at the initial point")
    if proposal_cov is not None:
        L0 = _safe_cholesky(np.atleast_2d(np.asarray(proposal_cov, dtype=float)))
    else:
        s = (
            np.full(d, 0.1)
            if step_scales is None
            else np.broadcast_to(np.asarray(step_scales, float), (d,))
        )
        L0 = np.diag(s)
    names = list(names) if names is not None else [f"theta_{i}" for i in range(d)]
    streams = np.random.SeedSequence(seed).spawn(n_chains)
    chains, rates = [], []
    for c, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        start = x0
        if c > 0:
            # overdispersed start, kept only if feasible
            cand = x0 + L0 @ rng.standard_normal(d)
            if np.isfinite(log_posterior(cand)):
                start = cand
        draws, rate = _run_chain(log_posterior, start, n_draws, burn_in, rng, L0, adapt_every)
        chains.append(draws)
        rates.append(rate)
    rate = float(np.mean(rates))
    if not 0.05 <= rate <= 0.95:
        warnings.warn(f"MCMC acceptance rate {rate:.3f} outside [0.05, 0.95]", stacklevel=2)
    chain_id = np.repeat(np.arange(n_chains), n_draws)
    return PosteriorSamples(names, np.concatenate(chains), rate, seed, chain_id)
