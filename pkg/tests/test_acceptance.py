"""End-to-end acceptance criteria on synthetic data.

Each test records a one-line PASS/FAIL verdict (collected in the terminal
summary) and then asserts it.
"""

import json
import warnings
from dataclasses import replace
from fractions import Fraction
from math import ceil

import numpy as np
import pandas as pd
import pytest

from salescast import metrics
from salescast.bayes import (
    PriorSpec,
    SamplerConfig,
    epidemic_peak,
    fit_crisis_weights,
    fit_epidemic,
    fit_hierarchical,
    fit_robust_linear,
    mcmc_sample,
)
from salescast.cli import METADATA, run
from salescast.core import TimeSeriesFrame
from salescast.experiments import stacking_experiment, trend_experiment
from salescast.learners import lasso_fit, mse_loss_and_grad, soft_threshold
from salescast.nn import DenseStack
from salescast.rl import (
    PRICING_AGENT,
    PRICING_PRESETS,
    SUPPLY_AGENT,
    AgentConfig,
    PricingEnv,
    PricingEnvConfig,
    SupplyEnv,
    SupplyEnvConfig,
    Transition,
    dqn_loss_and_grads,
    expected_pricing_rewards,
    train_agent,
)
from salescast.synthdata import ReturnsSpec, generate_demand, generate_logistic_cases, generate_returns
from salescast.trendnet import TrendNetConfig, build_net

from conftest import fd_gradients, make_frame, max_rel_error

pytestmark = pytest.mark.acceptance
SEEDS = range(10)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def test_01_stacking_gain(criterion):
    ok_seeds, detail = 0, []
    for seed in SEEDS:
        r = stacking_experiment(seed)
        gain = r["stack_validation_rmae"] <= r["best_single_validation_rmae"]
        gap = abs(r["stack_out_of_sample_rmae"] - r["stack_validation_rmae"])
        ok_seeds += gain and gap <= 2.0
        detail.append(f"{r['stack_validation_rmae']:.2f}/{r['best_single_validation_rmae']:.2f}/{gap:.2f}")
    ok = criterion(1, "stacking gain", ok_seeds >= 8,
                   f"{ok_seeds}/10 seeds (stack/best-single/oos-gap: {' '.join(detail)})")
    assert ok


def test_02_lasso_correctness(criterion):
    rng = np.random.default_rng(0)
    worst_cf = 0.0
    for lam in (0.0, 0.05, 0.3, 1.0):
        x = rng.normal(size=60) * 1.7
        y = 0.8 * x + rng.normal(size=60)
        cov = np.mean((x - x.mean()) * (y - y.mean()))
        w = lasso_fit(x[:, None], y, lam).weights[0]
        worst_cf = max(worst_cf, abs(w - soft_threshold(cov, lam) / x.var()))
    A = rng.normal(size=(80, 5))
    Q, _ = np.linalg.qr(A - A.mean(0))
    X = Q * np.sqrt(80)
    y = X @ rng.normal(size=5) + 2 + rng.normal(0, 0.2, 80)
    D = np.column_stack([np.ones(80), X])
    ols = np.linalg.solve(D.T @ D, D.T @ y)
    m = lasso_fit(X, y, 0.0, tol=1e-12)
    worst_ols = max(np.abs(m.weights - ols[1:]).max(), abs(m.intercept - ols[0]))
    worst_kkt = 0.0
    for _ in range(50):
        n, p = int(rng.integers(20, 80)), int(rng.integers(2, 10))
        X = rng.normal(size=(n, p))
        X = (X - X.mean(0)) / X.std(0)
        y = X @ (rng.normal(size=p) * rng.integers(0, 2, p)) + rng.normal(size=n)
        lam = float(rng.uniform(0.01, 0.5))
        fit = lasso_fit(X, y, lam, tol=1e-12)
        g = X.T @ (y - fit.predict(X)) / n
        z = fit.weights == 0
        viol = np.concatenate([np.maximum(np.abs(g[z]) - lam, 0),
                               np.abs(g[~z] - lam * np.sign(fit.weights[~z]))])
        worst_kkt = max(worst_kkt, float(viol.max(initial=0.0)))
    ok = criterion(2, "lasso correctness", worst_cf < 1e-8 and worst_ols < 1e-8 and worst_kkt < 1e-6,
                   f"closed-form {worst_cf:.1e}, OLS {worst_ols:.1e}, KKT {worst_kkt:.1e}")
    assert ok


def test_03_mcmc_engine(criterion):
    s = mcmc_sample(lambda x: -0.5 * float(x @ x), [0.5, -0.5], n_draws=20_000, burn_in=3000,
                    seed=11, n_chains=4)
    mean_err = np.abs(s.draws.mean(0)).max()
    sd_err = np.abs(s.draws.std(0) - 1).max()
    corr = abs(np.corrcoef(s.draws.T)[0, 1])
    ok = criterion(3, "MCMC engine", s.n_draws == 80_000 and mean_err < 0.05 and sd_err < 0.05
                   and corr < 0.05,
                   f"mean err {mean_err:.3f}, sd err {sd_err:.3f}, corr {corr:.3f}, "
                   f"acceptance {s.acceptance_rate:.2f}")
    assert ok


def test_04_robust_regression(criterion):
    cfg = SamplerConfig(n_draws=2000, burn_in=1500, n_chains=1)
    wins = 0
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        x = rng.normal(size=200)
        y = 1.0 + 2.0 * x + rng.normal(0, 0.5, 200)
        bad = rng.choice(200, 20, replace=False)
        y[bad] += rng.choice([-1, 1], 20) * rng.uniform(10, 30, 20)
        ols = np.polyfit(x, y, 1)[0]
        post = fit_robust_linear(x, y, PriorSpec(sd=10), cfg)
        wins += abs(post["beta_0"].mean() - 2) < abs(ols - 2)
    fixed = fit_robust_linear(x, y, PriorSpec(sd=10, fixed_nu=10), cfg)
    nu_const = bool(np.all(fixed["nu"] == 10.0))
    ok = criterion(4, "robust regression", wins >= 9 and nu_const,
                   f"Student-t beats OLS on {wins}/10 seeds; fixed nu constant: {nu_const}")
    assert ok


def _two_store_frame(seed):
    rng = np.random.default_rng(seed)
    parts = []
    for store, n in (("rich", 500), ("poor", 5)):
        dates = pd.date_range("2019-01-01", periods=n, freq="D")
        promo = rng.integers(0, 2, n)
        y = (5000 if store == "rich" else 6000) + 400 * promo + rng.normal(0, 300, n)
        parts.append(pd.DataFrame({"date": dates, "entity": store, "target": y, "promo": promo}))
    return TimeSeriesFrame(pd.concat(parts))


def test_05_hierarchical_dispersion(criterion):
    cfg = SamplerConfig(n_draws=2000, burn_in=1500, n_chains=1)
    ratios = []
    for seed in SEEDS:
        s = fit_hierarchical(_two_store_frame(seed), config=replace(cfg, seed=seed))
        ratios.append(s["alpha_poor"].std() / s["alpha_rich"].std())
    ok = criterion(5, "hierarchical dispersion", all(r > 1 for r in ratios),
                   f"sd(poor)/sd(rich) min {min(ratios):.2f}, max {max(ratios):.2f}")
    assert ok


def test_06_epidemic_fit(criterion):
    cfg = SamplerConfig(n_draws=2000, burn_in=1500, n_chains=1)
    worst, worst_peak, n = 0.0, 0.0, 0
    for alpha in (0.5, 1.0, 2.0):
        for beta, t0 in ((0.5, 9.0), (1.0, 8.0), (1.5, 7.0)):
            t, c = generate_logistic_cases(alpha, beta, t0, n_weeks=20)
            s = fit_epidemic(t, c, config=cfg)
            for name, truth in (("alpha", alpha), ("beta", beta), ("t0", t0)):
                worst = max(worst, abs(s[name].mean() / truth - 1))
            worst_peak = max(worst_peak, abs(epidemic_peak(s)["peak_week"] - t0))
            n += 1
    ok = criterion(6, "epidemic fit", n == 9 and worst < 0.05 and worst_peak <= 1.0,
                   f"max relative error {worst:.2e}, max peak offset {worst_peak:.2f} weeks")
    assert ok


def test_07_trend_correction(criterion):
    wins = 0
    trend_ratios, flat = [], []
    for seed in SEEDS:
        r = trend_experiment(seed, slope=0.003)
        wins += r["rmse_trend"] < r["rmse_plain"]
        trend_ratios.append(r["rmse_trend"] / r["rmse_plain"])
        z = trend_experiment(seed, slope=0.0)
        flat.append((z["rmse_trend"], z["rmse_plain"]))
    flat = np.array(flat)
    ratio = flat[:, 0].mean() / flat[:, 1].mean()
    per_seed = flat[:, 0] / flat[:, 1]
    in_band = bool(np.all((per_seed >= 0.9) & (per_seed <= 1.1)))
    ok = criterion(7, "trend correction", wins >= 8 and 0.9 <= ratio <= 1.1 and in_band,
                   f"trend wins {wins}/10 (median ratio {np.median(trend_ratios):.2f}); "
                   f"zero-trend mean-RMSE ratio {ratio:.3f} (per seed {per_seed.min():.2f}..{per_seed.max():.2f})")
    assert ok


def test_08_gradient_checks(criterion):
    rng = np.random.default_rng(8)
    errs = {"perceptron": 0.0, "trendnet": 0.0, "dqn": 0.0}
    for _ in range(10):
        sizes = [int(rng.integers(1, 5)), *rng.integers(1, 6, int(rng.integers(0, 3))), 1]
        net = DenseStack(sizes, rng)
        for p in net.params:
            p[...] = rng.normal(size=p.shape)
        X, y = rng.normal(size=(7, sizes[0])), rng.normal(size=7)
        _, g = mse_loss_and_grad(net, X, y)
        errs["perceptron"] = max(errs["perceptron"], max_rel_error(
            g, fd_gradients(lambda: mse_loss_and_grad(net, X, y)[0], net.params)))

        f = make_frame(n_days=3, entities=("a", "b", "c"), seed=int(rng.integers(1000)),
                       promo=rng.integers(0, 2, 9).astype(float))
        cfg = TrendNetConfig(embed={"store": int(rng.integers(1, 4))}, onehot=("promo",),
                             input_width=int(rng.integers(2, 7)),
                             main_widths=tuple(rng.integers(1, 5, int(rng.integers(1, 3)))),
                             trend_width=int(rng.integers(1, 5)))
        tn = build_net(f, cfg)
        for p in tn.params:
            p[...] = rng.normal(0, 0.7, p.shape)
        b = tn.encode(f)
        _, g = tn.loss_and_grads(b)
        errs["trendnet"] = max(errs["trendnet"], max_rel_error(
            g, fd_gradients(lambda: tn.loss_and_grads(b)[0], tn.params)))

        d, k = int(rng.integers(1, 6)), int(rng.integers(2, 6))
        q = DenseStack([d, *rng.integers(1, 6, int(rng.integers(0, 3))), k], rng)
        for p in q.params:
            p[...] = rng.normal(size=p.shape)
        tgt = q.copy()
        batch = [Transition(rng.normal(size=d), int(rng.integers(k)), float(rng.normal()),
                            rng.normal(size=d), bool(rng.integers(2))) for _ in range(6)]
        _, g = dqn_loss_and_grads(q, tgt, batch, 0.3)
        errs["dqn"] = max(errs["dqn"], max_rel_error(
            g, fd_gradients(lambda: dqn_loss_and_grads(q, tgt, batch, 0.3)[0], q.params)))
    ok = criterion(8, "gradient checks", max(errs.values()) < 1e-4,
                   ", ".join(f"{k} {v:.1e}" for k, v in errs.items()))
    assert ok


def _greedy_mode(agent, env, rng, episodes=20):
    picks = []
    for _ in range(episodes):
        s, done = env.reset(rng), False
        while not done:
            a = agent.greedy(s)
            picks.append(a)
            s, _, done, _ = env.step(a)
    return int(np.bincount(picks, minlength=env.n_actions).argmax())


def test_09_dqn_pricing(criterion):
    env_cfg = PricingEnvConfig(**PRICING_PRESETS["moderate"])
    best = int(np.argmax(expected_pricing_rewards(env_cfg)))
    hits, freqs = 0, []
    for seed in SEEDS:
        env = PricingEnv(env_cfg)
        cfg = AgentConfig(**{**PRICING_AGENT, "decay_every": "episode", "episodes": 300, "seed": seed})
        agent, log = train_agent(env, cfg)
        start = next(e["episode"] for e in log.episodes if e["epsilon"] < 0.05)
        counts = log.action_counts(env.n_actions, from_episode=start)
        freq = counts[best] / counts.sum()
        freqs.append(freq)
        greedy = _greedy_mode(agent, env, np.random.default_rng(1000 + seed))
        hits += greedy == best and freq > 0.5
    ok = criterion(9, "DQN pricing optimality", hits >= 8,
                   f"{hits}/10 seeds pick oracle action {best}; post-exploration frequency "
                   f"{min(freqs):.2f}..{max(freqs):.2f}")
    assert ok


def test_10_supply_invariants(criterion):
    violations = 0
    improved = 0
    for seed in SEEDS:
        env_cfg = SupplyEnvConfig.from_frame(generate_demand(seed=seed))
        env = SupplyEnv(env_cfg)
        cfg = AgentConfig(**{**SUPPLY_AGENT, "decay_every": "step", "episodes": 30, "seed": seed})
        _, log = train_agent(env, cfg, record_trace=True)
        audit = [r for r in log.trace if r["episode"] < 10] if seed == 0 else []
        for k, r in enumerate(audit):
            avail = r["stock_before"] + r["supply"]
            last = k + 1 == len(audit) or audit[k + 1]["episode"] != r["episode"]
            stop = r["reward"] < env_cfg.stop_reward
            checks = [
                abs(r["stock"] - (avail - r["sales"])) < 1e-12,
                r["stock"] >= 0,
                abs(r["shortage"] - max(0.0, r["demand"] - avail)) < 1e-12,
                r["sales"] <= min(r["demand"], avail) + 1e-12,
                r["stopped"] == stop,
                last == (stop or r["step"] + 1 == env_cfg.episode_length),
            ]
            violations += not all(checks)
        m = log.mean_rewards()
        improved += m[-5:].mean() > m[:5].mean()
    ok = criterion(10, "supply-demand invariants", violations == 0 and improved >= 8,
                   f"{violations} invariant violations in the 10-episode audit; "
                   f"trailing > initial reward on {improved}/10 seeds")
    assert ok


def test_11_var_oracle(criterion):
    rng = np.random.default_rng(11)
    mismatches = 0
    for n in range(1, 1001):
        x = rng.normal(size=n)
        xs = np.sort(x)
        for q in (0.01, 0.05, 0.5, 0.95):
            rank = max(1, ceil(Fraction(str(q)) * n))
            mismatches += metrics.value_at_risk(x, q) != xs[rank - 1]
    ok = criterion(11, "VaR oracle", mismatches == 0, f"{mismatches} mismatches over 4000 cases")
    assert ok


def test_12_crisis_detection(criterion):
    periods = {"long": ("2018-01-01", "2018-06-29"), "short": ("2019-03-01", "2019-03-28")}
    shifts = {k: (*v, -0.02) for k, v in periods.items()}
    good = 0
    for seed in SEEDS:
        r = generate_returns(ReturnsSpec(n_days=900, sd=0.01, shifts=shifts, seed=seed))
        s = fit_crisis_weights(r["date"], r["return"].to_numpy(), periods, PriorSpec(sd=0.5),
                               SamplerConfig(n_draws=2000, burn_in=1500, n_chains=1, seed=seed))
        flagged = all(np.quantile(s[f"w_{k}"], 0.975) < 0 for k in periods)
        wider = s["w_short"].std() > s["w_long"].std()
        good += flagged and wider
    ok = criterion(12, "crisis-weight detection", good == 10, f"{good}/10 seeds")
    assert ok


def test_13_reproducibility(criterion, tmp_path):
    data = tmp_path / "data"
    run(["synth", "--out", str(data / "sales"), "--param", "n_stores=2", "--param", "n_days=120"])
    run(["synth", "--kind", "demand", "--out", str(data / "demand"), "--param", "n_days=200"])
    run(["synth", "--kind", "cases", "--out", str(data / "cases")])
    sales = str(data / "sales" / "data.csv")
    commands = {
        "synth": ["synth", "--seed", "4", "--param", "n_days=30"],
        "fit": ["fit", "--model", "randomforest", "--train", sales, "--param", "n_trees=4"],
        "stack": ["stack", "--data", sales, "--boundary", "2015-03-15", "--oos", "2015-04-15",
                  "--models", "lasso,extratrees", "--param", 'extratrees={"n_trees": 4}'],
        "bayes": ["bayes", "--model", "epidemic", "--data", str(data / "cases" / "cases.csv"),
                  "--draws", "400", "--burn-in", "400", "--chains", "2"],
        "trendnet": ["trendnet", "--train", sales, "--valid", sales, "--epochs", "3"],
        "rl": ["rl", "--env", "supply", "--demand", str(data / "demand" / "demand.csv"),
               "--episodes", "2"],
    }
    commands["report"] = ["report", "--run", str(tmp_path / "rl" / "a")]
    differing = []
    for name, argv in commands.items():
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        for out in (a, b):
            assert run([*argv, "--out", str(out)]) == 0
        assert sorted(p.name for p in a.iterdir()) == sorted(p.name for p in b.iterdir())
        for f in sorted(a.iterdir()):
            x, y = f.read_bytes(), (b / f.name).read_bytes()
            if f.name == METADATA:
                x, y = (json.loads(v) for v in (x, y))
                x.pop("timestamp"), y.pop("timestamp")
            if x != y:
                differing.append(f"{name}/{f.name}")
    ok = criterion(13, "reproducibility", not differing,
                   f"{len(commands)} commands rerun; differing files: {differing or 'none'}")
    assert ok
