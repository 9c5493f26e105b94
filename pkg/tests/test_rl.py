import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from salescast.errors import ConfigError, DataError, NumericalError
from salescast.nn import DenseStack
from salescast.rl import (
    PRICING_PRESETS,
    AgentConfig,
    DQNAgent,
    PricingEnv,
    PricingEnvConfig,
    ReplayBuffer,
    SupplyEnv,
    SupplyEnvConfig,
    Transition,
    dqn_loss_and_grads,
    expected_pricing_rewards,
    f_sales,
    read_demand_csv,
    state_hash,
    train_agent,
)
from salescast.rl.dqn import (
    stack_batch,
    write_action_histogram,
    write_action_log,
    write_episode_log,
    write_supply_trace,
    write_weekday_heatmap,
)
from salescast.synthdata import generate_demand

from conftest import fd_gradients, max_rel_error

# E[demand] * F(p) * p per action, computed independently in exact arithmetic
MODERATE_EXPECTED = [0.0, 0.073437274161, 0.119863590225, 0.20054597214, 0.155018407906,
                  0.110170667848, 0.054548410598, 0.002763179925]
STEEP_EXPECTED = [0.0, 0.074608490573, 0.122127828761, 0.125, 0.008616513716,
                   0.00221855342, 0.000276389318, 2.29427e-07]


def _t(s, a, r, s2, done=False):
    return Transition(np.asarray(s, float), a, r, np.asarray(s2, float), done)


class Bandit:
    """One-step episodes; state is a one-hot of a random context."""

    R = np.array([[1.0, 0.2, -0.5], [0.0, 0.8, 0.3]])
    state_dim, n_actions = 2, 3

    def reset(self, rng):
        self.rng = rng
        self.s = int(rng.integers(2))
        return np.eye(2)[self.s]

    def step(self, a):
        return np.zeros(2), float(self.R[self.s, a]), True, {}


class TestPricingEnv:
    def test_f_sales_oracle(self):
        assert f_sales(0.0, PricingEnvConfig()) == pytest.approx(0.9926084586557181, rel=1e-14)

    @pytest.mark.parametrize("preset,expected", [("moderate", MODERATE_EXPECTED), ("steep", STEEP_EXPECTED)])
    def test_expected_rewards_oracle(self, preset, expected):
        r = expected_pricing_rewards(PricingEnvConfig(**PRICING_PRESETS[preset]))
        np.testing.assert_allclose(r, expected, rtol=1e-9, atol=1e-12)
        assert int(np.argmax(r)) == 3

    def test_monte_carlo_matches_closed_form(self):
        env = PricingEnv()
        rng = np.random.default_rng(0)
        exp = expected_pricing_rewards(env.cfg)
        for a in range(env.n_actions):
            env.reset(rng)
            rs = []
            for _ in range(4000):
                if env.t >= env.cfg.steps:
                    env.reset(rng)
                rs.append(env.step(a)[1])
            assert np.mean(rs) == pytest.approx(exp[a], abs=0.01)

    def test_episode_structure(self):
        env = PricingEnv()
        s = env.reset(np.random.default_rng(1))
        np.testing.assert_array_equal(s, np.eye(8)[0] * 1.0)
        for k in range(7):
            s, r, done, info = env.step(3)
            assert done == (k == 6)
            assert s[-1] == info["demand"] and 0 <= info["demand"] <= 1
        with pytest.raises(ConfigError):
            env.step(8)

    def test_zero_price_earns_nothing(self):
        env = PricingEnv()
        env.reset(np.random.default_rng(5))
        for _ in range(7):
            assert env.step(0)[1] == 0.0

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            PricingEnvConfig(actions=(-0.1, 0.5))
        with pytest.raises(ConfigError):
            PricingEnvConfig(c=np.inf)


def _supply_cfg(n=200, **kw):
    return SupplyEnvConfig.from_frame(generate_demand(n_days=n, seed=0), **kw)


class TestSupplyEnv:
    @given(st.lists(st.integers(0, 6), min_size=1, max_size=60), st.integers(0, 50))
    def test_step_invariants(self, actions, seed):
        cfg = _supply_cfg(episode_length=60)
        env = SupplyEnv(cfg)
        env.reset(np.random.default_rng(seed))
        for a in actions:
            s, r, done, info = env.step(a)
            avail = info["stock_before"] + info["supply"]
            assert info["supply"] == pytest.approx(cfg.actions[a] * 0.05)
            assert 0 <= info["sales"] <= min(info["demand"], avail) + 1e-15
            assert info["stock"] == pytest.approx(avail - info["sales"])
            assert info["shortage"] == pytest.approx(max(0.0, info["demand"] - avail))
            assert r == pytest.approx(info["sales"] - 0.5 * avail)
            assert s[9] == info["stock"] and s[2:9].sum() == 1
            if done:
                break

    def test_stop_rule(self):
        env = SupplyEnv(_supply_cfg(stop_reward=-0.1))
        env.reset(np.random.default_rng(0))
        steps = 0
        while True:
            _, r, done, info = env.step(6)
            steps += 1
            if done:
                break
        assert info["stopped"] and r < -0.1 and steps < 150

    def test_state_uses_previous_demand(self):
        cfg = _supply_cfg()
        env = SupplyEnv(cfg)
        s = env.reset(np.random.default_rng(3))
        i = env.start
        assert s[1] == cfg.demand[i - 1] and s[0] == cfg.promo[i]
        assert 1 <= env.start <= 1 + cfg.max_lag

    def test_validation(self, tmp_path):
        with pytest.raises(DataError, match="too short"):
            _supply_cfg(n=100)
        with pytest.raises(DataError):
            SupplyEnvConfig(demand=-np.ones(200))
        with pytest.raises(ConfigError):
            _supply_cfg(actions=(0, 1.5))
        generate_demand(n_days=200).drop(columns="promo").to_csv(tmp_path / "d.csv", index=False)
        with pytest.raises(DataError):
            read_demand_csv(tmp_path / "d.csv")


class TestReplayBuffer:
    def test_fifo_eviction(self):
        buf = ReplayBuffer(capacity=3)
        for i in range(5):
            buf.add(_t([i], 0, float(i), [i]))
        assert len(buf) == 3
        assert [t.reward for t in buf.items()] == [2.0, 3.0, 4.0]

    def test_uniform_sampling(self):
        buf = ReplayBuffer(capacity=10, seed=1)
        for i in range(10):
            buf.add(_t([i], 0, 0.0, [i]))
        counts = np.bincount(buf.sample_indices(100_000), minlength=10)
        assert stats.chisquare(counts).pvalue > 0.01

    def test_seeded(self):
        a, b = ReplayBuffer(seed=4), ReplayBuffer(seed=4)
        for buf in (a, b):
            for i in range(20):
                buf.add(_t([i], 0, 0.0, [i]))
        np.testing.assert_array_equal(a.sample_indices(50), b.sample_indices(50))

    def test_errors(self):
        with pytest.raises(ConfigError):
            ReplayBuffer(capacity=0)
        with pytest.raises(ConfigError):
            ReplayBuffer().sample(1)
        with pytest.raises(NumericalError):
            ReplayBuffer().add(_t([0], 0, np.nan, [0]))


class TestAgent:
    def test_epsilon_geometric(self):
        agent = DQNAgent(2, 3, AgentConfig(epsilon_decay=0.9, epsilon_min=0.5))
        seen = []
        for _ in range(10):
            agent.decay_epsilon()
            seen.append(agent.epsilon)
        np.testing.assert_allclose(seen, np.maximum(0.9 ** np.arange(1, 11), 0.5))

    def test_epsilon_strictly_decreasing(self):
        agent = DQNAgent(2, 3, AgentConfig(epsilon_decay=0.97))
        seen = [agent.epsilon]
        for _ in range(50):
            agent.decay_epsilon()
            seen.append(agent.epsilon)
        assert np.all(np.diff(seen) < 0)
        np.testing.assert_allclose(seen, 0.97 ** np.arange(51), rtol=1e-12)

    def test_epsilon_one_is_uniform(self):
        agent = DQNAgent(2, 4, AgentConfig(seed=3))
        acts = [agent.act(np.zeros(2), epsilon=1.0) for _ in range(8000)]
        assert stats.chisquare(np.bincount(acts, minlength=4)).pvalue > 1e-3

    def test_ties_pick_lowest_index(self):
        agent = DQNAgent(3, 5)
        agent.net.params[-2][...] = 0.0
        agent.net.params[-1][...] = 1.0
        assert agent.greedy(np.ones(3)) == 0
        assert agent.act(np.ones(3), epsilon=0.0) == 0

    def test_loss_gradient_matches_fd(self):
        rng = np.random.default_rng(0)
        net = DenseStack([3, 4, 2], rng)
        for p in net.params:
            p[...] = rng.normal(size=p.shape)
        target = net.copy()
        batch = [_t(rng.normal(size=3), int(rng.integers(2)), float(rng.normal()),
                    rng.normal(size=3), bool(k % 2)) for k in range(6)]
        _, grads = dqn_loss_and_grads(net, target, batch, 0.7)
        num = fd_gradients(lambda: dqn_loss_and_grads(net, target, batch, 0.7)[0], net.params)
        assert max_rel_error(grads, num) < 1e-4

    def test_bellman_target(self):
        net = DenseStack([1, 2], np.random.default_rng(0))
        net.params[0][...] = 0.0
        net.params[1][...] = [1.0, 3.0]
        batch = stack_batch([_t([0], 0, 2.0, [0]), _t([0], 1, 5.0, [0], done=True)])
        loss, _ = dqn_loss_and_grads(net, net.copy(), batch, 0.5)
        # targets: 2 + 0.5 * 3 = 3.5 and 5 (terminal); Q = 1 and 3
        assert loss == pytest.approx(((1 - 3.5) ** 2 + (3 - 5) ** 2) / 2)

    def test_target_refresh(self):
        agent = DQNAgent(2, 2, AgentConfig(target_period=3, batch_size=2))
        batch = [_t([1, 0], 0, 1.0, [0, 1]), _t([0, 1], 1, -1.0, [1, 0])]
        before = agent.target.params[0].copy()
        agent.update(batch)
        agent.update(batch)
        np.testing.assert_array_equal(agent.target.params[0], before)
        agent.update(batch)
        np.testing.assert_array_equal(agent.target.params[0], agent.net.params[0])

    def test_invalid_config(self):
        for kw in ({"gamma": 1.5}, {"epsilon_decay": 1.0}, {"decay_every": "week"},
                   {"epsilon_min": 0.5, "epsilon": 0.2}):
            with pytest.raises(ConfigError):
                AgentConfig(**kw)


class TestTraining:
    def test_gamma_zero_learns_reward_table(self):
        cfg = AgentConfig(hidden=(), gamma=0.0, episodes=3000, epsilon_decay=0.999,
                          lr=1e-2, batch_size=16, seed=1)
        agent, _ = train_agent(Bandit(), cfg)
        Q = np.stack([agent.q_values(np.eye(2)[s]) for s in range(2)])
        np.testing.assert_allclose(Q, Bandit.R, atol=0.05)
        assert [agent.greedy(np.eye(2)[s]) for s in range(2)] == [0, 1]

    def test_reproducible(self):
        cfg = AgentConfig(episodes=4, seed=7)
        _, a = train_agent(PricingEnv(), cfg)
        _, b = train_agent(PricingEnv(), cfg)
        assert a.actions == b.actions and a.episodes == b.episodes

    @pytest.mark.parametrize("unit", ["step", "episode"])
    def test_logged_epsilon(self, unit):
        cfg = AgentConfig(episodes=5, epsilon_decay=0.9, decay_every=unit)
        _, log = train_agent(PricingEnv(), cfg)
        eps = [e["epsilon"] for e in log.episodes]
        k = 7 * np.arange(1, 6) if unit == "step" else np.arange(5)
        np.testing.assert_allclose(eps, 0.9**k)

    def test_supply_logs(self, tmp_path):
        env = SupplyEnv(_supply_cfg(episode_length=20))
        cfg = AgentConfig(hidden=(8,), episodes=3, seed=2)
        _, log = train_agent(env, cfg, record_trace=True)
        assert len(log.trace) == len(log.actions) == sum(e["steps"] for e in log.episodes)
        H = log.weekday_heatmap(env.n_actions)
        assert H.sum() == len(log.trace)
        assert log.action_counts(env.n_actions).sum() == len(log.actions)
        write_episode_log(log, tmp_path / "e.csv")
        write_action_log(log, tmp_path / "a.csv")
        write_action_histogram(log, env.n_actions, env.cfg.actions, tmp_path / "h.csv")
        write_weekday_heatmap(log, env.n_actions, tmp_path / "w.csv")
        write_supply_trace(log, tmp_path / "t.csv")
        h = pd.read_csv(tmp_path / "h.csv")
        assert h["frequency"].sum() == pytest.approx(1.0)
        a = pd.read_csv(tmp_path / "a.csv", dtype={"state_hash": str})
        assert a["state_hash"].str.len().eq(16).all()
        assert pd.read_csv(tmp_path / "w.csv").shape == (7, 1 + env.n_actions)
        assert len(pd.read_csv(tmp_path / "t.csv")) == len(log.trace)

    def test_state_hash(self):
        assert state_hash([1.0, 2.0]) == state_hash(np.array([1, 2]))
        assert state_hash([1.0, 2.0]) != state_hash([2.0, 1.0])
