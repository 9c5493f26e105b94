import numpy as np
import pandas as pd
import pytest

from salescast.core import TimeSeriesFrame
from salescast.errors import ConfigError, DataError
from salescast.trendnet import (
    TrainingDiverged,
    TrendNet,
    TrendNetConfig,
    build_net,
    permutation_importance,
    train,
    write_telemetry,
)

from conftest import fd_gradients, make_frame, max_rel_error

SMALL = dict(input_width=6, main_widths=(5,), trend_width=4, embed={"store": 2})


def _frame(n_days=30, seed=0, promo_effect=50.0, slope=0.0):
    rng = np.random.default_rng(seed)
    stores = ("a", "b", "c")
    dates = pd.date_range("2021-01-01", periods=n_days, freq="D")
    rows = []
    for k, s in enumerate(stores):
        promo = rng.integers(0, 2, n_days)
        y = 100 + 20 * k + promo_effect * promo + slope * np.arange(n_days) + rng.normal(0, 1, n_days)
        rows.append(pd.DataFrame({"date": dates, "entity": s, "target": y, "promo": promo,
                                  "weekday": dates.weekday}))
    return TimeSeriesFrame(pd.concat(rows), categorical=("weekday",))


def _random_params(net, seed=0):
    rng = np.random.default_rng(seed)
    for p in net.params:
        p[...] = rng.normal(0, 0.5, p.shape)


class TestForward:
    def test_decomposition_identity(self):
        f = _frame()
        net = build_net(f, TrendNetConfig(**SMALL))
        _random_params(net)
        out, _ = net.forward(net.encode(f))
        b = net.encode(f)
        np.testing.assert_array_equal(out["prediction"], out["main_output"] + out["trend_weight"] * b.t)

    def test_ablation_drops_trend(self):
        f = _frame()
        net = build_net(f, TrendNetConfig(**SMALL), with_trend=False)
        _random_params(net)
        out, _ = net.forward(net.encode(f))
        np.testing.assert_array_equal(out["prediction"], out["main_output"])

    def test_t_norm_range(self):
        f = _frame(n_days=11)
        b = build_net(f, TrendNetConfig(**SMALL)).encode(f)
        assert b.t.min() == 0 and b.t.max() == 1
        g = _frame(n_days=21)
        later = g.select(g.dates == g.dates.max())
        assert build_net(f, TrendNetConfig(**SMALL)).encode(later).t[0] == pytest.approx(2.0)

    @pytest.mark.parametrize("with_trend", [True, False])
    def test_gradients_match_fd(self, with_trend):
        f = _frame(n_days=4)
        net = build_net(f, TrendNetConfig(**SMALL, dropout=0.0), with_trend)
        _random_params(net, 3)
        b = net.encode(f)
        _, grads = net.loss_and_grads(b)
        num = fd_gradients(lambda: net.loss_and_grads(b)[0], net.params)
        assert len(grads) == len(net.params)
        assert max_rel_error(grads, num) < 1e-4

    def test_dropout_gradients_with_fixed_mask(self):
        f = _frame(n_days=4)
        net = build_net(f, TrendNetConfig(**SMALL, dropout=0.2))
        _random_params(net, 4)
        b = net.encode(f)

        def loss():
            return net.loss_and_grads(b, train=True, rng=np.random.default_rng(9))[0]

        _, grads = net.loss_and_grads(b, train=True, rng=np.random.default_rng(9))
        assert max_rel_error(grads, fd_gradients(loss, net.params)) < 1e-4

    def test_eval_passes_ignore_dropout(self):
        f = _frame()
        net = build_net(f, TrendNetConfig(**SMALL, dropout=0.5))
        np.testing.assert_array_equal(net.predict(f), net.predict(f))

    def test_unknown_level_uses_zero_row(self):
        f = _frame()
        net = build_net(f, TrendNetConfig(**SMALL))
        assert np.all(net.emb[0][0] == 0)
        g = f.to_pandas()
        g = g[g["entity"] == "a"].assign(entity="new_store")
        b = net.encode(TimeSeriesFrame(g, categorical=("weekday",)))
        assert np.all(b.emb[0] == 0)
        assert np.isfinite(net.predict(TimeSeriesFrame(g, categorical=("weekday",)))).all()

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrendNetConfig(dropout=1.0)
        with pytest.raises(ConfigError):
            TrendNetConfig(input_width=0)
        with pytest.raises(DataError):
            build_net(_frame(n_days=1).select(np.array([True, False, False])), TrendNetConfig())


class TestTraining:
    def test_memorizes_ten_rows(self):
        df = pd.DataFrame({
            "date": pd.date_range("2021-01-01", periods=10, freq="D"),
            "entity": [f"s{i}" for i in range(10)],
            "target": np.random.default_rng(0).normal(100, 20, 10),
        })
        f = TimeSeriesFrame(df)
        cfg = TrendNetConfig(embed={"store": 4}, onehot=(), epochs=1500, batch_size=10,
                             lr=1e-2, lr_decay=1.0)
        net = train(f, cfg)
        assert net.history[-1]["train_loss"] < 1e-3

    def test_determinism(self):
        f = _frame()
        cfg = TrendNetConfig(**SMALL, epochs=3, seed=5)
        a, b = train(f, cfg), train(f, cfg)
        for p, q in zip(a.params, b.params):
            np.testing.assert_array_equal(p, q)
        c = train(f, TrendNetConfig(**SMALL, epochs=3, seed=6))
        assert not np.array_equal(a.params[1], c.params[1])

    def test_history_and_telemetry(self, tmp_path):
        f = _frame()
        net = train(f.select(f.dates < np.datetime64("2021-01-25")), TrendNetConfig(**SMALL, epochs=4),
                    valid_frame=f.select(f.dates >= np.datetime64("2021-01-25")))
        assert [h["epoch"] for h in net.history] == [0, 1, 2, 3]
        np.testing.assert_allclose([h["lr"] for h in net.history], 3e-3 * 0.97 ** np.arange(4))
        assert all(np.isfinite(h["valid_loss"]) for h in net.history)
        write_telemetry(net, tmp_path / "t.csv")
        t = pd.read_csv(tmp_path / "t.csv")
        assert list(t.columns) == ["epoch", "lr", "train_loss", "valid_loss"] and len(t) == 4

    def test_divergence_returns_checkpoint(self):
        f = _frame()
        with pytest.raises(TrainingDiverged) as e:
            train(f, TrendNetConfig(**SMALL, epochs=5), diverge_at=0.0)
        net = TrendNet.from_dict(e.value.checkpoint)
        assert net.history == []

    def test_save_load(self, tmp_path):
        f = _frame()
        net = train(f, TrendNetConfig(**SMALL, epochs=2))
        net.save(tmp_path / "n.json")
        back = TrendNet.load(tmp_path / "n.json")
        np.testing.assert_array_equal(back.predict(f), net.predict(f))
        pd.testing.assert_frame_equal(pd.DataFrame(back.history), pd.DataFrame(net.history))

    def test_learns_trend(self):
        f = _frame(n_days=120, promo_effect=0.0, slope=1.0)
        cfg = TrendNetConfig(**SMALL, epochs=60, lr=1e-2, lr_decay=1.0)
        net = train(f, cfg)
        resid = net.predict(f) - f.target
        assert np.sqrt(np.mean(resid**2)) < 10


class TestImportance:
    def test_promo_dominates(self):
        f = _frame(n_days=60, promo_effect=80.0)
        net = train(f, TrendNetConfig(**SMALL, epochs=40, lr=1e-2))
        imp = permutation_importance(net, f, features=["promo", "weekday", "store", "time"], seed=1)
        assert imp["promo"] > 20
        assert imp["promo"] > 3 * max(abs(imp["weekday"]), abs(imp["time"]))

    def test_deterministic_and_unknown_feature(self):
        f = _frame()
        net = build_net(f, TrendNetConfig(**SMALL))
        a = permutation_importance(net, f, seed=3)
        assert a == permutation_importance(net, f, seed=3)
        assert set(a) == {"store", "weekday", "promo"}
        with pytest.raises(ConfigError):
            permutation_importance(net, f, features=["nope"])
