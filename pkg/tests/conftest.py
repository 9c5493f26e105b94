import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, settings

from salescast.core import TimeSeriesFrame

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def make_frame(n_days=10, entities=("a", "b"), start="2020-01-01", seed=0, **cols):
    rng = np.random.default_rng(seed)
    dates = pd.date_range(start, periods=n_days, freq="D")
    df = pd.DataFrame(
        {
            "date": np.tile(dates, len(entities)),
            "entity": np.repeat(entities, n_days),
            "target": rng.normal(10, 2, n_days * len(entities)),
        }
    )
    for k, v in cols.items():
        df[k] = v
    return TimeSeriesFrame(df)


@pytest.fixture
def small_frame():
    return make_frame()


def fd_gradients(loss_fn, params, eps=1e-6):
    """Central finite differences of ``loss_fn()`` w.r.t. every entry of ``params`` (in place)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            up = loss_fn()
            p[i] = old - eps
            down = loss_fn()
            p[i] = old
            g[i] = (up - down) / (2 * eps)
        out.append(g)
    return out


def max_rel_error(analytic, numeric):
    """Largest per-array relative error ``|a - n| / max(|a| + |n|, 1e-8)`` in the 2-norm."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-8)
        worst = max(worst, float(np.linalg.norm(a - n) / denom))
    return worst


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""

    def record(number, title, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title} | {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
