import sys

import numpy as np
import pytest

from d2dkit.synthgen import GeneratorConfig, generate_trace
from d2dkit.trace import CATEGORIES, GeoPoint, SharingEvent, Trace


def ev(ts, s, r, f=1, size=100, cat="app", geo=None):
    return SharingEvent(ts, s, r, f, size, cat, None if geo is None else GeoPoint(*geo))


def random_events(rng, n_events, n_users=12, span=1000, n_files=8, geo_rate=0.3):
    out = []
    for _ in range(n_events):
        s, r = rng.choice(n_users, size=2, replace=False).tolist()
        geo = None
        if rng.random() < geo_rate:
            geo = GeoPoint(round(float(rng.uniform(-90, 90)), 6), round(float(rng.uniform(-180, 180)), 6))
        out.append(SharingEvent(int(rng.integers(0, span)), s, r, int(rng.integers(0, n_files)),
                                int(rng.integers(0, 10**9)), CATEGORIES[int(rng.integers(0, 5))], geo))
    return out


def random_trace(rng, n_events, **kw) -> Trace:
    return Trace.from_events(random_events(rng, n_events, **kw))


@pytest.fixture(scope="session")
def default_generated():
    return generate_trace(GeneratorConfig())


@pytest.fixture(scope="session")
def small_generated():
    return generate_trace(GeneratorConfig(num_groups=150, rng_seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
