import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cosgraph.graph import build_graph, random_graph  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")
    config.addinivalue_line("markers", "slow: long-running training test")


_acceptance_results: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    key = (marker.args[0], marker.args[1])
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        prev = _acceptance_results.get(key, "PASS")
        _acceptance_results[key] = "FAIL" if rep.outcome == "failed" or prev == "FAIL" else (
            "SKIP" if rep.outcome == "skipped" else prev
        )


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), status in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def bowtie():
    return build_graph([(0, 1), (1, 2), (0, 2), (0, 3), (0, 4), (3, 4)], 5)


@pytest.fixture
def mutag_dir():
    return DATA_DIR / "MUTAG"


def random_graphs(count, n_max, seed, probs=(0.2, 0.5, 0.8), n_min=1):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        out.append(random_graph(n, probs[i % len(probs)], rng))
    return out
