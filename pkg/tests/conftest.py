import json
from collections import defaultdict

import numpy as np
import pytest

from posmg import catalog
from posmg.model import model_to_dict

CRITERIA = {
    1: "filter matches exhaustive Bayes posterior",
    2: "monotone value iteration, exact stabilization",
    3: "Shapley fixed point",
    4: "Nash deviation check",
    5: "comparison bounds",
    6: "evaluate_policies == enumerate_exact",
    7: "Monte Carlo consistency",
    8: "degenerate closed forms",
    9: "matrix-game solver",
    10: "pipeline reproducibility",
}

_outcomes: dict[int, list[bool]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _outcomes[mark.args[0]].append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            continue
        status = "PASS" if all(results) else "FAIL"
        tr.write_line(f"[{status}] criterion {n:2d}: {name} ({sum(results)}/{len(results)} tests)")


@pytest.fixture
def m1():
    return catalog.m1()


@pytest.fixture
def m2():
    return catalog.m2()


@pytest.fixture
def m3():
    return catalog.m3()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_model(tmp_path):
    def _write(model, name="model.json"):
        path = tmp_path / name
        path.write_text(json.dumps(model_to_dict(model), indent=2))
        return str(path)
    return _write
