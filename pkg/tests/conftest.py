import re
import warnings

import hypothesis
import numpy as np
import pytest

from twophoton.state import EdgeLeakageWarning

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile("default")

# Filled by tests/test_acceptance.py: criterion id -> (passed, detail).
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture(autouse=True)
def _quiet_edges():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EdgeLeakageWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    def order(k):
        m = re.match(r"(\d+)(.*)", k)
        return (int(m.group(1)), m.group(2)) if m else (10**6, k)

    for key in sorted(ACCEPTANCE_RESULTS, key=order):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key:8s} {detail}")


@pytest.fixture(scope="session")
def builtin_report():
    """Run a builtin scenario once per session and hand back its RunReport."""
    from twophoton.scenario import load_scenario, run_scenario

    cache = {}

    def get(name):
        if name not in cache:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EdgeLeakageWarning)
                cache[name] = run_scenario(load_scenario(name))
        return cache[name]

    return get
