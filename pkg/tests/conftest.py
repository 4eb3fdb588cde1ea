import numpy as np
import pytest

from proxdg.forms import Method

ALL_METHODS = [
    Method("ipdg"),
    Method("eg"),
    Method("hip"),
    Method("hho", None, 0, 0),
    Method("hho", None, 0, 1),
    Method("hho", None, 1, 1),
]
HYBRID_METHODS = [m for m in ALL_METHODS if m.is_hybrid]


def method_id(m):
    return m.label


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so unit failures show up first
    items.sort(key=lambda it: "test_acceptance" in it.nodeid)


@pytest.fixture
def acceptance_log(request):
    """Append one pass/fail line per acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def log(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        lines.append((number, line))
        print(line)
        return ok

    return log


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
