import itertools

import numpy as np
import pytest

from fuzzylos.measure import FuzzyMeasure, random_monotone_measure


def brute_walk_weights(values, perm):
    """Walk weights straight from the definition, no library helpers."""
    out, mask, prev = [], 0, values[0]
    for i in perm:
        mask |= 1 << i
        out.append(values[mask] - prev)
        prev = values[mask]
    return np.array(out)


def brute_operators(g):
    """Distinct walk weight vectors with walk counts, in first-walk order."""
    found = {}
    for perm in itertools.permutations(range(g.n)):
        key = tuple(np.round(brute_walk_weights(g.values, perm), 12))
        found[key] = found.get(key, 0) + 1
    return found


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_measures():
    return [random_monotone_measure(n, seed) for n in (3, 4, 5) for seed in range(5)]


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}
_ACCEPTANCE_NOTES: list[str] = []


@pytest.fixture
def acceptance_note():
    """Append lines to the acceptance summary printed after the run."""
    return _ACCEPTANCE_NOTES.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    rep = outcome.get_result()
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        status = "PASS" if rep.passed else "FAIL"
        _ACCEPTANCE[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
    for line in _ACCEPTANCE_NOTES:
        terminalreporter.write_line(line)
