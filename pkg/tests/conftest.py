from __future__ import annotations

import numpy as np
import pytest

from ecmv.models import random_coeffs

_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _results[number] = ("PASS" if call.excinfo is None else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        status, title = _results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_models():
    """Twenty reproducible i.i.d. disk models with varying radii."""
    return [random_coeffs(seed, radius=0.5 + 0.02 * seed) for seed in range(20)]
