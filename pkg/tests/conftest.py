import math

import numpy as np
import pytest
from hypothesis import settings

from stulc.pipeline import build_channel
from stulc.scenario import Scenario

settings.register_profile("stulc", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("stulc")

# small, fast channel used across the transport tests
FAST = {"grid.m": 24, "fading.mode": "mean", "surface.samples": 128, "sim.photons": 8192}


@pytest.fixture(scope="session")
def fast_channel():
    return build_channel(Scenario(FAST))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rel(a, b):
    return abs(a - b) / abs(b)


def deg(x):
    return math.radians(x)


# acceptance criterion -> list of (check, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}
CRITERIA = {
    1: "interface PDF oracle",
    2: "energy and conservation",
    3: "sampler moments",
    4: "single-scatter oracle",
    5: "analytic identities",
    6: "qualitative trends",
    7: "determinism and runtime",
}


def record(criterion: int, check: str, passed: bool, detail: str = ""):
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c, title in CRITERIA.items():
        checks = ACCEPTANCE.get(c)
        if not checks:
            tr.write_line(f"criterion {c} ({title}): NOT RUN")
            continue
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        failed = [name for name, ok, _ in checks if not ok]
        tail = f"; failing: {', '.join(failed)}" if failed else ""
        tr.write_line(f"criterion {c} ({title}): {status} [{len(checks) - len(failed)}/{len(checks)} checks]{tail}")
        for name, ok, detail in checks:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {name}: {detail}")
