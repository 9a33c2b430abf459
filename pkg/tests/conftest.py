import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("TALOSKIT_CACHE_DIR", str(tmp_path_factory.getbasetemp() / "reference-cache"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def constants():
    from taloskit.astro import standard_earth_constants

    return standard_earth_constants()


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            name = rep.nodeid.rsplit("::", 1)[-1]
            if name.startswith("test_criterion_") and rep.when == "call" or status == "error" and "criterion" in rep.nodeid:
                outcomes[name] = "PASS" if status == "passed" else "FAIL"
    if outcomes:
        terminalreporter.section("acceptance criteria")
        for name in sorted(outcomes):
            n = int(name.split("_")[2])
            terminalreporter.write_line(f"ACCEPTANCE criterion {n}: {outcomes[name]} ({name})")
