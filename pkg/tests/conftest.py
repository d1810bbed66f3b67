from __future__ import annotations

import os
from pathlib import Path

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).resolve().parents[1] / "src" / "jordanhydro" / "data"

# acceptance lines, filled by tests/test_acceptance.py
CRITERIA: dict[int, list[str]] = {}


def record(number: int, passed: bool, text: str) -> str:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}"
    CRITERIA.setdefault(number, []).append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        for line in CRITERIA[n]:
            terminalreporter.write_line(line)
