import re

import pytest

from mptaylor import PrecisionContext, builtin_system, mp_from_decimal

CANON_INIT = ("-15.8", "-17.48", "35.64")


@pytest.fixture(scope="session")
def ctx256():
    return PrecisionContext(256)


@pytest.fixture(scope="session")
def lorenz256(ctx256):
    return builtin_system("lorenz", ctx256)


@pytest.fixture(scope="session")
def state256(ctx256):
    return tuple(mp_from_decimal(t, ctx256) for t in CANON_INIT)


_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if getattr(report, "when", "call") not in ("call", "setup"):
                continue
            match = _CRITERION.search(nodeid)
            if not match:
                continue
            num, name = int(match.group(1)), match.group(2)
            status = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
            key = (num, name)
            if lines.get(key) != "FAIL":  # a FAIL in any phase wins
                lines[key] = status
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name) in sorted(lines):
        terminalreporter.write_line(
            f"criterion {num:2d} ({name.replace('_', ' ')}): {lines[(num, name)]}"
        )
