from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when != "call" and not (rep.failed or rep.skipped):
        return
    entry = _criteria.setdefault(number, {"title": title, "passed": 0, "failed": 0, "skipped": 0, "detail": []})
    if rep.failed:
        entry["failed"] += 1
        entry["detail"].append(f"failed: {item.name}")
    elif rep.skipped:
        entry["skipped"] += 1
        reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
        entry["detail"].append(f"skipped: {reason}")
    else:
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "FAIL" if entry["failed"] else ("PASS" if entry["passed"] else "SKIP")
        extra = f" ({'; '.join(entry['detail'])})" if entry["detail"] else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}{extra}")
