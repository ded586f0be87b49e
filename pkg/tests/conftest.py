import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "passed": [], "failed": []})
    (entry["passed"] if rep.passed else entry["failed"]).append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "FAIL" if e["failed"] else "PASS"
        detail = f" (failing: {', '.join(e['failed'])})" if e["failed"] else ""
        terminalreporter.write_line(f"criterion {number} [{status}] {e['title']}: "
                                    f"{len(e['passed'])}/{len(e['passed']) + len(e['failed'])} checks passed{detail}")
