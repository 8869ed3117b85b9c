"""Per-criterion PASS/FAIL summary for tests marked ``@pytest.mark.criterion(name)``."""

import pytest

# criterion name -> list of (test id, outcome)
_RESULTS: dict[str, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion the test gates")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _RESULTS.setdefault(name, []).append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, results in _RESULTS.items():
        outcomes = {o for _, o in results}
        if "failed" in outcomes:
            verdict = "FAIL"
        elif outcomes == {"skipped"}:
            verdict = "SKIP"
        else:
            verdict = "PASS"
        failing = [t for t, o in results if o == "failed"]
        detail = f" ({', '.join(failing)})" if failing else ""
        terminalreporter.write_line(f"{verdict}  {name}{detail}")
