import pytest

_results: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, label = marker.args
    ok = report.passed if report.when == "call" else False
    prev = _results.get(number)
    _results[number] = (label, ok and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        label, ok = _results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {label}")
