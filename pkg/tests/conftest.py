import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(cid, desc): tags a test as one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when == "call":
        cid, desc = marker.args
        _results[cid] = (report.passed, desc)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for cid in sorted(_results, key=lambda c: int(c[1:])):
        passed, desc = _results[cid]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {cid}: {desc}")
