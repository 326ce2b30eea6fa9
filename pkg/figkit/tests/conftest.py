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
        passed, seen = _results.get(cid, (True, False))
        _results[cid] = (passed and report.passed, True)
        _results[cid + "_desc"] = desc


def pytest_terminal_summary(terminalreporter):
    ids = [k for k in _results if not k.endswith("_desc")]
    if not ids:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for cid in sorted(ids, key=lambda c: int(c[1:])):
        passed, _ = _results[cid]
        desc = _results[cid + "_desc"]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {cid}: {desc}")
