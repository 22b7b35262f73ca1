"""Collects acceptance results and prints one pass/fail line per criterion."""

import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n, title = m.args
    measured = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _results[n] = (title, "PASS" if rep.passed else "FAIL", rep.duration, measured)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        title, status, dur, measured = _results[n]
        extra = f" [{measured}]" if measured else ""
        tr.write_line(f"criterion {n:2d} {status}: {title} ({dur:.2f} s){extra}")
