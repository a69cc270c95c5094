"""Collect acceptance verdicts and print one line per criterion at the end."""

import time

import pytest

VERDICTS = {}


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = []
        self.start = time.perf_counter()

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    c = Criterion(*marker.args)
    yield c
    call = getattr(request.node, "rep_call", None)
    ok = call is not None and call.passed
    elapsed = time.perf_counter() - c.start
    VERDICTS[c.number] = (ok, c.title, "; ".join(c.details), elapsed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, title, details, elapsed = VERDICTS[n]
        line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({elapsed:.1f} s)"
        if details:
            line += f" [{details}]"
        terminalreporter.write_line(line)
