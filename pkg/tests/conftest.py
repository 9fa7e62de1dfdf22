import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        doc = getattr(report, "criterion", None) or report.nodeid.split("::")[-1]
        _acceptance.append((report.outcome, doc))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    fn = getattr(item, "function", None)
    if fn is not None and fn.__doc__:
        rep.criterion = fn.__doc__.strip().splitlines()[0]
        callspec = getattr(item, "callspec", None)
        if callspec is not None:
            rep.criterion += f" [{callspec.id}]"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for outcome, doc in _acceptance:
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {doc}")
