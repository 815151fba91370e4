import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion; the outcome is taken from the test result."""
    def register(number, title):
        _CRITERIA[request.node.nodeid] = (number, title)
    return register


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.nodeid in _CRITERIA and report.when == "call":
        number, title = _CRITERIA[item.nodeid]
        _CRITERIA[item.nodeid] = (number, title, report.passed)


def pytest_terminal_summary(terminalreporter):
    rows = sorted(v for v in _CRITERIA.values() if len(v) == 3)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed in rows:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}")
