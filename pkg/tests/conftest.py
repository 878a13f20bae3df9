import re

import pytest

CRITERIA = {}


def _label(item):
    m = re.match(r"test_c(\d+)_(\w+)", item.name)
    return (int(m.group(1)), f"C{m.group(1)} {m.group(2).replace('_', ' ')}") if m else None


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    key = _label(request.node)

    def record(ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {key[1]}: {detail}"
        CRITERIA[key] = line
        print(line)
        assert ok, line

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    key = _label(item)
    # an exception before the verdict still yields a FAIL line
    if key and rep.when == "call" and rep.failed and key not in CRITERIA:
        msg = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
        CRITERIA[key] = f"FAIL {key[1]}: {call.excinfo.typename if call.excinfo else ''} {msg}"


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[key])
