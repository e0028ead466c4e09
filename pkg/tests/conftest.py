import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def report(request):
    """Record one acceptance verdict line: report(number, passed, detail)."""
    lines = request.config.stash[_LINES]

    def add(number, passed, detail):
        lines.append((number, "PASS" if passed else "FAIL", detail))

    return add


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
