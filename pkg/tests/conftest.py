import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one ``criterion N: PASS/FAIL detail`` line for the summary."""
    lines = request.config.stash[_LINES_KEY]

    def record(number, ok, detail):
        status = "PASS" if ok is True else "FAIL" if ok is False else ok
        line = f"criterion {number:>2}: {status:<4}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
