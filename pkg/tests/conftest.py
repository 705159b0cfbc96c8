import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Call ``acceptance(number, ok, detail)`` to record one criterion line."""

    def record(num, ok, detail):
        line = f"acceptance {num}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE.append((num, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
