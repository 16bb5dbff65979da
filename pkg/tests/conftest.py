import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(number, title, ok, detail):
        """``ok=None`` marks a criterion that is declared out of scope."""
        tag = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"[{tag}] criterion {number}: {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        if ok is None:
            pytest.skip(detail)
        assert ok, line

    return record


def pytest_collection_modifyitems(config, items):
    # acceptance criteria run before everything else
    items.sort(key=lambda item: item.path.name != "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
