import pytest

# criterion number -> (passed, detail lines); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, list[str]]] = {}


@pytest.fixture
def criterion():
    """Record the sub-checks of one acceptance criterion, then fail if any of them failed."""

    def record(number, title, checks):
        ok = all(c[1] for c in checks)
        lines = [f"{'PASS' if c[1] else 'FAIL'}  {c[0]}: {c[2]}" for c in checks]
        ACCEPTANCE[number] = (ok, [title] + lines)
        failed = [c[0] for c in checks if not c[1]]
        assert not failed, f"criterion {number} failed: {', '.join(failed)}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, lines = ACCEPTANCE[number]
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {lines[0]}")
        for line in lines[1:]:
            tr.write_line(f"        {line}")
