import pytest

# PASS/FAIL/SKIP lines appended by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    def record(number, title, ok, detail, skipped=False):
        tag = "SKIP" if skipped else ("PASS" if ok else "FAIL")
        line = f"{tag} criterion {number:>2}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
