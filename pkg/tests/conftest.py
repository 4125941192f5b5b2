"""Shared fixtures and the acceptance-criteria terminal report."""

# Populated by tests/test_acceptance.py: number -> (passed, description).
ACCEPTANCE_RESULTS = {}


def record_acceptance(number: int, description: str, passed: bool,
                      detail: str = ""):
    ACCEPTANCE_RESULTS[number] = (passed, description, detail)
    tag = "PASS" if passed else "FAIL"
    line = f"[{tag}] criterion {number}: {description}"
    if detail:
        line += f" ({detail})"
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        passed, desc, detail = ACCEPTANCE_RESULTS[num]
        tag = "PASS" if passed else "FAIL"
        line = f"[{tag}] criterion {num}: {desc}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
