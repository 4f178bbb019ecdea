"""Shared pytest hooks: the acceptance suite records one line per
criterion and this prints them after the run regardless of capture."""

ACCEPTANCE_RESULTS = []


def record_criterion(name: str, failures: list, detail: str = ""):
    status = "PASS" if not failures else "FAIL"
    line = f"[{name}] {status}"
    if detail:
        line += f" — {detail}"
    if failures:
        line += " — " + "; ".join(str(f) for f in failures)
    ACCEPTANCE_RESULTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
