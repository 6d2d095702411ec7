_criteria = []


def record_criterion(name: str, passed: bool, detail: str = ""):
    """Collect one acceptance-criterion verdict for the end-of-run table."""
    _criteria.append((name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _criteria:
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
