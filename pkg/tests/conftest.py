from helpers import ACCEPTANCE

CRITERIA = 10


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, CRITERIA + 1):
        if n not in ACCEPTANCE:
            terminalreporter.write_line(f"NOT RUN {n:2d}")
            continue
        title, ok, details = ACCEPTANCE[n]
        line = f"{'PASS' if ok else 'FAIL'}    {n:2d}. {title}"
        if details:
            line += ": " + "; ".join(details)
        terminalreporter.write_line(line)
