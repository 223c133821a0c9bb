"""Prints the acceptance verdicts at the end of the run, one line per criterion."""

import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.RESULTS):
        verdict, title, detail = acceptance_log.RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {title} ({detail})")
