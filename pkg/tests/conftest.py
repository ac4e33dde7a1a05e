"""Shared pytest plumbing.

Acceptance tests record one PASS/FAIL line each through
:func:`record_acceptance`; the terminal-summary hook prints the
collected lines at the end of the run so they are visible even with
output capture on.
"""

from __future__ import annotations

_ACCEPTANCE_LINES: list[tuple[int, str]] = []


def record_acceptance(number: int, description: str, ok: bool, elapsed: float) -> None:
    status = "PASS" if ok else "FAIL"
    _ACCEPTANCE_LINES.append(
        (number, f"[{status}] acceptance {number}: {description} ({elapsed:.2f}s)")
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
