"""Shared record of acceptance verdicts, filled by test_acceptance and printed by conftest."""

import functools

RESULTS: dict[int, tuple[str, str, str]] = {}


def criterion(number: int, title: str):
    """Record PASS or FAIL for a criterion test and print the verdict line.

    The wrapped test returns a short detail string on success.
    """
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs) or ""
            except BaseException as exc:
                RESULTS[number] = ("FAIL", title, f"{type(exc).__name__}: {exc}"[:200])
                print(f"criterion {number} FAIL: {title}")
                raise
            RESULTS[number] = ("PASS", title, detail)
            print(f"criterion {number} PASS: {title} ({detail})")
        return run
    return wrap
