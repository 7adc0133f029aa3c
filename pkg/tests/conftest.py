import time

import pytest

from tanglepick.campaign import default_config, run_campaign

_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def verdict():
    """Record one acceptance verdict; they are echoed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _VERDICTS[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")


def _timed(experiment):
    start = time.perf_counter()
    report = run_campaign(default_config(experiment))
    return report, time.perf_counter() - start


@pytest.fixture(scope="session")
def h1_run():
    return _timed("H1")


@pytest.fixture(scope="session")
def h2_run():
    return _timed("H2")


@pytest.fixture(scope="session")
def h3_run():
    return _timed("H3")
