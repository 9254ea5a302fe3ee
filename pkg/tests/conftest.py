import pytest

from jerkseg import KinematicLimits, SystemParams

from frozen import LAB, TABLE1, TABLE2_LIMITS

_criteria: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def table1():
    return SystemParams(**TABLE1)


@pytest.fixture(scope="session")
def limits():
    return KinematicLimits(**TABLE2_LIMITS)


@pytest.fixture(scope="session")
def lab():
    return SystemParams(**LAB)


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion for the summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        _criteria[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
