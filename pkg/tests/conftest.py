import pytest

from sitnikov import build_circular_polygon, build_kepler_pair

ACCEPTANCE_LINES = []


def record(number: int, passed: bool, detail: str):
    """Store and print one acceptance verdict line."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def circ2():
    return build_circular_polygon(2)


@pytest.fixture(scope="session")
def circ3():
    return build_circular_polygon(3)


@pytest.fixture(scope="session")
def kep02():
    return build_kepler_pair(0.2)


@pytest.fixture(scope="session")
def kep05():
    return build_kepler_pair(0.5)
