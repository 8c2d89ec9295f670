import pytest

from ternstab.algebra import AlgebraDescriptor
from ternstab.maps import ProbeSet


@pytest.fixture(scope="session")
def desc2():
    return AlgebraDescriptor(2)


@pytest.fixture(scope="session")
def probes2(desc2):
    return ProbeSet.generate(desc2, seed=0)


@pytest.fixture(scope="session")
def near_probes(desc2):
    """Probes with norms in [0.1, 2] where absolute residuals stay O(tolerance)."""
    return ProbeSet.generate(desc2, seed=1, r_max=2.0)


_CRITERIA_LINES = []


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        line = f"criterion {self.number:>2} {status}  {self.title}"
        if self.detail:
            line += f"  [{self.detail}]"
        if exc_type is not None:
            line += f"  ({exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        _CRITERIA_LINES.append(line)
        print(line)
        return False


@pytest.fixture
def criterion():
    """Context manager factory that records one PASS/FAIL line per acceptance criterion."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA_LINES:
            terminalreporter.write_line(line)
