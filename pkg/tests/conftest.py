import pytest

from qdcert.diophantine import ThetaSpec
from qdcert.orfanos import build_basis
from qdcert.quotient import build_folner
from qdcert.unitri import UniTri

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden():
    return ThetaSpec.golden()


@pytest.fixture(scope="session")
def gens3():
    """1 +- e12, 1 +- e23."""
    return [UniTri.elementary(3, 1, 2, s) for s in (1, -1)] + [UniTri.elementary(3, 2, 3, s) for s in (1, -1)]


_BASES = {}


def basis_for(n, d):
    if (n, d) not in _BASES:
        fd = build_folner(n, d)
        _BASES[n, d] = (fd, build_basis(fd))
    return _BASES[n, d]


@pytest.fixture(scope="session")
def bases():
    return basis_for
