import pytest

from batchid.model import DegreeDistribution, SystemConfig

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    _ACCEPTANCE.append((name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def make_cfg(N=1000, p_A=0.2, K=2, K_max=10, beta=20):
    return SystemConfig(N, p_A, K, K_max, DegreeDistribution.constant(beta))


@pytest.fixture
def cfg1000():
    return make_cfg()
