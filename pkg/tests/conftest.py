from pathlib import Path

import pytest

from coupled_poisson import BoundSet, LocalizationBox, ProblemSpec

ROOT = Path(__file__).resolve().parents[1]
ESEMPIO1 = ROOT / "configs" / "esempio1.cfg"

F_EX = "0.2*(1+x1^2)*exp(u)*(2+cos(v))"
G_EX = "0.75*(1+x1^2)*(1-v^2)*(2+sin(u))"


@pytest.fixture
def example_spec():
    return ProblemSpec.from_strings(F_EX, G_EX, 64, 128)


@pytest.fixture
def example_box():
    return LocalizationBox(1 / 21, 1 / 2, 1 / 6, 3 / 2)


@pytest.fixture
def example_bounds():
    return BoundSet.from_strings("6*sqrt(e)/5", "1/5", "45/8", "35/24")


@pytest.fixture(scope="session")
def example_solution():
    from coupled_poisson import picard_solve

    spec = ProblemSpec.from_strings(F_EX, G_EX, 64, 128)
    return spec, *picard_solve(spec, tol=1e-10, max_iter=100)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
