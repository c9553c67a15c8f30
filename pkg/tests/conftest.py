import math

import pytest

from taxed_ruin import LevyModel, TaxRule


@pytest.fixture
def cl():
    return LevyModel.cramer_lundberg(1.5, 1.0, [(1.0, 1.0)])


@pytest.fixture
def bd():
    return LevyModel.brownian(0.0, math.sqrt(2.0))


@pytest.fixture
def pcl():
    return LevyModel.perturbed_cl(1.5, 0.5, 1.0, [(0.6, 1.0), (0.4, 3.0)])


@pytest.fixture
def headline():
    return TaxRule(2.0, ((0.0, 0.2), (3.0, 0.5)))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Print a criterion line now and repeat it in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def emit(text):
        print(text, flush=True)
        lines.append(text)
    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
