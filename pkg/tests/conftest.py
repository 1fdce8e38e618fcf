import numpy as np
import pytest
from hypothesis import settings

from dissipationless.waveguide import FIG2, build_waveguide_model

# verdict lines of the acceptance suite, repeated at the end of the run
VERDICTS = pytest.StashKey[list]()

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fig2_05():
    return build_waveguide_model(FIG2.replace(omega0=0.5))


@pytest.fixture(scope="session")
def fig2_10():
    return build_waveguide_model(FIG2.replace(omega0=1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
