import numpy as np
import pytest

from fbhebb.core import Architecture, Network


@pytest.fixture
def net():
    return Network.build(Architecture.FF2_FB2, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_dir(tmp_path_factory):
    """The full acceptance grid (all controls and ablations, seeds 1-5), run once per session."""
    from fbhebb.harness import run_matrix

    out = tmp_path_factory.mktemp("acceptance")
    run_matrix("acceptance", [1, 2, 3, 4, 5], out)
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERION_IDS, LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for cid in CRITERION_IDS:
            if cid in LINES:
                terminalreporter.write_line(LINES[cid])
