import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from fractalcz.config import load_config
from fractalcz.energy import assemble
from fractalcz.fractal_model import build_graph, build_model
from fractalcz.pipeline import Workspace
from fractalcz.spectral import eigenbasis

# one pass/fail line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session", autouse=True)
def single_thread_blas():
    with threadpool_limits(limits=1):
        yield


@pytest.fixture(scope="session")
def gasket():
    return build_model("gasket")


@pytest.fixture(scope="session")
def interval():
    return build_model("interval")


@pytest.fixture(scope="session")
def gasket_ws():
    return Workspace("gasket")


@pytest.fixture(scope="session")
def interval_ws():
    return Workspace("interval")


@pytest.fixture(scope="session")
def gasket_cfg():
    return load_config(flags={"model": "gasket"}, environ={})


@pytest.fixture(scope="session")
def interval_cfg():
    return load_config(flags={"model": "interval"}, environ={})


@pytest.fixture(scope="session")
def gasket_l3(gasket):
    el = assemble(build_graph(gasket, 3))
    return el, eigenbasis(el)


@pytest.fixture(scope="session")
def gasket_l4(gasket):
    el = assemble(build_graph(gasket, 4))
    return el, eigenbasis(el)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
