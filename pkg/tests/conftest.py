import sys

import numpy as np
import pytest

from fdsecrecy._backend import available_backends, get_kernels
from fdsecrecy.model import FadingGrid, SystemParams

@pytest.fixture
def params():
    return SystemParams()


@pytest.fixture
def small_grid(params):
    return FadingGrid.from_params(params, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=available_backends())
def kern(request):
    return get_kernels(request.param)


def pytest_terminal_summary(terminalreporter):
    # echo the acceptance suite's per-criterion lines, which pytest would otherwise capture
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
