import sys

import numpy as np
import pytest

from minflex import kernels


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available Dykstra backend."""
    monkeypatch.setattr(kernels, "dykstra_halfspaces", kernels.BACKENDS[request.param])
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance PASS/FAIL lines, which are captured during the run."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
