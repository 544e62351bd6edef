"""
Pytest configuration and fixtures
"""
import logging
import shutil
import tempfile

import numpy as np
import pytest

from app.assembly import ProblemSpec, assemble
from app.catalog import get_entry
from app.grid import Integrable1D, UniformGrid
from app.kernel import Nonlinearity, SingularFactor, SmoothFactor
from app.logging_utils import RunLogHandler


@pytest.fixture(autouse=True)
def detach_run_handlers():
    """Drop run handlers a test left on the package logger"""
    yield
    app_logger = logging.getLogger("app")
    for handler in [h for h in app_logger.handlers if isinstance(h, RunLogHandler)]:
        app_logger.removeHandler(handler)
        handler.close()


@pytest.fixture(scope="function")
def temp_dir():
    """Create a temporary directory for test files"""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid10():
    return UniformGrid(0.0, 1.0, 10)


@pytest.fixture
def log_H():
    return SingularFactor.log_distance()


@pytest.fixture
def example1():
    return get_entry("example1-sinpi").build()


@pytest.fixture
def example1_2pi():
    return get_entry("example1-sin2pi").build()


@pytest.fixture
def example2():
    return get_entry("example2").build()


@pytest.fixture
def linear_problem():
    """phi = K(phi) - y with N(u) = -u, y = -1: one Newton step solves it"""
    negate = Nonlinearity(
        value=lambda u: -np.asarray(u, dtype=float),
        derivative=lambda u: -np.ones(np.shape(u)),
        second_derivative=lambda u: np.zeros(np.shape(u)),
        label="-u",
    )
    return ProblemSpec(
        a=0.0,
        b=1.0,
        H=SingularFactor.log_distance(),
        L=SmoothFactor.one(),
        N=negate,
        y=Integrable1D.constant(-1.0, 0.0, 1.0),
        label="linear",
    )


@pytest.fixture
def example1_system(example1, grid10):
    return assemble(example1, grid10)
