import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from dtnforms.data import load_fixture  # noqa: E402

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")

BOUNDED = ["triangle", "disk_h0.1", "disk_h0.05", "annulus_h0.1", "ball3_h0.2"]
CLOSED = ["circle_h0.02", "sphere2_h0.15"]


@pytest.fixture(scope="session")
def disk():
    return load_fixture("disk_h0.05")


@pytest.fixture(scope="session")
def coarse_disk():
    return load_fixture("disk_h0.1")


@pytest.fixture(scope="session")
def annulus():
    return load_fixture("annulus_h0.1")


@pytest.fixture(scope="session")
def ball():
    return load_fixture("ball3_h0.2")


@pytest.fixture(scope="session")
def triangle():
    return load_fixture("triangle")


@pytest.fixture(scope="session")
def circle():
    return load_fixture("circle_h0.02")


@pytest.fixture(scope="session")
def sphere():
    return load_fixture("sphere2_h0.15")
