import numpy as np
import pytest

from lievprk.models import HeavyTopModel, RigidBodyModel, UnderwaterVehicleModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rigid_body():
    return RigidBodyModel((1.0, 2.0, 3.0))


@pytest.fixture(params=["rigid_body", "heavy_top", "underwater_vehicle"])
def any_model(request):
    return {
        "rigid_body": RigidBodyModel((1.0, 2.0, 3.0)),
        "heavy_top": HeavyTopModel((1.0, 2.0, 3.0), mgl=0.7, chi=(0.0, 0.6, 0.8)),
        "underwater_vehicle": UnderwaterVehicleModel(),
    }[request.param]


def rz(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rx(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


# acceptance lines, printed in the terminal summary so they survive output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
