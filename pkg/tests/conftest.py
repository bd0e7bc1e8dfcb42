import numpy as np
import pytest

from ddyn.model_io import builtin_case_study
from ddyn.rigid_body import PlanarBody, RobotModel
from ddyn.transmission import TransmissionSet


def one_link(eta_f=0.8, eta_b=0.75, N=10.0, I_link=1.0, I_rotor=0.01, L=1.0):
    """Fixed-base pendulum whose inertia about the joint is ``I_link``.

    The mass is lumped at the joint so only the rotational inertia matters.
    """
    link = PlanarBody(mass=1.0, inertia_com=I_link, length=L, com_offset=0.0)
    t = TransmissionSet([N], [eta_f], [eta_b])
    return RobotModel(PlanarBody(1.0, 1.0), 0, (link,), [I_rotor], t, gravity=0.0, torque_limits=[1.0])


def two_link_fixed(eta_f=(0.8, 0.7), eta_b=None, D=None, gravity=9.81):
    links = (PlanarBody.uniform_rod(2.0, 0.4), PlanarBody.uniform_rod(1.5, 0.3))
    t = TransmissionSet([20.0, 15.0], eta_f, eta_b, D)
    return RobotModel(
        PlanarBody(1.0, 1.0), 0, links, [1e-4, 8e-5], t, gravity=gravity,
        torque_limits=[20.0, 15.0], pose=(0.4, 0.9),
    )


@pytest.fixture
def case_study():
    return builtin_case_study()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def _criterion_key(line):
    label = line.split()[1].rstrip(":")
    digits = "".join(ch for ch in label if ch.isdigit())
    return int(digits), label


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
            terminalreporter.write_line(line)
