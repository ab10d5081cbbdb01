import numpy as np
import pytest
from hypothesis import settings

from bdris.channel import bs_ris_channel
from bdris.geometry import SPEED_OF_LIGHT, build_geometry

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

LAMBDA = SPEED_OF_LIGHT / 28e9


def make_geometry(m_x=10, m_y=10, spacing=0.5, separation=0.5):
    d = spacing * LAMBDA
    return build_geometry(m_x, m_y, d, d, separation * LAMBDA, LAMBDA, (LAMBDA / 2) ** 2)


@pytest.fixture
def lam():
    return LAMBDA


@pytest.fixture
def geometry():
    return make_geometry()


@pytest.fixture
def feed(geometry):
    return bs_ris_channel(geometry)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
