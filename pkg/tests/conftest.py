import numpy as np
import pytest

from navslip.discretization import SlipCoefficient, assemble
from navslip.geometry import DomainSpec, build_mesh_level

SPECS = {"disk": DomainSpec.disk(), "annulus": DomainSpec.annulus(), "channel": DomainSpec.channel()}

_OPS = {}


def ops_for(kind, level=3, alpha=1.0):
    key = (kind, level, alpha)
    if key not in _OPS:
        _OPS[key] = assemble(build_mesh_level(SPECS[kind], level), alpha=SlipCoefficient.constant(alpha))
    return _OPS[key]


@pytest.fixture(params=list(SPECS))
def kind(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
