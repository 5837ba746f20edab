import numpy as np
import pytest
from hypothesis import settings

from holrecon.fem import FESpace
from holrecon.mesh import build_disk_mesh

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def mesh16():
    return build_disk_mesh(16)


@pytest.fixture(scope="session")
def space16_p3(mesh16):
    return FESpace(mesh16, 3)


@pytest.fixture(scope="session")
def space16_p2(mesh16):
    return FESpace(mesh16, 2)


@pytest.fixture(scope="session")
def space32_p3():
    return FESpace(build_disk_mesh(32), 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number: int, title: str, passed: bool, detail: str):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
