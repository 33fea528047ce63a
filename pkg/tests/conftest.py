import pytest

from jonesfem.material import MaterialParams
from jonesfem.mesh import generate_annulus, generate_disk, generate_rectangle


@pytest.fixture(scope="session")
def params():
    return MaterialParams(mu=1.0, lam=0.5, rho=1.0)


@pytest.fixture(scope="session")
def square8():
    return generate_rectangle(1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def square16():
    return generate_rectangle(1.0, 1.0, 16, 16)


@pytest.fixture(scope="session")
def disk64():
    return generate_disk(1.0, 64, 8)


@pytest.fixture(scope="session")
def disk256():
    return generate_disk(1.0, 256, 16)


@pytest.fixture(scope="session")
def annulus():
    return generate_annulus(0.5, 1.0, 64, 4)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
