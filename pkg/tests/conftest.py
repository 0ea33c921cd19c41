import numpy as np
import pytest

from sphereflow.graph import LaplacianKind, build_healpix_graph
from sphereflow.harmonics import eval_harmonics
from sphereflow.sampling import healpix_new
from sphereflow.spectral import eigendecompose


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def graph2():
    return build_healpix_graph(healpix_new(2))


@pytest.fixture(scope="session")
def graph4():
    return build_healpix_graph(healpix_new(4))


@pytest.fixture(scope="session")
def graph8():
    return build_healpix_graph(healpix_new(8))


@pytest.fixture(scope="session")
def basis4(graph4):
    return eigendecompose(graph4)


@pytest.fixture(scope="session")
def harm8():
    return eval_harmonics(healpix_new(8), 8)


@pytest.fixture(scope="session")
def comb_graph2():
    return build_healpix_graph(healpix_new(2), kind=LaplacianKind.COMBINATORIAL)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance" not in rep.nodeid:
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                rows.append((props["criterion"], outcome.upper()[:4], props.get("detail", "")))
    if rows:
        terminalreporter.section("acceptance criteria")
        for num, verdict, detail in sorted(rows):
            terminalreporter.write_line(f"criterion {num}: {verdict}  {detail}")
