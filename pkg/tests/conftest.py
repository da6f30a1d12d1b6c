import pytest

from epwind import catalog
from epwind.braidgroup import default_rays
from epwind.branches import ReAsc
from epwind.model_dsl import builtin_paper4
from epwind.singularities import find_eps, map_cuts

REGION = (-3.0, 3.0, -3.0, 3.0)


@pytest.fixture(scope="session")
def paper4():
    return builtin_paper4()


@pytest.fixture(scope="session")
def eps(paper4):
    return find_eps(paper4, REGION, 200, ReAsc)


@pytest.fixture(scope="session")
def atlas(paper4, eps):
    return map_cuts(paper4, REGION, 200, ReAsc, eps=eps)


@pytest.fixture(scope="session")
def rays(atlas):
    return default_rays(atlas.eps)


@pytest.fixture(scope="session")
def loops():
    return catalog.named_paths()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
