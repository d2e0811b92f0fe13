import numpy as np
import pytest

from spsolve.core import EllipsoidSurface, Hyperplane, ProblemInstance, Sphere

_ACCEPTANCE = []


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", help="also run full-size experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="full-size run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def record_acceptance(cid, passed, detail):
    _ACCEPTANCE.append((cid, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split("-")[1])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {cid}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20201015)


def random_circle_problem(rng, n, m):
    C = rng.standard_normal((m, n))
    xs = rng.standard_normal(n)
    return ProblemInstance(n, [Sphere(c, np.linalg.norm(xs - c)) for c in C], known_solution=xs)


def random_linear_problem(rng, n, m):
    A = rng.standard_normal((m, n))
    xs = rng.standard_normal(n)
    return ProblemInstance(n, [Hyperplane(a, a @ xs) for a in A], known_solution=xs)


def random_real_ellipse_problem(rng, n, m):
    A = rng.standard_normal((m, n))
    xs = rng.standard_normal(n)
    return ProblemInstance(n, [EllipsoidSurface(a, abs(a @ xs)) for a in A], known_solution=xs)
