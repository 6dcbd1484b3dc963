import numpy as np
import pytest

from polyafem.adapt import refine
from polyafem.mesh import build_topology, generate_initial_mesh
from polyafem.verify import sample_polygons

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def regular_polygon(n, radius=1.0, phase=0.0):
    k = np.arange(n)
    a = 2 * np.pi * k / n + phase
    return radius * np.column_stack([np.cos(a), np.sin(a)])


def two_squares():
    V = np.array([[0, 0], [1, 0], [2, 0], [0, 1], [1, 1], [2, 1]], dtype=float)
    return build_topology(V, [[0, 1, 4, 3], [1, 2, 5, 4]])


@pytest.fixture
def unit_square():
    return UNIT_SQUARE.copy()


@pytest.fixture
def square_mesh():
    return build_topology(UNIT_SQUARE, [[0, 1, 2, 3]])


@pytest.fixture
def two_square_mesh():
    return two_squares()


@pytest.fixture(scope="session")
def random_polygons():
    return sample_polygons(100, seed=123)


@pytest.fixture(scope="session")
def grid4():
    return generate_initial_mesh("unit_square", "grid", 4)


@pytest.fixture(scope="session")
def voronoi_mesh():
    return generate_initial_mesh("unit_square", "polygonal", 5, seed=3)


@pytest.fixture(scope="session")
def hanging_mesh():
    """Polygonal mesh after two local refinements; has hanging vertices."""
    m = generate_initial_mesh("unit_square", "polygonal", 4, seed=1)
    m = refine(m, [0, 5])
    m = refine(m, [m.n_elements - 1, 2])
    assert m.hanging
    return m


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
