import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from osveta import fixtures
from osveta.mesh import Mesh, build_adjacency, topology_sets

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


ACCEPTANCE_LINES: list[str] = []


def check_structure(before: Mesh, after: Mesh, rep):
    """Postconditions every decimation run must satisfy."""
    assert sorted(rep.deleted + rep.survivors) == list(range(before.n_vertices))
    assert not set(rep.deleted) & set(rep.survivors)
    assert after.n_vertices == len(rep.survivors)
    assert after.faces.shape == (rep.n_faces, 3)
    used = np.unique(after.faces)
    assert used.min() >= 0 and used.max() < after.n_vertices
    np.testing.assert_array_equal(after.vertices, before.vertices[rep.survivors])
    adj = build_adjacency(after)
    assert all(len(f) <= 2 for f in adj.edge_faces.values())
    err_before = set(topology_sets(before, build_adjacency(before)).errors)
    err_after = {rep.survivors[v] for v in topology_sets(after, adj).errors}
    assert err_after <= err_before


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tetra():
    return fixtures.tetrahedron()


@pytest.fixture(scope="session")
def ico3():
    return fixtures.icosphere(3)


@pytest.fixture(scope="session")
def small_fixtures():
    return {
        "tetrahedron": fixtures.tetrahedron(),
        "icosphere2": fixtures.icosphere(2),
        "torus": fixtures.torus(16, 8),
        "grid": fixtures.grid(6),
        "saddle": fixtures.saddle_grid(7),
        "roof": fixtures.roof(),
        "cube-corner": fixtures.cube_corner(),
        "pyramid": fixtures.pyramid(),
    }
