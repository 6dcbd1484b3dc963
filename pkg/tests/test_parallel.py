import numpy as np

from polyafem import parallel
from polyafem.assembly import assemble_full
from polyafem.estimate import estimate_all
from polyafem.mesh import generate_initial_mesh


def test_thread_count(monkeypatch):
    monkeypatch.setenv("POLYAFEM_THREADS", "3")
    assert parallel.n_threads() == 3
    monkeypatch.setenv("POLYAFEM_THREADS", "junk")
    assert parallel.n_threads() == 1
    monkeypatch.delenv("POLYAFEM_THREADS")
    assert parallel.n_threads() == 1


def test_chunks_cover_all():
    parts = parallel.chunks(np.arange(2500), size=1000)
    assert [len(p) for p in parts] == [1000, 1000, 500]


def test_element_chunks(voronoi_mesh):
    ids = np.concatenate([ids for _, ids in parallel.element_chunks(voronoi_mesh)])
    assert sorted(ids) == list(range(voronoi_mesh.n_elements))


def test_threaded_results_identical(monkeypatch):
    m = generate_initial_mesh("unit_square", "polygonal", 40, seed=0)
    u = np.sin(m.vertices[:, 0] * 3) * m.vertices[:, 1]
    f = lambda x, y: x * y  # noqa: E731
    monkeypatch.setattr(parallel, "CHUNK", 64)
    monkeypatch.setenv("POLYAFEM_THREADS", "1")
    K1, F1 = assemble_full(m, f)
    e1 = estimate_all(m, u, f)
    monkeypatch.setenv("POLYAFEM_THREADS", "4")
    K4, F4 = assemble_full(m, f)
    e4 = estimate_all(m, u, f)
    assert (K1 != K4).nnz == 0
    np.testing.assert_array_equal(F1, F4)
    np.testing.assert_array_equal(e1.eta_sq, e4.eta_sq)
