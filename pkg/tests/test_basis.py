import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import UNIT_SQUARE, regular_polygon
from polyafem.basis import (
    basis_batch,
    edge_basis_batch,
    eval_basis,
    eval_basis_on_edge,
    eval_map,
    eval_weights,
    jacobian_det_expansion,
    map_batch,
    reference_polygon,
)
from polyafem.errors import BadEdgeIndex, PointOutsideElement, VertexCountMismatch
from polyafem.geometry import element_geometry
from polyafem.verify import random_polygon, sample_polygons


def interior_points(P, count, rng, margin=0.0):
    """Random convex combinations, optionally kept ``margin * h_T`` from edges."""
    g = element_geometry(P)
    out = []
    while len(out) < count:
        w = rng.dirichlet(np.ones(len(P)))
        x = w @ P
        if g.edge_distances(x[None]).min() >= margin * g.diameter:
            out.append(x)
    return np.array(out)


class TestWeights:
    def test_square_weights_are_bilinear(self):
        for x, y in [(0.3, 0.7), (0.5, 0.5), (0.9, 0.05)]:
            w = eval_weights(UNIT_SQUARE, (x, y))
            np.testing.assert_allclose(
                w.w, [(1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y], atol=1e-15
            )
            assert w.W == pytest.approx(1.0, abs=1e-15)

    def test_triangle_weights_proportional_to_barycentric(self):
        T = np.array([[0.0, 0.0], [2.0, 0.3], [0.4, 1.5]])
        x = np.array([0.7, 0.5])
        w = eval_weights(T, x)
        A = np.vstack([T.T, np.ones(3)])
        bary = np.linalg.solve(A, np.append(x, 1.0))
        np.testing.assert_allclose(w.w / w.W, bary, rtol=1e-13)

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_homogeneity_under_scaling(self, n):
        P = regular_polygon(n, 1.0, 0.3)
        x = np.array([0.1, -0.2])
        s = 3.7
        w1, w2 = eval_weights(P, x), eval_weights(P * s, x * s)
        np.testing.assert_allclose(w2.w, s ** (n - 2) * w1.w, rtol=1e-12)
        np.testing.assert_allclose(w2.grad_w, s ** (n - 3) * w1.grad_w, rtol=1e-11, atol=1e-14)

    def test_W_positive_inside(self, random_polygons):
        rng = np.random.default_rng(0)
        for P in random_polygons[:20]:
            for x in interior_points(P, 5, rng):
                assert eval_weights(P, x).W > 0

    def test_outside_rejected(self):
        with pytest.raises(PointOutsideElement):
            eval_weights(UNIT_SQUARE, (1.5, 0.5))


class TestEvalBasis:
    def test_triangle_centroid(self):
        b = eval_basis(np.array([[0, 0], [1, 0], [0, 1]], dtype=float), (1 / 3, 1 / 3))
        np.testing.assert_allclose(b.values, 1 / 3, atol=1e-15)

    def test_lagrange_on_hexagon(self):
        rng = np.random.default_rng(7)
        P = random_polygon(rng, 6)
        for j, a in enumerate(P):
            np.testing.assert_allclose(eval_basis(P, a).values, np.eye(6)[j], atol=1e-14)

    def test_linear_precision_pentagon(self):
        rng = np.random.default_rng(8)
        P = random_polygon(rng, 5)
        h = float(element_geometry(P).diameter)
        for x in interior_points(P, 10, rng):
            b = eval_basis(P, x)
            assert np.abs(b.values @ P - x).max() <= 1e-12 * h

    def test_basis_eval_invariants(self, random_polygons):
        rng = np.random.default_rng(1)
        for P in random_polygons:
            h = float(element_geometry(P).diameter)
            for x in interior_points(P, 5, rng):
                b = eval_basis(P, x)
                assert b.values.sum() == pytest.approx(1.0, abs=1e-12)
                assert np.abs(b.gradients.sum(axis=0)).max() <= 1e-10 / h
                assert abs(b.laplacians.sum()) <= 1e-8 / h**2
                assert b.values.min() >= -1e-13

    def test_bilinear_on_square(self):
        for x, y in [(0.2, 0.9), (0.61, 0.33)]:
            b = eval_basis(UNIT_SQUARE, (x, y))
            np.testing.assert_allclose(b.values, [(1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y], atol=1e-12)
            np.testing.assert_allclose(b.gradients[2], [y, x], atol=1e-12)
            np.testing.assert_allclose(b.laplacians, 0.0, atol=1e-12)

    def test_boundary_point_uses_edge_branch(self):
        b = eval_basis(UNIT_SQUARE, (0.25, 0.0))
        np.testing.assert_allclose(b.values, [0.75, 0.25, 0, 0], atol=1e-15)

    def test_batch_matches_pointwise(self, random_polygons):
        P = random_polygons[3]
        rng = np.random.default_rng(4)
        X = interior_points(P, 6, rng)
        lam, glam, llam = basis_batch(element_geometry(P[None]), X[None])
        for k, x in enumerate(X):
            b = eval_basis(P, x)
            np.testing.assert_allclose(lam[0, k], b.values, rtol=1e-13, atol=1e-15)
            np.testing.assert_allclose(glam[0, k], b.gradients, rtol=1e-12, atol=1e-13)
            np.testing.assert_allclose(llam[0, k], b.laplacians, rtol=1e-10, atol=1e-11)


class TestDerivativeConsistency:
    def test_gradients_vs_central_differences(self):
        polys = sample_polygons(100, seed=21)
        rng = np.random.default_rng(2)
        worst = 0.0
        for P in polys:
            g = element_geometry(P)
            h = float(g.diameter)
            d = 1e-6 * h
            X = interior_points(P, 10, rng, margin=2e-6)
            for x in X:
                b = eval_basis(g, x)
                fd = np.column_stack([
                    (eval_basis(g, x + [d, 0]).values - eval_basis(g, x - [d, 0]).values) / (2 * d),
                    (eval_basis(g, x + [0, d]).values - eval_basis(g, x - [0, d]).values) / (2 * d),
                ])
                worst = max(worst, np.abs(fd - b.gradients).max() / np.abs(b.gradients).max())
        assert worst <= 1e-6

    def test_laplacians_vs_second_differences(self):
        polys = sample_polygons(100, seed=22)
        rng = np.random.default_rng(3)
        worst = 0.0
        for P in polys:
            g = element_geometry(P)
            h = float(g.diameter)
            d = 1e-3 * h
            for x in interior_points(P, 10, rng, margin=0.1):
                b = eval_basis(g, x)
                c = b.values
                fd = sum(eval_basis(g, x + s).values for s in ([d, 0], [-d, 0], [0, d], [0, -d]))
                fd = (fd - 4 * c) / d**2
                scale = max(np.abs(b.laplacians).max(), 1.0 / h**2)
                worst = max(worst, np.abs(fd - b.laplacians).max() / scale)
        assert worst <= 1e-4

    def test_triangle_laplacian_vanishes(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            T = random_polygon(rng, 3)
            h = float(element_geometry(T).diameter)
            for x in interior_points(T, 5, rng):
                assert np.abs(eval_basis(T, x).laplacians).max() <= 1e-12 / h**2

    def test_sampled_maxima_scale_invariant(self, random_polygons):
        from polyafem.quadrature import polygon_rule_batch

        for P in random_polygons[:20]:
            vals = []
            for s in (1e-3, 1.0, 1e3):
                g = element_geometry((P * s)[None])
                pts, _ = polygon_rule_batch(g.vertices, 8)
                _, glam, llam = basis_batch(g, pts)
                h = float(g.diameter[0])
                vals.append((np.linalg.norm(glam, axis=-1).max() * h, np.abs(llam).max() * h**2))
            np.testing.assert_allclose(vals[0], vals[1], rtol=1e-12, atol=1e-13)
            np.testing.assert_allclose(vals[2], vals[1], rtol=1e-12, atol=1e-13)


class TestEdgeBranch:
    def test_midpoint(self, random_polygons):
        for P in random_polygons[:10]:
            n = len(P)
            for i in range(n):
                b = eval_basis_on_edge(P, i, 0.5)
                expect = np.zeros(n)
                expect[i] = expect[(i + 1) % n] = 0.5
                np.testing.assert_allclose(b.values, expect, atol=1e-15)

    def test_square_bottom_edge(self):
        b = eval_basis_on_edge(UNIT_SQUARE, 0, 0.25)
        np.testing.assert_allclose(b.values, [0.75, 0.25, 0.0, 0.0], atol=1e-15)

    def test_gradient_trace_continuity(self, random_polygons):
        for P in random_polygons[:30]:
            g = element_geometry(P)
            h = float(g.diameter)
            for i in range(len(P)):
                for t in (0.2, 0.5, 0.8):
                    bb = eval_basis_on_edge(g, i, t)
                    x = bb.point - 1e-8 * h * g.normals[i]
                    bi = eval_basis(g, x)
                    err = np.abs(bi.gradients - bb.gradients).max() / np.abs(bb.gradients).max()
                    assert err <= 1e-5

    def test_batch_edge_argument(self):
        P = regular_polygon(5)
        g = element_geometry(P[None])
        t = np.array([[0.1, 0.6]])
        lam, glam, _ = edge_basis_batch(g, t, edge=2)
        for k in range(2):
            b = eval_basis_on_edge(P, 2, t[0, k])
            np.testing.assert_allclose(glam[0, k], b.gradients, rtol=1e-12, atol=1e-13)

    def test_bad_edge(self):
        with pytest.raises(BadEdgeIndex):
            eval_basis_on_edge(UNIT_SQUARE, 4, 0.5)


class TestMap:
    @pytest.mark.parametrize("n", [3, 4, 6, 8])
    def test_identity(self, n):
        ref = reference_polygon(n)
        assert float(ref.diameter) == pytest.approx(1.0, abs=1e-15)
        for xh in [ref.vertices.mean(axis=0), 0.3 * ref.vertices[0]]:
            m = eval_map(ref.vertices, xh)
            np.testing.assert_allclose(m.image, xh, atol=1e-14)
            np.testing.assert_allclose(m.jacobian, np.eye(2), atol=1e-12)
            assert m.det == pytest.approx(1.0, abs=1e-12)

    def test_scaled_reference(self):
        ref = reference_polygon(6)
        m = eval_map(2.5 * ref.vertices, 0.2 * ref.vertices[1])
        np.testing.assert_allclose(m.jacobian, 2.5 * np.eye(2), atol=1e-12)

    def test_reference_vertex_angles(self):
        v = reference_polygon(5).vertices
        ang = np.mod(np.arctan2(v[:, 1], v[:, 0]), 2 * np.pi)
        expect = np.mod(2 * np.pi * np.arange(5) / 5 + np.pi / 2 - np.pi / 5, 2 * np.pi)
        np.testing.assert_allclose(ang, expect, atol=1e-14)

    def test_det_expansion_oracle_hexagon(self):
        rng = np.random.default_rng(33)
        T = random_polygon(rng, 6)
        ref = reference_polygon(6)
        X = interior_points(ref.vertices, 50, rng)
        _, _, det = map_batch(T[None], X)
        oracle = jacobian_det_expansion(T[None], X)
        np.testing.assert_allclose(det, oracle, rtol=1e-9)
        assert np.all(det > 0)

    def test_vertex_count_mismatch(self):
        with pytest.raises(VertexCountMismatch):
            eval_map(regular_polygon(5), (0.0, 0.0), n_ref=6)


@st.composite
def polygons(draw):
    n = draw(st.integers(3, 8))
    seed = draw(st.integers(0, 2**31 - 1))
    P = random_polygon(np.random.default_rng(seed), n)
    s = draw(st.floats(1e-3, 1e3))
    shift = np.array([draw(st.floats(-10, 10)), draw(st.floats(-10, 10))])
    return P * s + shift


@given(polygons(), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_property_partition_and_linear_precision(P, seed):
    x = interior_points(P, 1, np.random.default_rng(seed))[0]
    b = eval_basis(P, x)
    h = float(element_geometry(P).diameter)
    assert b.values.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.abs(b.values @ P - x).max() <= 1e-12 * max(h, np.abs(x).max())
    assert np.abs(b.gradients.sum(axis=0)).max() <= 1e-10 / h
