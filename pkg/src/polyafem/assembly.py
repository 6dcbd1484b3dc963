"""Degrees of freedom, Galerkin assembly and the Jacobi-preconditioned CG solve."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import basis_batch
from .errors import MeshError, NoConvergence, QuadratureFailure, SingularElement
from .geometry import element_geometry
from .parallel import element_chunks, ordered_map
from .quadrature import DEFAULT_POLYGON_DEGREE, polygon_rule_batch

FREE, DIRICHLET, CONSTRAINED = 0, 1, 2


@dataclass
class DofMap:
    """Role of every mesh vertex.

    ``kind[v]`` is FREE, DIRICHLET or CONSTRAINED.  Free vertices carry a
    contiguous ``index``; Dirichlet vertices a prescribed ``value``; hanging
    vertices take half of each parent in ``parents``.
    """

    kind: np.ndarray
    index: np.ndarray  # -1 unless free
    value: np.ndarray  # Dirichlet data, 0 elsewhere
    parents: dict  # constrained vertex -> ((p, 0.5), (q, 0.5))
    n_free: int

    def prolongation(self):
        """Sparse ``P`` and offset ``u0`` with ``u_full = P @ u_free + u0``."""
        V = len(self.kind)
        rows, cols, vals = [], [], []
        u0 = np.where(self.kind == DIRICHLET, self.value, 0.0)
        free = np.nonzero(self.kind == FREE)[0]
        rows.extend(free)
        cols.extend(self.index[free])
        vals.extend(np.ones(len(free)))
        for v, pairs in self.parents.items():
            for p, c in pairs:
                if self.kind[p] == FREE:
                    rows.append(v)
                    cols.append(self.index[p])
                    vals.append(c)
                elif self.kind[p] == DIRICHLET:
                    u0[v] += c * self.value[p]
                else:
                    raise MeshError(f"constraint chain at vertex {v}")
        P = sp.csr_matrix((vals, (rows, cols)), shape=(V, self.n_free))
        return P, u0


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    full_matrix: sp.csr_matrix  # before constraints and Dirichlet lifting
    full_load: np.ndarray

    @property
    def dimension(self):
        return self.matrix.shape[0]


@dataclass
class DiscreteSolution:
    values: np.ndarray  # one coefficient per mesh vertex
    mesh_id: int


def build_dofmap(mesh, boundary_data=None) -> DofMap:
    V = mesh.n_vertices
    kind = np.full(V, FREE, dtype=int)
    value = np.zeros(V)
    bnd = mesh.boundary_vertices
    kind[bnd] = DIRICHLET
    if boundary_data is not None and bnd.any():
        x = mesh.vertices[bnd]
        value[bnd] = np.asarray(boundary_data(x[:, 0], x[:, 1]), dtype=float)
    parents = {}
    for v, (p, q) in sorted(mesh.hanging.items()):
        if p in mesh.hanging or q in mesh.hanging:
            raise MeshError(f"hanging vertex {v} has a hanging parent")
        kind[v] = CONSTRAINED
        parents[v] = ((p, 0.5), (q, 0.5))
    index = np.full(V, -1, dtype=int)
    free = np.nonzero(kind == FREE)[0]
    index[free] = np.arange(len(free))
    return DofMap(kind, index, value, parents, len(free))


def consistent_gradients(geom, wts, glam):
    """Shift sampled gradients so the rule integrates each one exactly.

    The exact value is the boundary integral of ``lambda_i n``, which only
    involves the two edges at vertex ``i``.  Wachspress gradients are
    rational and no fixed rule is exact for them; after the shift the
    affine patch test holds to round-off on any polygon.
    """
    L = geom.edge_lengths[..., None] * geom.normals
    exact = 0.5 * (L + np.roll(L, 1, axis=-2))
    sampled = np.einsum("ep,epid->eid", wts, glam)
    area = wts.sum(axis=1)
    return glam + ((exact - sampled) / area[:, None, None])[:, None]


def _element_terms(mesh, f, quad_degree, correct=True):
    def work(item):
        n, ids = item
        conn, corners = mesh.group_corners(ids)
        geom = element_geometry(corners)
        if np.any(geom.area <= 0.0):
            raise SingularElement("element with non-positive area")
        pts, wts = polygon_rule_batch(corners, quad_degree)
        if not np.all(np.isfinite(wts)):
            raise QuadratureFailure("non-finite quadrature weights")
        lam, glam, _ = basis_batch(geom, pts, laplacian=False)
        if correct:
            glam = consistent_gradients(geom, wts, glam)
        K = np.einsum("ep,epid,epjd->eij", wts, glam, glam)
        F = None
        if f is not None:
            fv = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
            F = np.einsum("ep,ep,epi->ei", wts, fv, lam)
        return conn, K, F

    return ordered_map(work, element_chunks(mesh))


def assemble_full(mesh, f=None, quad_degree=DEFAULT_POLYGON_DEGREE, correct=True):
    """Unconstrained stiffness matrix and load vector over all vertices.

    ``correct`` applies :func:`consistent_gradients` to the element
    stiffness; it has no effect where the rule is already exact (triangles,
    parallelograms).
    """
    V = mesh.n_vertices
    rows, cols, vals = [], [], []
    load = np.zeros(V)
    for conn, K, F in _element_terms(mesh, f, quad_degree, correct):
        n = conn.shape[1]
        rows.append(np.repeat(conn, n, axis=1).ravel())
        cols.append(np.tile(conn, (1, n)).ravel())
        vals.append(K.ravel())
        if F is not None:
            np.add.at(load, conn.ravel(), F.ravel())
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(V, V),
    )
    A.sum_duplicates()
    return A, load


def assemble(mesh, dofmap, f=None, quad_degree=DEFAULT_POLYGON_DEGREE, correct=True) -> LinearSystem:
    """Galerkin system over the free vertices.

    Constrained rows/columns are distributed to their parents by the
    prolongation, Dirichlet values are moved to the right-hand side.
    """
    K, F = assemble_full(mesh, f, quad_degree, correct)
    P, u0 = dofmap.prolongation()
    A = (P.T @ K @ P).tocsr()
    A = 0.5 * (A + A.T)  # symmetric to round-off by construction; make it exact
    A = A.tocsr()
    A.sum_duplicates()
    b = P.T @ (F - K @ u0)
    return LinearSystem(A, np.asarray(b).ravel(), dofmap, K, F)


def solve_cg(system, rel_tol=1e-10, max_iter=None, x0=None, return_info=False):
    """Jacobi-preconditioned conjugate gradients.

    Stops once ``||b - A x||_2 <= rel_tol ||b||_2``.  Raises
    :class:`NoConvergence` with the achieved relative residual otherwise.
    """
    if isinstance(system, LinearSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    N = len(b)
    if max_iter is None:
        max_iter = int(20 * np.sqrt(N) + 200)
    x = np.zeros(N) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros(N)
        return (x, 0) if return_info else x
    dinv = 1.0 / A.diagonal()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    it = 0
    res = np.linalg.norm(r) / bnorm
    while res > rel_tol:
        if it >= max_iter:
            raise NoConvergence(it, res)
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r) / bnorm
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    # guard against drift of the recursive residual
    res_true = np.linalg.norm(b - A @ x) / bnorm
    if res_true > rel_tol:
        x, more = solve_cg((A, b), rel_tol, max_iter - it, x0=x, return_info=True)
        it += more
    return (x, it) if return_info else x


def reconstruct(free_values, dofmap, mesh=None) -> DiscreteSolution:
    P, u0 = dofmap.prolongation()
    values = P @ np.asarray(free_values, dtype=float) + u0
    return DiscreteSolution(values, id(mesh) if mesh is not None else 0)


def _coefficients(solution):
    return solution.values if isinstance(solution, DiscreteSolution) else np.asarray(solution)


def energy_error(mesh, solution, exact_gradient, quad_degree=DEFAULT_POLYGON_DEGREE,
                 per_element=False):
    """``|u - u_h|_{1,Omega}`` by element quadrature."""
    c = _coefficients(solution)
    out = np.zeros(mesh.n_elements)

    def work(item):
        n, ids = item
        conn, corners = mesh.group_corners(ids)
        pts, wts = polygon_rule_batch(corners, quad_degree)
        _, glam, _ = basis_batch(element_geometry(corners), pts, laplacian=False)
        guh = np.einsum("ei,epid->epd", c[conn], glam)
        gx, gy = exact_gradient(pts[..., 0], pts[..., 1])
        d2 = (gx - guh[..., 0]) ** 2 + (gy - guh[..., 1]) ** 2
        return ids, (wts * d2).sum(axis=1)

    for ids, vals in ordered_map(work, element_chunks(mesh)):
        out[ids] = vals
    if per_element:
        return out
    return float(np.sqrt(out.sum()))


def evaluate(mesh, solution, element, points):
    """``u_h`` at interior points of one element."""
    from .basis import eval_basis

    c = _coefficients(solution)
    vs = list(mesh.elements[element])
    geom = mesh.geometry(element)
    return np.array([eval_basis(geom, p).values @ c[vs] for p in np.atleast_2d(points)])
