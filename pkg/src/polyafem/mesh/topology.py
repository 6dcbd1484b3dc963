"""Polygonal mesh with facet-level topology and hanging-vertex bookkeeping."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from ..errors import (
    DanglingVertex,
    MeshError,
    NonConvexElement,
    OrientationError,
    TwoHangingNodesOnEdge,
)
from ..geometry import element_geometry, turning_crosses

BOUNDARY = -1

CONVEXITY_TOL = 1e-12  # times h_T^2
HANGING_TOL = 1e-10  # times h_T
MIDPOINT_TOL = 1e-12  # times edge length


@dataclass(frozen=True)
class Vertex:
    id: int
    position: np.ndarray
    kind: str  # "regular" | "hanging"
    parents: tuple = ()


@dataclass(frozen=True)
class Element:
    id: int
    vertex_ids: tuple
    refinement_level: int


@dataclass(frozen=True)
class Facet:
    id: int
    endpoints: tuple
    side_plus: int
    side_minus: int
    unit_normal: np.ndarray

    @property
    def is_boundary(self):
        return self.side_minus == BOUNDARY


class PolygonMesh:
    """Immutable mesh of strictly convex CCW polygons.

    Elements store only their geometric corners.  A hanging vertex sits at
    the midpoint of a coarse element's edge and splits that edge into two
    facets; it is a corner of the finer neighbours only.

    Facet arrays (``F`` facets, side 0 = plus, side 1 = minus):

    ``facet_vertices`` (F, 2)      endpoint ids, CCW with respect to the plus side
    ``facet_elements`` (F, 2)      element ids, ``BOUNDARY`` for a missing side
    ``facet_local_edge`` (F, 2)    local edge index of the facet in each side
    ``facet_t`` (F, 2, 2)          edge parameter of each endpoint on each side
    ``facet_normals`` (F, 2)       unit normal pointing from plus to minus
    """

    def __init__(self, vertices, elements, levels, hanging, hanging_owner, facets):
        self.vertices = vertices
        self.elements = elements
        self.levels = levels
        self.hanging = hanging
        self.hanging_owner = hanging_owner
        (
            self.facet_vertices,
            self.facet_elements,
            self.facet_local_edge,
            self.facet_t,
            self.element_facets,
        ) = facets
        p = vertices[self.facet_vertices[:, 0]]
        q = vertices[self.facet_vertices[:, 1]]
        d = q - p
        self.facet_lengths = np.hypot(d[:, 0], d[:, 1])
        self.facet_normals = np.column_stack([d[:, 1], -d[:, 0]]) / self.facet_lengths[:, None]

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_facets(self):
        return len(self.facet_vertices)

    # -- record views --------------------------------------------------------
    def vertex(self, i) -> Vertex:
        if i in self.hanging:
            return Vertex(i, self.vertices[i], "hanging", self.hanging[i])
        return Vertex(i, self.vertices[i], "regular")

    def element(self, i) -> Element:
        return Element(i, self.elements[i], int(self.levels[i]))

    def facet(self, i) -> Facet:
        plus, minus = self.facet_elements[i]
        return Facet(
            i,
            tuple(int(v) for v in self.facet_vertices[i]),
            int(plus),
            int(minus),
            self.facet_normals[i],
        )

    @property
    def facets(self):
        return [self.facet(i) for i in range(self.n_facets)]

    # -- derived data --------------------------------------------------------
    def element_coords(self, i):
        return self.vertices[list(self.elements[i])]

    def geometry(self, i):
        return element_geometry(self.element_coords(i))

    @cached_property
    def size_groups(self):
        """``{n: element ids}`` grouping elements by vertex count."""
        groups = {}
        for e, vs in enumerate(self.elements):
            groups.setdefault(len(vs), []).append(e)
        return {n: np.array(ids, dtype=int) for n, ids in sorted(groups.items())}

    def group_corners(self, ids):
        conn = np.array([self.elements[e] for e in ids], dtype=int)
        return conn, self.vertices[conn]

    @cached_property
    def interior_facets(self):
        return np.nonzero(self.facet_elements[:, 1] != BOUNDARY)[0]

    @cached_property
    def boundary_facets(self):
        return np.nonzero(self.facet_elements[:, 1] == BOUNDARY)[0]

    @cached_property
    def boundary_vertices(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.facet_vertices[self.boundary_facets].ravel()] = True
        return mask

    @cached_property
    def areas(self):
        return np.array([float(self.geometry(e).area) for e in range(self.n_elements)])

    @cached_property
    def diameters(self):
        out = np.empty(self.n_elements)
        for n, ids in self.size_groups.items():
            _, a = self.group_corners(ids)
            out[ids] = element_geometry(a).diameter
        return out

    def boundary_traversal(self, i):
        """Corner list of element ``i`` with hanging vertices spliced in."""
        out = []
        for f in self.element_facets[i]:
            side = 0 if self.facet_elements[f, 0] == i else 1
            v0, v1 = self.facet_vertices[f]
            out.append(int(v0 if side == 0 else v1))
        return out

    def vertex_patch_sizes(self):
        counts = np.zeros(self.n_vertices, dtype=int)
        for vs in self.elements:
            counts[list(vs)] += 1
        return counts

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def _validate_element(eid, coords):
    if len(coords) < 3:
        raise MeshError(f"element {eid} has fewer than 3 vertices")
    h = element_geometry(coords).diameter
    c = turning_crosses(coords)
    tol = CONVEXITY_TOL * h * h
    if np.all(c < -tol):
        raise OrientationError(eid)
    if np.any(c <= tol):
        raise NonConvexElement(eid)


def _detect_hanging(vertices, edges, edge_h):
    """Map edge index -> hanging vertex id lying strictly inside that edge."""
    tree = cKDTree(vertices)
    p = vertices[edges[:, 0]]
    q = vertices[edges[:, 1]]
    mid = 0.5 * (p + q)
    L = np.hypot(*(q - p).T)
    found = {}
    hits = tree.query_ball_point(mid, r=0.5 * L * (1.0 + 1e-9))
    for k, cand in enumerate(hits):
        if len(cand) <= 2:
            continue
        a, b = edges[k]
        inner = []
        d = q[k] - p[k]
        for v in cand:
            if v == a or v == b:
                continue
            x = vertices[v] - p[k]
            s = np.dot(x, d) / (L[k] ** 2)
            dist = abs(x[0] * d[1] - x[1] * d[0]) / L[k]
            if 0.0 < s < 1.0 and dist <= HANGING_TOL * edge_h[k]:
                inner.append((s, v))
        if not inner:
            continue
        if len(inner) > 1:
            raise TwoHangingNodesOnEdge((int(a), int(b)))
        s, v = inner[0]
        if np.linalg.norm(vertices[v] - mid[k]) > MIDPOINT_TOL * L[k]:
            raise MeshError(
                f"vertex {v} lies inside edge {(int(a), int(b))} but not at its midpoint"
            )
        found[k] = int(v)
    return found


def build_topology(vertices, elements, levels=None) -> PolygonMesh:
    """Validate elements and construct the facet table.

    ``elements`` lists corner ids counterclockwise.  Vertices lying inside
    another element's edge are detected geometrically and become hanging
    vertices whose parents are that edge's endpoints.
    """
    V = np.array(vertices, dtype=float).reshape(-1, 2)
    V.setflags(write=False)
    elems = tuple(tuple(int(v) for v in e) for e in elements)
    nV = len(V)
    used = np.zeros(nV, dtype=bool)
    for eid, e in enumerate(elems):
        if min(e) < 0 or max(e) >= nV:
            raise MeshError(f"element {eid} references a missing vertex")
        if len(set(e)) != len(e):
            raise MeshError(f"element {eid} repeats a vertex")
        _validate_element(eid, V[list(e)])
        used[list(e)] = True
    if not used.all():
        raise DanglingVertex(int(np.nonzero(~used)[0][0]))
    if levels is None:
        levels = np.zeros(len(elems), dtype=int)
    levels = np.asarray(levels, dtype=int)
    if len(levels) != len(elems):
        raise MeshError("levels length does not match element count")

    # every (element, local edge)
    owner, local, ends, edge_h = [], [], [], []
    hT = {}
    for eid, e in enumerate(elems):
        n = len(e)
        h = float(element_geometry(V[list(e)]).diameter)
        hT[eid] = h
        for k in range(n):
            owner.append(eid)
            local.append(k)
            ends.append((e[k], e[(k + 1) % n]))
            edge_h.append(h)
    ends = np.array(ends, dtype=int)
    hanging_in = _detect_hanging(V, ends, np.array(edge_h))

    hanging = {}
    hanging_owner = {}
    for k, m in hanging_in.items():
        a, b = int(ends[k, 0]), int(ends[k, 1])
        parents = (min(a, b), max(a, b))
        if m in hanging and hanging[m] != parents:
            raise MeshError(f"vertex {m} hangs on two different edges")
        hanging[m] = parents
        hanging_owner[m] = owner[k]

    # facets; keyed by sorted endpoint pair
    table = {}
    order = []
    for k in range(len(ends)):
        a, b = int(ends[k, 0]), int(ends[k, 1])
        eid, loc = owner[k], local[k]
        if k in hanging_in:
            m = hanging_in[k]
            pieces = [((a, m), (0.0, 0.5)), ((m, b), (0.5, 1.0))]
        else:
            pieces = [((a, b), (0.0, 1.0))]
        for (p, q), (t0, t1) in pieces:
            key = (p, q) if p < q else (q, p)
            if key not in table:
                table[key] = []
                order.append(key)
            table[key].append((eid, loc, p, q, t0, t1))

    F = len(order)
    fv = np.empty((F, 2), dtype=int)
    fe = np.full((F, 2), BOUNDARY, dtype=int)
    fl = np.full((F, 2), -1, dtype=int)
    ft = np.zeros((F, 2, 2))
    element_facets = [[] for _ in elems]
    for f, key in enumerate(order):
        sides = table[key]
        if len(sides) > 2:
            raise MeshError(f"facet {key} is shared by more than two elements")
        eid, loc, p, q, t0, t1 = sides[0]
        fv[f] = (p, q)
        fe[f, 0], fl[f, 0] = eid, loc
        ft[f, 0] = (t0, t1)
        element_facets[eid].append(f)
        if len(sides) == 2:
            eid2, loc2, p2, q2, s0, s1 = sides[1]
            if (p2, q2) != (q, p):
                raise MeshError(f"facet {key} orientation clash; overlapping elements?")
            fe[f, 1], fl[f, 1] = eid2, loc2
            # endpoint v0 = p is this side's q2
            ft[f, 1] = (s1, s0)
            element_facets[eid2].append(f)

    # order each element's facets along its CCW boundary
    sorted_facets = []
    for eid, fs in enumerate(element_facets):
        def sort_key(f, eid=eid):
            side = 0 if fe[f, 0] == eid else 1
            t = ft[f, side]
            return (fl[f, side], min(t))
        sorted_facets.append(np.array(sorted(fs, key=sort_key), dtype=int))

    for m in hanging:
        if hanging[m][0] in hanging or hanging[m][1] in hanging:
            # constraint chains are rejected; closure refinement prevents them
            raise MeshError(f"hanging vertex {m} has a hanging parent")

    return PolygonMesh(
        V, elems, levels, hanging, hanging_owner, (fv, fe, fl, ft, tuple(sorted_facets))
    )
