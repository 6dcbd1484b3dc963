"""Deterministic initial meshes on the unit square and the L-shaped domain."""

import numpy as np
from scipy.spatial import Voronoi

from ..errors import DegenerateCell, MeshError
from ..geometry import element_geometry
from .topology import build_topology

DOMAINS = ("unit_square", "l_shape")
STYLES = ("grid", "polygonal")
LLOYD_ITERATIONS = 10
SHORT_EDGE_FRACTION = 0.25


def domain_area(domain):
    return {"unit_square": 1.0, "l_shape": 3.0}[domain]


def _grid(domain, k):
    if domain == "unit_square":
        x0, y0, nx, ny = 0.0, 0.0, k, k
        keep = lambda i, j: True  # noqa: E731
    else:
        x0, y0, nx, ny = -1.0, -1.0, 2 * k, 2 * k
        # drop cells inside [0, 1) x (-1, 0]
        keep = lambda i, j: not (i >= k and j < k)  # noqa: E731
    h = 1.0 / k
    ids = {}
    verts = []

    def vid(i, j):
        if (i, j) not in ids:
            ids[(i, j)] = len(verts)
            verts.append((x0 + i * h, y0 + j * h))
        return ids[(i, j)]

    elems = []
    for j in range(ny):
        for i in range(nx):
            if keep(i, j):
                elems.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return np.array(verts), elems


def _clip_cells(seeds):
    """Voronoi cells of ``seeds`` clipped to the unit square by reflection."""
    x, y = seeds[:, 0], seeds[:, 1]
    mirrored = np.vstack(
        [
            seeds,
            np.column_stack([-x, y]),
            np.column_stack([2.0 - x, y]),
            np.column_stack([x, -y]),
            np.column_stack([x, 2.0 - y]),
        ]
    )
    vor = Voronoi(mirrored)
    V = vor.vertices.copy()
    for c in (0, 1):
        for b in (0.0, 1.0):
            V[np.abs(V[:, c] - b) < 1e-10, c] = b
    cells = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi cell inside the square")
        c = V[region]
        ang = np.arctan2(c[:, 1] - seeds[i, 1], c[:, 0] - seeds[i, 0])
        cells.append([region[k] for k in np.argsort(ang)])
    return V, cells


def _centroids(V, cells):
    out = np.empty((len(cells), 2))
    for i, c in enumerate(cells):
        out[i] = element_geometry(V[c]).centroid
    return out


def _on_boundary(p, tol=1e-12):
    return int(p[0] < tol) + int(p[0] > 1 - tol) + int(p[1] < tol) + int(p[1] > 1 - tol)


def _collapse_short_edges(V, cells, min_len):
    """Merge endpoints of edges shorter than ``min_len``; boundary wins."""
    parent = list(range(len(V)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    pos = V.copy()
    weight = np.array([_on_boundary(p) for p in V], dtype=int)
    for c in cells:
        n = len(c)
        for k in range(n):
            a, b = find(c[k]), find(c[(k + 1) % n])
            if a == b or np.linalg.norm(pos[a] - pos[b]) >= min_len:
                continue
            wa, wb = weight[a], weight[b]
            if wa == wb:
                keep = 0.5 * (pos[a] + pos[b]) if wa <= 1 else pos[a]
            else:
                keep = pos[a] if wa > wb else pos[b]
            if wa == 1 and wb == 1 and _on_boundary(keep) == 0:
                # two boundary vertices on different sides: leave them
                continue
            parent[b] = a
            pos[a] = keep
            weight[a] = max(wa, wb)
    new_cells = []
    for c in cells:
        out = []
        for v in c:
            r = find(v)
            if not out or out[-1] != r:
                out.append(r)
        if len(out) > 1 and out[0] == out[-1]:
            out.pop()
        new_cells.append(out)
    used = sorted({v for c in new_cells for v in c})
    remap = {v: i for i, v in enumerate(used)}
    return pos[used], [[remap[v] for v in c] for c in new_cells]


def _cvt_unit_square(n_seeds, seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((n_seeds, 2))
    for _ in range(LLOYD_ITERATIONS):
        V, cells = _clip_cells(pts)
        pts = _centroids(V, cells)
    V, cells = _clip_cells(pts)
    # drop Voronoi vertices that no clipped cell uses
    used = sorted({v for c in cells for v in c})
    remap = {v: i for i, v in enumerate(used)}
    V = V[used]
    cells = [[remap[v] for v in c] for c in cells]
    V, cells = _collapse_short_edges(V, cells, SHORT_EDGE_FRACTION / np.sqrt(n_seeds))
    for c in cells:
        if len(c) < 3 or element_geometry(V[c]).area < 1e-12:
            raise DegenerateCell("Voronoi cell collapsed during cleanup")
    return V, cells


def _merge_copies(blocks):
    """Concatenate (vertices, cells) blocks, identifying coincident vertices."""
    verts, elems, index = [], [], {}
    for V, cells in blocks:
        local = []
        for p in V:
            key = (round(float(p[0]), 12), round(float(p[1]), 12))
            if key not in index:
                index[key] = len(verts)
                verts.append(p)
            local.append(index[key])
        elems.extend([[local[v] for v in c] for c in cells])
    return np.array(verts), elems


def _polygonal(domain, resolution, seed):
    V, cells = _cvt_unit_square(resolution * resolution, seed)
    if domain == "unit_square":
        return V, cells
    # L-shape: the unit-square mesh in (0,1)^2, mirrored across x = 0 into
    # (-1,0)x(0,1) and once more across y = 0 into (-1,0)x(-1,0)
    mx = V * np.array([-1.0, 1.0])
    my = V * np.array([-1.0, -1.0])
    rev = [c[::-1] for c in cells]
    return _merge_copies([(V, cells), (mx, rev), (my, cells)])


def generate_initial_mesh(domain="unit_square", style="grid", resolution=4, seed=0):
    if domain not in DOMAINS:
        raise ValueError(f"unknown domain {domain!r}")
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if style == "grid":
        V, cells = _grid(domain, resolution)
    else:
        V, cells = _polygonal(domain, resolution, seed)
    area = domain_area(domain)
    for c in cells:
        if element_geometry(V[c]).area < 1e-12 * area:
            raise DegenerateCell("cell area below 1e-12 |domain|")
    return build_topology(V, cells)
