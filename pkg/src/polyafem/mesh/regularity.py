"""Shape-regularity metrics (aspect ratio, vertex-edge distances, angles)."""

from dataclasses import dataclass

import numpy as np

from ..geometry import chebyshev_radius, element_geometry, interior_angles


@dataclass
class RegularityReport:
    h: np.ndarray
    rho: np.ndarray
    h_star: np.ndarray
    theta_min: np.ndarray
    theta_max: np.ndarray
    n_vertices: np.ndarray
    C1: float  # max h_T / rho_T
    C2: float  # min h_*T / h_T
    theta_star_upper: float
    theta_star_lower: float
    N: int
    M: int  # largest vertex patch

    def satisfies(self, C1=None, C2=None, theta_lower=None, theta_upper=None):
        ok = True
        if C1 is not None:
            ok &= self.C1 <= C1
        if C2 is not None:
            ok &= self.C2 >= C2
        if theta_lower is not None:
            ok &= self.theta_star_lower >= theta_lower
        if theta_upper is not None:
            ok &= self.theta_star_upper <= theta_upper
        return bool(ok)


def min_vertex_edge_distance(corners):
    """``h_*T = min_i min_{j != i-1, i} h_j(a_i)``."""
    g = element_geometry(corners)
    d = g.vertex_edge_distances()
    n = g.n
    mask = np.ones((n, n), dtype=bool)
    i = np.arange(n)
    mask[i, i] = False
    mask[i, (i - 1) % n] = False
    return float(d[mask].min()) if mask.any() else float("inf")


def polygon_metrics(corners):
    g = element_geometry(corners)
    r, _ = chebyshev_radius(corners)
    ang = interior_angles(corners)
    return float(g.diameter), 2.0 * r, min_vertex_edge_distance(corners), ang


def regularity_report(mesh) -> RegularityReport:
    E = mesh.n_elements
    h = np.empty(E)
    rho = np.empty(E)
    hs = np.empty(E)
    tmin = np.empty(E)
    tmax = np.empty(E)
    nv = np.empty(E, dtype=int)
    for e in range(E):
        c = mesh.element_coords(e)
        h[e], rho[e], hs[e], ang = polygon_metrics(c)
        tmin[e], tmax[e] = ang.min(), ang.max()
        nv[e] = len(c)
    return RegularityReport(
        h, rho, hs, tmin, tmax, nv,
        C1=float((h / rho).max()),
        C2=float((hs / h).min()),
        theta_star_upper=float(tmax.max()),
        theta_star_lower=float(tmin.min()),
        N=int(nv.max()),
        M=int(mesh.vertex_patch_sizes().max()),
    )
