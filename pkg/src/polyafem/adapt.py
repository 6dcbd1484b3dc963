"""Doerfler marking, polytree refinement and the solve-estimate-mark-refine loop."""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import assemble, build_dofmap, energy_error, reconstruct, solve_cg
from .errors import AllZeroIndicators, NonConvexChild, PolyAFEMError
from .estimate import estimate_all
from .examples import get_example
from .geometry import element_geometry, is_strictly_convex
from .mesh import build_topology, generate_initial_mesh

DEFAULT_THETA = 0.6
MODES = ("uniform", "adaptive")
# how uniform mode builds its next mesh
UNIFORM_KINDS = ("regenerate", "polytree")


@dataclass(frozen=True)
class MarkSet:
    elements: tuple
    theta: float
    captured: float  # marked share of the total squared estimator

    def __len__(self):
        return len(self.elements)

    def __contains__(self, e):
        return e in set(self.elements)


def dorfler_mark(eta_sq, theta=DEFAULT_THETA) -> MarkSet:
    """Smallest set of largest indicators holding a ``theta`` share of the total.

    Ties in the indicator value are broken by ascending element id.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    eta_sq = np.asarray(eta_sq, dtype=float)
    total = eta_sq.sum()
    if not total > 0.0:
        raise AllZeroIndicators("all indicators vanish")
    order = np.lexsort((np.arange(len(eta_sq)), -eta_sq))
    csum = np.cumsum(eta_sq[order])
    k = int(np.searchsorted(csum, theta * total, side="left")) + 1
    k = min(k, len(order))
    chosen = order[:k]
    return MarkSet(tuple(sorted(int(e) for e in chosen)), theta, float(csum[k - 1] / total))


def mark_all(mesh) -> MarkSet:
    return MarkSet(tuple(range(mesh.n_elements)), 1.0, 1.0)


# -- refinement -----------------------------------------------------------------

@dataclass
class RefinementPlan:
    marked: tuple  # as requested
    closure: tuple  # extra elements forced by the one-hanging-node rule
    children: dict = field(default_factory=dict)  # parent id -> list of corner-id lists

    @property
    def refined(self):
        return tuple(sorted(set(self.marked) | set(self.closure)))


def closure(mesh, marked):
    """Add coarse neighbours of marked elements that have a hanging corner.

    Refining an element with a hanging corner would put a second hanging
    vertex on the coarse edge, so the owner of that edge is refined too.
    Repeats until nothing changes.
    """
    todo = set(int(e) for e in marked)
    extra = set()
    frontier = sorted(todo)
    while frontier:
        new = []
        for e in frontier:
            for v in mesh.elements[e]:
                o = mesh.hanging_owner.get(v)
                if o is not None and o not in todo:
                    todo.add(o)
                    extra.add(o)
                    new.append(o)
        frontier = sorted(new)
    return tuple(sorted(extra))


def child_polygons(corners):
    """Polytree split of one convex polygon, in coordinates.

    Returns the edge midpoints ``m``, the inner points ``x`` and the child
    index pattern on the local numbering ``a = 0..n-1``, ``m = n..2n-1``,
    ``x = 2n..3n-1``: pentagon ``i`` is ``[a_i, m_i, x_i, x_{i-1}, m_{i-1}]``
    and the last child is the inner polygon ``[x_0, ..., x_{n-1}]``.
    """
    a = np.asarray(corners, dtype=float)
    n = len(a)
    m = 0.5 * (a + np.roll(a, -1, axis=0))
    xc = a.mean(axis=0)
    x = 0.5 * (xc + m)
    kids = []
    for i in range(n):
        im = (i - 1) % n
        kids.append([i, n + i, 2 * n + i, 2 * n + im, n + im])
    kids.append([2 * n + i for i in range(n)])
    return m, x, kids


def refine(mesh, markset, return_plan=False):
    """Polytree refinement of the marked elements plus their closure."""
    marked = tuple(markset.elements) if isinstance(markset, MarkSet) else tuple(int(e) for e in markset)
    for e in marked:
        if not 0 <= e < mesh.n_elements:
            raise ValueError(f"marked element {e} does not exist")
    extra = closure(mesh, marked)
    plan = RefinementPlan(tuple(sorted(set(marked))), extra)
    refine_set = set(plan.refined)

    on_edge = {pq: v for v, pq in mesh.hanging.items()}
    verts = [p for p in mesh.vertices]
    midpoint = {}

    def mid(p, q):
        key = (p, q) if p < q else (q, p)
        if key in on_edge:
            return on_edge[key]
        if key not in midpoint:
            midpoint[key] = len(verts)
            verts.append(0.5 * (mesh.vertices[p] + mesh.vertices[q]))
        return midpoint[key]

    elements, levels = [], []
    for e, vs in enumerate(mesh.elements):
        lev = int(mesh.levels[e])
        if e not in refine_set:
            elements.append(vs)
            levels.append(lev)
            continue
        n = len(vs)
        coords = mesh.vertices[list(vs)]
        _, x, kids = child_polygons(coords)
        local = list(vs) + [mid(vs[i], vs[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            local.append(len(verts))
            verts.append(x[i])
        plan.children[e] = []
        for k in kids:
            child = [local[j] for j in k]
            if not is_strictly_convex(np.array([verts[j] for j in child])):
                raise NonConvexChild(e)
            elements.append(tuple(child))
            levels.append(lev + 1)
            plan.children[e].append(child)
    new = build_topology(np.array(verts), elements, levels)
    return (new, plan) if return_plan else new


# -- loop -----------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    example: int = 1
    mode: str = "adaptive"
    theta: float = DEFAULT_THETA
    max_dof: int = 30000
    style: str = "polygonal"
    resolution: int = 4
    seed: int = 0
    quad_degree: int = 8
    rel_tol: float = 1e-10
    max_iter: int = 60
    out: Optional[str] = None
    timings: bool = True  # False writes wall_ms = 0 so reruns are byte-identical
    # "regenerate": level k is the initial mesh at resolution * 2**k
    # "polytree": every element refined by the polytree split
    uniform_refinement: str = "regenerate"

    def validate(self):
        if self.example not in (1, 2, 3):
            raise ValueError("example must be 1, 2 or 3")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.uniform_refinement not in UNIFORM_KINDS:
            raise ValueError(f"uniform_refinement must be one of {UNIFORM_KINDS}")


@dataclass
class AdaptRecord:
    iter: int
    dof: int
    h1_error: float
    eta_h: float
    order_error: float
    order_eta: float
    effectivity: float
    n_elements: int
    n_marked: int
    wall_ms: float

    FIELDS = (
        "iter", "dof", "h1_error", "eta_h", "order_error", "order_eta",
        "effectivity", "n_elements", "n_marked", "wall_ms",
    )

    def row(self):
        return [getattr(self, k) for k in self.FIELDS]


def convergence_order(dof0, e0, dof1, e1):
    """Decay order ``log(e0/e1) / log(Dof1/Dof0)``."""
    if dof0 <= 0 or dof1 <= 0 or dof1 == dof0 or e0 <= 0 or e1 <= 0:
        return math.nan
    return math.log(e0 / e1) / math.log(dof1 / dof0)


def fit_slope(dofs, values, last=None):
    """Least-squares slope of ``log value`` against ``log Dof``."""
    d = np.asarray(dofs, dtype=float)
    v = np.asarray(values, dtype=float)
    if last is not None:
        d, v = d[-last:], v[-last:]
    if len(d) < 2:
        return math.nan
    return float(np.polyfit(np.log(d), np.log(v), 1)[0])


@dataclass
class LevelState:
    """Everything computed on one mesh of the loop, passed to ``on_level``."""

    record: AdaptRecord
    mesh: object
    solution: object
    estimate: object
    marked: Optional[MarkSet]


class LoopError(PolyAFEMError):
    def __init__(self, iteration, cause):
        super().__init__(f"iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause


def initial_mesh(config, level=0):
    ex = get_example(config.example)
    return generate_initial_mesh(
        ex.domain, config.style, config.resolution * 2**level, config.seed
    )


def solve_level(mesh, example, quad_degree=8, rel_tol=1e-10, dofmap=None):
    if dofmap is None:
        dofmap = build_dofmap(mesh, example.g)
    system = assemble(mesh, dofmap, example.f, quad_degree)
    x = solve_cg(system, rel_tol=rel_tol)
    return dofmap, reconstruct(x, dofmap, mesh)


def adaptive_loop(config, mesh=None, on_level=None):
    """Run solve, estimate, mark and refine until the Dof budget is spent.

    A refined mesh is solved only if its Dof count stays within
    ``config.max_dof``; the loop also stops after ``config.max_iter`` solves.
    ``on_level`` receives a :class:`LevelState` after every solve.
    """
    config.validate()
    ex = get_example(config.example)
    regenerate = config.mode == "uniform" and config.uniform_refinement == "regenerate"
    if mesh is None:
        mesh = initial_mesh(config)
    elif regenerate:
        raise ValueError("a custom starting mesh needs uniform_refinement='polytree'")
    records = []
    for it in range(config.max_iter):
        t0 = time.perf_counter()
        try:
            dofmap = build_dofmap(mesh, ex.g)
            if it > 0 and dofmap.n_free > config.max_dof:
                break
            _, sol = solve_level(mesh, ex, config.quad_degree, config.rel_tol, dofmap)
            est = estimate_all(mesh, sol, ex.f, config.quad_degree)
            err = energy_error(mesh, sol, ex.gradient, config.quad_degree)
            last = it == config.max_iter - 1
            marks = None
            if not last:
                marks = mark_all(mesh) if config.mode == "uniform" else dorfler_mark(est.eta_sq, config.theta)
        except PolyAFEMError as exc:
            raise LoopError(it, exc) from exc
        eta = est.eta
        if records:
            p = records[-1]
            oe = convergence_order(p.dof, p.h1_error, dofmap.n_free, err)
            oh = convergence_order(p.dof, p.eta_h, dofmap.n_free, eta)
        else:
            oe = oh = math.nan
        rec = AdaptRecord(
            it, dofmap.n_free, err, eta, oe, oh, eta / err if err > 0 else math.nan,
            mesh.n_elements, len(marks) if marks else 0,
            0.0,
        )
        state = LevelState(rec, mesh, sol, est, marks)
        if marks is not None:
            try:
                mesh = initial_mesh(config, it + 1) if regenerate else refine(mesh, marks)
            except PolyAFEMError as exc:
                raise LoopError(it, exc) from exc
        if config.timings:
            rec.wall_ms = 1000.0 * (time.perf_counter() - t0)
        records.append(rec)
        if on_level is not None:
            on_level(state)
        if marks is None:
            break
    return records
