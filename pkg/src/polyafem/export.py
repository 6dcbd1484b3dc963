"""Legacy VTK and SVG output for polygon meshes."""

from pathlib import Path

import numpy as np

from .errors import IoError

VTK_POLYGON = 7


def _fmt(x):
    return "%.17g" % float(x)


def export_vtk(mesh, path, solution=None, indicators=None, title="polyafem mesh"):
    """Write an ASCII legacy-format unstructured grid.

    Cells are VTK polygons whose connectivity walks the full boundary, so a
    coarse cell lists the hanging vertices on its edges.  ``solution`` adds
    POINT_DATA ``u_h``; ``indicators`` adds CELL_DATA ``eta_sq``.
    """
    cells = [mesh.boundary_traversal(e) for e in range(mesh.n_elements)]
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines.extend(f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices)
    size = sum(len(c) + 1 for c in cells)
    lines.append(f"CELLS {len(cells)} {size}")
    lines.extend(" ".join(str(v) for v in [len(c)] + c) for c in cells)
    lines.append(f"CELL_TYPES {len(cells)}")
    lines.extend(str(VTK_POLYGON) for _ in cells)
    if solution is not None:
        values = solution.values if hasattr(solution, "values") else np.asarray(solution)
        if len(values) != mesh.n_vertices:
            raise IoError("solution length does not match vertex count")
        lines += [f"POINT_DATA {mesh.n_vertices}", "SCALARS u_h double 1", "LOOKUP_TABLE default"]
        lines.extend(_fmt(v) for v in values)
    if indicators is not None:
        eta = indicators.eta_sq if hasattr(indicators, "eta_sq") else np.asarray(indicators)
        if len(eta) != mesh.n_elements:
            raise IoError("indicator length does not match element count")
        lines += [f"CELL_DATA {mesh.n_elements}", "SCALARS eta_sq double 1", "LOOKUP_TABLE default"]
        lines.extend(_fmt(v) for v in eta)
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_vtk(path):
    """Minimal reader for files written by :func:`export_vtk`.

    Returns a dict with ``points`` (V, 2), ``cells`` (list of id lists),
    ``cell_types`` and optional ``point_data`` / ``cell_data`` arrays.
    """
    try:
        tokens = Path(path).read_text().split("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    out = {"point_data": {}, "cell_data": {}}
    i = 0
    section = None
    while i < len(tokens):
        line = tokens[i].strip()
        parts = line.split()
        if not parts:
            i += 1
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            pts = np.array([tokens[i + 1 + k].split() for k in range(n)], dtype=float)
            out["points"] = pts[:, :2]
            i += n + 1
        elif key == "CELLS":
            n = int(parts[1])
            cells = []
            for k in range(n):
                row = [int(v) for v in tokens[i + 1 + k].split()]
                if row[0] != len(row) - 1:
                    raise IoError("cell connectivity length mismatch")
                cells.append(row[1:])
            out["cells"] = cells
            i += n + 1
        elif key == "CELL_TYPES":
            n = int(parts[1])
            out["cell_types"] = [int(tokens[i + 1 + k]) for k in range(n)]
            i += n + 1
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = ("point_data" if key == "POINT_DATA" else "cell_data", int(parts[1]))
            i += 1
        elif key == "SCALARS":
            name = parts[1]
            kind, n = section
            start = i + 2  # skip LOOKUP_TABLE
            out[kind][name] = np.array([float(tokens[start + k]) for k in range(n)])
            i = start + n
        else:
            i += 1
    return out


def export_svg(mesh, path, highlight=None, width=600, stroke=0.6, fill="#f4a259"):
    """Deterministic SVG drawing of element outlines.

    ``highlight`` is an iterable of element ids drawn filled.  The viewport
    is taken from the mesh bounding box, with y pointing up.
    """
    lo, hi = mesh.bounds()
    span = float(max(hi - lo))
    pad = 0.02 * span
    scale = width / (span + 2 * pad)
    height = int(round((float(hi[1] - lo[1]) + 2 * pad) * scale))
    wpx = int(round((float(hi[0] - lo[0]) + 2 * pad) * scale))
    marked = set(int(e) for e in highlight) if highlight is not None else set()

    def xy(p):
        x = (p[0] - lo[0] + pad) * scale
        y = (hi[1] - p[1] + pad) * scale
        return f"{x:.3f},{y:.3f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{wpx}" height="{height}" '
        f'viewBox="0 0 {wpx} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for e, vs in enumerate(mesh.elements):
        pts = " L ".join(xy(mesh.vertices[v]) for v in vs)
        f = fill if e in marked else "none"
        out.append(f'<path d="M {pts} Z" fill="{f}" stroke="black" stroke-width="{stroke}"/>')
    out.append("</svg>")
    try:
        Path(path).write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def svg_path_centers(path):
    """Vertex averages of every ``<path>`` in an SVG written by :func:`export_svg`,
    in drawing coordinates."""
    centers = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("<path"):
            d = line.split('d="')[1].split('"')[0]
            coords = [c for c in d.replace("M", "").replace("Z", "").split("L")]
            xy = np.array([[float(v) for v in c.strip().split(",")] for c in coords])
            centers.append(xy.mean(axis=0))
    return np.array(centers)
