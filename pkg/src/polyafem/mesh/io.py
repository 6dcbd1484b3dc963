"""JSON mesh files.

Schema::

    {"elements": [[v0, v1, ...], ...],
     "hanging": [[child, parentA, parentB], ...],
     "levels": [k0, k1, ...],
     "vertices": [[x, y], ...]}

``levels`` (refinement level per element) is optional on input.

Keys are sorted and floats carry 17 significant digits, so equal meshes give
equal bytes.
"""

import json

from ..errors import MeshError
from .topology import build_topology


def _num(x):
    return format(float(x), ".17g")


def mesh_to_json(mesh) -> str:
    elems = ",".join("[" + ",".join(str(v) for v in e) + "]" for e in mesh.elements)
    hang = ",".join(
        f"[{c},{p},{q}]" for c, (p, q) in sorted(mesh.hanging.items())
    )
    levels = ",".join(str(int(k)) for k in mesh.levels)
    verts = ",".join(f"[{_num(x)},{_num(y)}]" for x, y in mesh.vertices)
    return f'{{"elements":[{elems}],"hanging":[{hang}],"levels":[{levels}],"vertices":[{verts}]}}\n'


def write_mesh(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(mesh_to_json(mesh))


def mesh_from_json(text):
    data = json.loads(text)
    missing = {"vertices", "elements"} - set(data)
    if missing:
        raise MeshError(f"mesh file lacks keys {sorted(missing)}")
    mesh = build_topology(data["vertices"], data["elements"], data.get("levels"))
    declared = {int(c): tuple(sorted((int(p), int(q)))) for c, p, q in data.get("hanging", [])}
    if declared != mesh.hanging:
        raise MeshError("declared hanging vertices disagree with the geometry")
    return mesh


def read_mesh(path):
    with open(path, encoding="utf-8") as fh:
        return mesh_from_json(fh.read())
