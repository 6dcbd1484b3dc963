from .generators import domain_area, generate_initial_mesh
from .io import mesh_from_json, mesh_to_json, read_mesh, write_mesh
from .regularity import RegularityReport, polygon_metrics, regularity_report
from .topology import (
    BOUNDARY,
    Element,
    Facet,
    PolygonMesh,
    Vertex,
    build_topology,
)

__all__ = [
    "BOUNDARY",
    "Element",
    "Facet",
    "PolygonMesh",
    "RegularityReport",
    "Vertex",
    "build_topology",
    "domain_area",
    "generate_initial_mesh",
    "mesh_from_json",
    "mesh_to_json",
    "polygon_metrics",
    "read_mesh",
    "regularity_report",
    "write_mesh",
]
