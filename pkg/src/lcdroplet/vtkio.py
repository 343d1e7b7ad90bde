"""Legacy ASCII VTK output for meshes and nodal fields."""
from __future__ import annotations

import os

import numpy as np

from .mesh import TriMesh

VTK_TRIANGLE = 5


def write_vtk(path, mesh: TriMesh, point_scalars=None, point_vectors=None,
              title="lcdroplet fields"):
    """Write an unstructured-grid VTK file with optional nodal data.

    ``point_scalars`` and ``point_vectors`` map field names to arrays of
    shape (n_nodes,) and (n_nodes, 2) respectively.
    """
    point_scalars = point_scalars or {}
    point_vectors = point_vectors or {}
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)

    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    for p in mesh.nodes:
        lines.append(f"{p[0]:.17g} {p[1]:.17g} 0")
    ne = mesh.n_elements
    lines.append(f"CELLS {ne} {4 * ne}")
    for tri in mesh.elements:
        lines.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    lines.append(f"CELL_TYPES {ne}")
    lines.extend([str(VTK_TRIANGLE)] * ne)

    if point_scalars or point_vectors:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
    for name, values in point_scalars.items():
        values = np.asarray(values)
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.17g}" for v in values)
    for name, values in point_vectors.items():
        values = np.asarray(values)
        lines.append(f"VECTORS {name} double")
        lines.extend(f"{v[0]:.17g} {v[1]:.17g} 0" for v in values)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
