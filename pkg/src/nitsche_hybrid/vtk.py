"""Legacy ASCII VTK output for triangle meshes."""
from __future__ import annotations

import numpy as np

VTK_TRIANGLE = 5


def write_vtk(path, vertices, triangles, point_data=None, title="nitsche hybrid"):
    """Write an UNSTRUCTURED_GRID with scalar ``POINT_DATA`` arrays."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(v)} double",
    ]
    lines += [f"{x!r} {y!r} 0.0" for x, y in v.tolist()]
    lines.append(f"CELLS {len(t)} {4 * len(t)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in t.tolist()]
    lines.append(f"CELL_TYPES {len(t)}")
    lines += [str(VTK_TRIANGLE)] * len(t)
    if point_data:
        lines.append(f"POINT_DATA {len(v)}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if len(values) != len(v):
                raise ValueError(f"point data {name!r} has {len(values)} values for {len(v)} points")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [repr(x) for x in values.tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_points(path):
    """Points, triangles and point data of a file written by ``write_vtk``."""
    with open(path) as fh:
        tok = fh.read().split("\n")
    i = 0
    pts = tris = None
    data = {}
    while i < len(tok):
        line = tok[i]
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            pts = np.array([list(map(float, s.split()[:2])) for s in tok[i + 1 : i + 1 + n]])
            i += n
        elif line.startswith("CELLS "):
            n = int(line.split()[1])
            tris = np.array([list(map(int, s.split()[1:])) for s in tok[i + 1 : i + 1 + n]])
            i += n
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            n = len(pts)
            data[name] = np.array([float(s) for s in tok[i + 2 : i + 2 + n]])
            i += n + 1
        i += 1
    return pts, tris, data
