"""Deterministic file export: legacy VTK structured points, RFC-4180 CSV,
and JSON records.

Every file embeds the config hash for provenance.  Formatting is fully
deterministic (fixed float repr via ``repr``/``%.17g``, sorted JSON keys, no
timestamps) so identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import json

import numpy as np


def _fmt(x):
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


# ----------------------------------------------------------------------
# VTK legacy structured points (cell data)

def write_vtk_cells(path, fields, spacing, origin, config_hash=""):
    """Write cell-centered scalar/vector fields as legacy ASCII VTK.

    ``fields`` maps a name to an (n,n,n) real array or an (n,n,n,3) real
    vector array; complex input is split into ``name_re``/``name_im``.
    """
    split = {}
    for name, arr in fields.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            split[name + "_re"] = arr.real
            split[name + "_im"] = arr.imag
        else:
            split[name] = arr
    shapes = {a.shape[:3] for a in split.values()}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent field shapes {shapes}")
    nx, ny, nz = shapes.pop()
    lines = [
        "# vtk DataFile Version 3.0",
        f"limabs fields config={config_hash}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}",
        f"ORIGIN {_fmt(origin[0])} {_fmt(origin[1])} {_fmt(origin[2])}",
        f"SPACING {_fmt(spacing)} {_fmt(spacing)} {_fmt(spacing)}",
        f"CELL_DATA {nx * ny * nz}",
    ]
    for name in sorted(split):
        arr = split[name]
        # VTK expects x varying fastest; arrays are indexed [ix, iy, iz]
        if arr.ndim == 3:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            flat = arr.transpose(2, 1, 0).reshape(-1)
            lines.extend(_fmt(v) for v in flat)
        elif arr.ndim == 4 and arr.shape[3] == 3:
            lines.append(f"VECTORS {name} double")
            flat = arr.transpose(2, 1, 0, 3).reshape(-1, 3)
            lines.extend(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}"
                         for v in flat)
        else:
            raise ValueError(f"field {name!r} has unsupported shape "
                             f"{arr.shape}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_field_vtk(path, u, op, config_hash=""):
    """Colocate a staggered field pair to cell centers and export it."""
    ec, hc = op.colocate(u)
    grid = op.grid
    n = grid.n
    fields = {"E": ec, "H": hc}
    origin = (-0.5 * n * grid.h,) * 3
    write_vtk_cells(path, fields, grid.h, origin, config_hash=config_hash)


# ----------------------------------------------------------------------
# RFC-4180 CSV

def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    if isinstance(v, (complex, np.complexfloating)):
        return f"{_fmt(v.real)}{'+' if v.imag >= 0 else '-'}{_fmt(abs(v.imag))}j"
    s = str(v)
    if any(c in s for c in ',"\r\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def write_csv(path, header, rows, config_hash=""):
    """Write an RFC-4180 CSV (CRLF line endings, quoted specials).

    The config hash rides along as a ``config_hash`` column so the table is
    self-describing without breaking CSV tooling.
    """
    head = list(header) + ["config_hash"]
    out = [",".join(_csv_cell(h) for h in head)]
    for row in rows:
        vals = [row[h] for h in header] if isinstance(row, dict) else list(row)
        out.append(",".join(_csv_cell(v) for v in vals + [config_hash]))
    with open(path, "w", newline="") as fh:
        fh.write("\r\n".join(out) + "\r\n")


# ----------------------------------------------------------------------
# JSON records

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.complexfloating, complex)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json_record(path, record, config_hash=""):
    """Write a JSON record with sorted keys and the config hash embedded."""
    body = _jsonable(dict(record))
    body["config_hash"] = config_hash
    with open(path, "w", newline="\n") as fh:
        json.dump(body, fh, sort_keys=True, indent=2)
        fh.write("\n")


def grid_summary(grid, dofs, labeling):
    """JSON-ready summary of a grid/dof/labeling combination."""
    return {
        "h": grid.h,
        "n": grid.n,
        "r0": grid.r0,
        "r_max": grid.r_max,
        "obstacle_cells": int(np.count_nonzero(grid.mask)),
        "n_edge_dofs": int(dofs.n_edge),
        "n_face_dofs": int(dofs.n_face),
        "n_pec_faces": int(labeling.n_pec),
        "n_pmc_faces": int(labeling.n_pmc),
    }
