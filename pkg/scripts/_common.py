"""Shared scene builder for the experiment scripts."""

from limabs.grid import build_grid, classify_boundary
from limabs.materials import build_material
from limabs.operators import DiscreteMaxwellOperator


def make_scene(h=0.5, n=16, obstacle={"kind": "sphere", "radius": 0.6},
               r0=1.0, rule="all_pec", material=None):
    grid = build_grid(h=h, n=n, obstacle=obstacle, r0=r0)
    labeling = classify_boundary(grid, rule)
    mat = build_material(material or {"kind": "vacuum"}, grid)
    op = DiscreteMaxwellOperator(grid, labeling, mat)
    return grid, labeling, mat, op
