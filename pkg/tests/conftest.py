"""Shared fixtures: small scenes that many test modules reuse."""

import numpy as np
import pytest

from limabs.grid import build_grid, build_dof_maps, classify_boundary
from limabs.materials import build_material
from limabs.operators import DiscreteMaxwellOperator, FieldPair


def make_scene(h=0.5, n=16, obstacle={"kind": "sphere", "radius": 0.6},
               r0=1.0, rule="all_pec", material=None):
    grid = build_grid(h=h, n=n, obstacle=obstacle, r0=r0)
    labeling = classify_boundary(grid, rule)
    mat = build_material(material or {"kind": "vacuum"}, grid)
    op = DiscreteMaxwellOperator(grid, labeling, mat)
    return grid, labeling, mat, op


def random_pair(dofs, rng):
    return FieldPair(
        rng.standard_normal(dofs.n_edge) + 1j * rng.standard_normal(dofs.n_edge),
        rng.standard_normal(dofs.n_face) + 1j * rng.standard_normal(dofs.n_face),
        dofs)


def bump_pair(dofs, rng, n_bumps=4, width=0.6, box=1.2):
    """Smooth compactly supported random pair (shared bump centers)."""
    pe, pf = dofs.edge_dof_points(), dofs.face_dof_points()
    e = np.zeros(dofs.n_edge, complex)
    h = np.zeros(dofs.n_face, complex)
    for _ in range(n_bumps):
        c = rng.uniform(-box, box, 3)
        re = np.linalg.norm(pe - c, axis=1)
        rf = np.linalg.norm(pf - c, axis=1)
        ce = rng.standard_normal() + 1j * rng.standard_normal()
        ch = rng.standard_normal() + 1j * rng.standard_normal()
        e += ce * np.exp(-(re / width) ** 2) * (re < 3 * width)
        h += ch * np.exp(-(rf / width) ** 2) * (rf < 3 * width)
    return FieldPair(e, h, dofs)


@pytest.fixture(scope="session")
def sphere_scene():
    """16^3 coarse PEC sphere in vacuum."""
    return make_scene()


@pytest.fixture(scope="session")
def empty_scene():
    """12^3 box without obstacle (h chosen so r_max > 2*r0)."""
    return make_scene(h=0.5, n=12, obstacle=None, r0=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
