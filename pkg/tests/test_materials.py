"""Material tensors, admissibility, and the weighted inner product."""

import numpy as np
import pytest

from limabs.errors import NotSymmetric
from limabs.materials import (build_material, inverse_material, lambda_inner,
                              validate_admissible)

from conftest import make_scene, random_pair


def radial_spec(amplitude=0.4, kappa=2.0):
    return {"kind": "radial", "gamma0": 1.0, "amplitude": amplitude,
            "kappa": kappa}


def test_vacuum_material_is_identity(sphere_scene):
    grid, labeling, mat, op = sphere_scene
    assert mat.eps0 == pytest.approx(1.0)
    assert mat.mu0 == pytest.approx(1.0)
    eye = np.broadcast_to(np.eye(3), mat.eps.shape)
    assert np.allclose(mat.eps, eye)


def test_radial_material_admissible():
    grid, labeling, mat, op = make_scene(material=radial_spec())
    rep = validate_admissible(mat, kappa_required=1.0)
    assert rep["pass"]
    assert rep["checks"]["eps"]["symmetry_residual"] == 0.0
    assert rep["c_pd"] > 1e-8


def test_inverse_material_admissible_when_forward_is():
    grid, labeling, mat, op = make_scene(material=radial_spec())
    inv = inverse_material(mat)
    rep = validate_admissible(inv, kappa_required=1.0)
    assert rep["pass"]


def test_lambda_product_identity(sphere_scene, rng):
    # Lambda~0 Lambda0 = eps0*mu0 * identity on pairs (scalar leading parts)
    grid, labeling, mat, op = sphere_scene
    u = random_pair(op.dofs, rng)
    lam0 = type(u)(mat.eps0 * u.e, mat.mu0 * u.h, u.dofs)
    lam_tilde_lam0 = type(u)(mat.mu0 * lam0.e, mat.eps0 * lam0.h, u.dofs)
    target = (mat.eps0 * mat.mu0) * u
    assert np.allclose(lam_tilde_lam0.e, target.e)
    assert np.allclose(lam_tilde_lam0.h, target.h)


def test_norm_equivalence_with_plain_l2(rng):
    grid, labeling, mat, op = make_scene(material=radial_spec())
    dofs = op.dofs
    h3 = grid.h ** 3
    bounds = []
    for _ in range(100):
        u = random_pair(dofs, rng)
        lam = op.lambda_norm(u) ** 2
        plain = h3 * (np.sum(np.abs(u.e) ** 2) + np.sum(np.abs(u.h) ** 2))
        bounds.append(lam / plain)
    bounds = np.asarray(bounds)
    # radial amplitude 0.4 keeps eigenvalues within [0.6, 1.4] of vacuum
    assert bounds.min() > 0.5
    assert bounds.max() < 1.5


def test_lambda_inner_is_hermitian(sphere_scene, rng):
    grid, labeling, mat, op = sphere_scene
    u = random_pair(op.dofs, rng)
    v = random_pair(op.dofs, rng)
    a = lambda_inner(u, v, mat)
    b = lambda_inner(v, u, mat)
    assert a == pytest.approx(np.conj(b), rel=1e-13)
    assert lambda_inner(u, u, mat).real > 0


def test_asymmetric_tensor_rejected():
    bad = np.broadcast_to(np.array([[1.0, 0.3, 0.0],
                                    [0.0, 1.0, 0.0],
                                    [0.0, 0.0, 1.0]]), (4, 4, 4, 3, 3))
    grid, labeling, mat, op = make_scene(h=1.2, n=4, obstacle=None, r0=1.0)
    with pytest.raises(NotSymmetric):
        type(mat)(grid=grid, eps=np.array(bad), mu=mat.eps,
                  eps0=1.0, mu0=1.0, kappa=2.0)
