"""Mimetic staggered operators: block curl with eliminated boundary dofs,
the material-weighted Maxwell operator, the radial cross operator, and the
outgoing-radiation residual.

The packed layout puts all retained electric dofs in one complex vector and
all retained magnetic dofs in another; ``DofMap`` owns the numbering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BadParameters, DimensionMismatch, InconsistentLabeling
from .grid import PEC, PMC, build_dof_maps, shell_integral, weighted_norm
from .materials import blocks_for, _averaging_matrix

_CYCLIC = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


@dataclass
class FieldPair:
    """Electric dofs on edges, magnetic dofs on faces (packed vectors)."""
    e: np.ndarray
    h: np.ndarray
    dofs: object

    def __post_init__(self):
        if self.e.shape != (self.dofs.n_edge,) or self.h.shape != (self.dofs.n_face,):
            raise DimensionMismatch("packed field sizes do not match dof map")

    def copy(self):
        return FieldPair(self.e.copy(), self.h.copy(), self.dofs)

    def conj(self):
        return FieldPair(np.conj(self.e), np.conj(self.h), self.dofs)

    def __add__(self, other):
        return FieldPair(self.e + other.e, self.h + other.h, self.dofs)

    def __sub__(self, other):
        return FieldPair(self.e - other.e, self.h - other.h, self.dofs)

    def __mul__(self, a):
        return FieldPair(self.e * a, self.h * a, self.dofs)

    __rmul__ = __mul__

    @classmethod
    def zero(cls, dofs):
        return cls(np.zeros(dofs.n_edge, complex), np.zeros(dofs.n_face, complex), dofs)

    @classmethod
    def random(cls, dofs, rng):
        e = rng.standard_normal(dofs.n_edge) + 1j * rng.standard_normal(dofs.n_edge)
        h = rng.standard_normal(dofs.n_face) + 1j * rng.standard_normal(dofs.n_face)
        return cls(e, h, dofs)


# ----------------------------------------------------------------------
# sparse stencils on retained dofs

def curl_matrix(dofs):
    """Edge-to-face circulation curl (entries +-1/h); eliminated dofs drop."""
    grid = dofs.grid
    inv_h = 1.0 / grid.h
    rows, cols, vals = [], [], []
    for d in range(3):
        a, b = _CYCLIC[d]
        fidx = dofs.face_index[d]
        faces = np.argwhere(dofs.face_keep[d])
        frow = fidx[faces[:, 0], faces[:, 1], faces[:, 2]]
        # (curl E)_d = d_a E_b - d_b E_a
        for comp, axis, sign in ((b, a, +1.0), (a, b, -1.0)):
            for shift, ssign in ((1, +1.0), (0, -1.0)):
                off = np.zeros(3, dtype=int)
                off[axis] = shift
                pos = faces + off
                gi = dofs.edge_index[comp][pos[:, 0], pos[:, 1], pos[:, 2]]
                keep = gi >= 0
                rows.append(frow[keep])
                cols.append(gi[keep])
                vals.append(np.full(int(keep.sum()), sign * ssign * inv_h))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofs.n_face, dofs.n_edge))


def node_gradient(dofs, grounded="pec"):
    """Node-to-edge difference gradient on the retained edge set.

    Grounded nodes (value forced to zero) are the nodes of boundary faces
    with the selected label plus, for the "pec" flavor, the outer wall.
    Returns (G, node_keep, node_index).
    """
    grid = dofs.grid
    lab = dofs.labeling
    target = PEC if grounded == "pec" else PMC
    ground = np.zeros((grid.n + 1,) * 3, dtype=bool)
    for d in range(3):
        sel = lab.labels[d] == target
        if not np.any(sel):
            continue
        where = np.argwhere(sel)
        others = [x for x in range(3) if x != d]
        for da in (0, 1):
            for db in (0, 1):
                off = np.zeros(3, dtype=int)
                off[others[0]] = da
                off[others[1]] = db
                pos = where + off
                ground[pos[:, 0], pos[:, 1], pos[:, 2]] = True
    # candidate nodes: nodes of active cells
    p = np.zeros((grid.n + 2,) * 3, dtype=bool)
    p[1:-1, 1:-1, 1:-1] = grid.active
    cand = np.zeros((grid.n + 1,) * 3, dtype=bool)
    for da in (0, 1):
        for db in (0, 1):
            for dc in (0, 1):
                cand |= p[da:da + grid.n + 1, db:db + grid.n + 1, dc:dc + grid.n + 1]
    keep = cand & ~ground
    idx = np.full(keep.shape, -1, dtype=np.int64)
    idx[keep] = np.arange(int(np.count_nonzero(keep)))
    inv_h = 1.0 / grid.h
    rows, cols, vals = [], [], []
    for d in range(3):
        edges = np.argwhere(dofs.edge_keep[d])
        erow = dofs.edge_index[d][edges[:, 0], edges[:, 1], edges[:, 2]]
        for shift, sign in ((1, +1.0), (0, -1.0)):
            off = np.zeros(3, dtype=int)
            off[d] = shift
            pos = edges + off
            gi = idx[pos[:, 0], pos[:, 1], pos[:, 2]]
            ok = gi >= 0
            rows.append(erow[ok])
            cols.append(gi[ok])
            vals.append(np.full(int(ok.sum()), sign * inv_h))
    g = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofs.n_edge, int(np.count_nonzero(keep))))
    return g, keep, idx


def face_divergence(dofs):
    """Face-to-cell divergence over active cells (eliminated faces drop)."""
    grid = dofs.grid
    cells = np.argwhere(grid.active)
    ncell = cells.shape[0]
    inv_h = 1.0 / grid.h
    rows, cols, vals = [], [], []
    for d in range(3):
        for shift, sign in ((1, +1.0), (0, -1.0)):
            off = np.zeros(3, dtype=int)
            off[d] = shift
            pos = cells + off
            gi = dofs.face_index[d][pos[:, 0], pos[:, 1], pos[:, 2]]
            ok = gi >= 0
            rows.append(np.nonzero(ok)[0])
            cols.append(gi[ok])
            vals.append(np.full(int(ok.sum()), sign * inv_h))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ncell, dofs.n_face)), cells


# ----------------------------------------------------------------------
# the Maxwell operator

class DiscreteMaxwellOperator:
    """Block curl and material data on a fixed grid/labeling combination."""

    def __init__(self, grid, labeling, mat):
        if labeling.labels[0].shape != grid.face_shape(0):
            raise InconsistentLabeling("labeling built for a different grid")
        self.grid = grid
        self.labeling = labeling
        self.mat = mat
        self.dofs = build_dof_maps(grid, labeling)
        self.curl = curl_matrix(self.dofs)
        self.blocks = blocks_for(mat, self.dofs)

    # basic applies ---------------------------------------------------
    def apply_rot(self, u):
        """Block curl (-curl H, curl E) on packed fields."""
        return FieldPair(-(self.curl.T @ u.h), self.curl @ u.e, self.dofs)

    def apply_maxwell(self, u):
        """i * Lambda^{-1} * block curl."""
        blk = self.blocks
        e = -1j * blk.mult_eps_inv(self.curl.T @ u.h)
        h = 1j * blk.mult_mu_inv(self.curl @ u.e)
        return FieldPair(e, h, self.dofs)

    def lambda_inner(self, u, v):
        return self.blocks.inner(u.e, u.h, v.e, v.h)

    def lambda_norm(self, u):
        return self.blocks.norm(u.e, u.h)

    # colocation ------------------------------------------------------
    def colocate(self, u):
        return colocate(u)

    def distribute(self, ec, hc):
        return distribute(ec, hc, self.dofs)


def assemble_curl(grid, labeling, mat=None):
    """Build the discrete Maxwell operator; vacuum material if none given."""
    if mat is None:
        from .materials import build_material
        mat = build_material({"kind": "vacuum"}, grid)
    return DiscreteMaxwellOperator(grid, labeling, mat)


def maxwell_apply(op, u):
    return op.apply_maxwell(u)


# ----------------------------------------------------------------------
# colocation between staggered dofs and cell centers

def _averagers(dofs):
    # cached on the dof map itself: id()-keyed global caches go stale when a
    # collected object's id is reused by a new grid
    got = getattr(dofs, "_averagers", None)
    if got is None:
        ae, cells = _averaging_matrix(dofs, "edge")
        ah, _ = _averaging_matrix(dofs, "face")
        got = (ae, ah, cells)
        try:
            object.__setattr__(dofs, "_averagers", got)
        except (AttributeError, TypeError):
            pass
    return got


def colocate(u):
    """Cell-centered (n,n,n,3) versions of both fields (zero off-domain)."""
    dofs = u.dofs
    ae, ah, cells = _averagers(dofs)
    n = dofs.grid.n
    ec = np.zeros((n, n, n, 3), dtype=complex)
    hc = np.zeros((n, n, n, 3), dtype=complex)
    ec[cells[:, 0], cells[:, 1], cells[:, 2]] = (ae @ u.e).reshape(-1, 3)
    hc[cells[:, 0], cells[:, 1], cells[:, 2]] = (ah @ u.h).reshape(-1, 3)
    return ec, hc


def distribute(ec, hc, dofs):
    """Transpose of colocation: cell-centered pair back to packed dofs."""
    ae, ah, cells = _averagers(dofs)
    ev = ec[cells[:, 0], cells[:, 1], cells[:, 2]].reshape(-1)
    hv = hc[cells[:, 0], cells[:, 1], cells[:, 2]].reshape(-1)
    return FieldPair(ae.T @ ev, ah.T @ hv, dofs)


# ----------------------------------------------------------------------
# radial cross operator

def xi_unit(grid, zero_radius=None):
    """(n,n,n,3) unit radial vectors at cell centers; zero near the origin."""
    cc = grid.cell_centers()
    r = np.sqrt(np.sum(cc * cc, axis=-1))
    if zero_radius is None:
        zero_radius = 0.9 * grid.h
    safe = np.where(r > zero_radius, r, np.inf)
    return cc / safe[..., None]


def xi_cross_cells(ec, hc, xi):
    """Pointwise (-xi x H, xi x E) on cell-centered fields."""
    return -np.cross(xi, hc), np.cross(xi, ec)


def xi_apply(u, grid):
    """Radial cross operator on a packed pair: colocate to cell centers,
    apply the pointwise cross, distribute back by the averaging transpose.
    """
    ec, hc = colocate(u)
    xi = xi_unit(grid)
    xe, xh = xi_cross_cells(ec, hc, xi)
    return distribute(xe, xh, u.dofs)


# ----------------------------------------------------------------------
# radiation residual

@dataclass
class RadiationResidual:
    shells: np.ndarray
    outgoing_shell: np.ndarray   # per-shell L2 norms of (L0 + sqrt(e0 m0) Xi) u
    incoming_shell: np.ndarray   # sign-flipped contrast
    field_shell: np.ndarray      # per-shell L2 norms of u itself
    t: float
    outgoing_weighted: float
    incoming_weighted: float
    field_weighted: float


def silver_mueller_residual(u, mat, t, shells):
    """Per-shell and weighted norms of the outgoing-radiation functional
    (Lambda0 + sqrt(eps0*mu0) Xi) u, evaluated on cell-centered fields,
    with the incoming (sign-flipped) functional reported for contrast.
    """
    grid = mat.grid
    ec, hc = colocate(u)
    xi = xi_unit(grid)
    xe, xh = xi_cross_cells(ec, hc, xi)
    root = np.sqrt(mat.eps0 * mat.mu0)
    out_e = mat.eps0 * ec + root * xe
    out_h = mat.mu0 * hc + root * xh
    in_e = mat.eps0 * ec - root * xe
    in_h = mat.mu0 * hc - root * xh
    shells = np.asarray(shells, dtype=float)

    def shell_norms(a, b):
        return np.array([np.sqrt(shell_integral(a, r, grid)
                                 + shell_integral(b, r, grid)) for r in shells])

    def wnorm(a, b):
        return float(np.sqrt(weighted_norm(a, grid, t) ** 2
                             + weighted_norm(b, grid, t) ** 2))

    return RadiationResidual(
        shells=shells,
        outgoing_shell=shell_norms(out_e, out_h),
        incoming_shell=shell_norms(in_e, in_h),
        field_shell=shell_norms(ec, hc),
        t=float(t),
        outgoing_weighted=wnorm(out_e, out_h),
        incoming_weighted=wnorm(in_e, in_h),
        field_weighted=wnorm(ec, hc),
    )


# ----------------------------------------------------------------------
# radial partial-integration identity

def radial_partial_integration_check(u, mat, r_hat, r_til, t=0.0, phi=None):
    """Both sides of the annulus/ball partial-integration identity.

    With Phi = phi(r) on the annulus r_hat < r < r_til and Psi the radial
    tail antiderivative psi(s) = integral of phi over [max(r_hat, s),
    r_til], the identity equates

        <Phi Xi u, Lambda0 u>  over the annulus

    with

        <Psi Rot u, Lambda0 u> + <Psi u, Rot Lambda0 u>  over r < r_til.

    ``phi`` defaults to the weight profile (1+s^2)^t.  Mimetic rotations
    and cell-centered quadrature give O(h) agreement for smooth fields.
    """
    grid = mat.grid
    if not 0.0 < r_hat < r_til <= grid.r_max:
        raise BadParameters("need 0 < r_hat < r_til <= box radius")
    if phi is None:
        phi = lambda s: (1.0 + s ** 2) ** t
    ec, hc = colocate(u)
    xi = xi_unit(grid)
    xe, xh = xi_cross_cells(ec, hc, xi)
    r = grid.cell_radii()
    h3 = grid.h ** 3
    eps0, mu0 = mat.eps0, mat.mu0
    annulus = (r > r_hat) & (r < r_til)
    ball = r < r_til
    phi_r = phi(r)
    lhs = np.sum((phi_r[..., None] * (xe * np.conj(eps0 * ec)
                                      + xh * np.conj(mu0 * hc)))[annulus]) * h3
    # tail antiderivative on a dense radial grid
    s_grid = np.linspace(0.0, r_til, 4096)
    phi_vals = np.where(s_grid >= r_hat, phi(s_grid), 0.0)
    from scipy.integrate import cumulative_trapezoid
    cum = cumulative_trapezoid(phi_vals, s_grid, initial=0.0)
    psi_tail = cum[-1] - cum
    psi_r = np.interp(np.clip(r, 0.0, r_til), s_grid, psi_tail)
    curl = curl_matrix(u.dofs)
    rot = FieldPair(-(curl.T @ u.h), curl @ u.e, u.dofs)
    rot_lam = FieldPair(-(curl.T @ (mu0 * u.h)), curl @ (eps0 * u.e), u.dofs)
    re_c, rh_c = colocate(rot)
    rle_c, rlh_c = colocate(rot_lam)
    rhs = np.sum((psi_r[..., None] * (re_c * np.conj(eps0 * ec)
                                      + rh_c * np.conj(mu0 * hc)
                                      + ec * np.conj(rle_c)
                                      + hc * np.conj(rlh_c)))[ball]) * h3
    scale = (np.sum((np.abs(phi_r)[..., None]
                     * (np.abs(xe * ec) + np.abs(xh * hc)))[annulus]) * h3
             + np.sum((np.abs(psi_r)[..., None]
                       * (np.abs(re_c * ec) + np.abs(rh_c * hc)
                          + np.abs(ec * rle_c)
                          + np.abs(hc * rlh_c)))[ball]) * h3)
    return {"lhs": complex(lhs), "rhs": complex(rhs),
            "gap": abs(lhs - rhs), "scale": float(max(scale, 1e-300)),
            "relative": abs(lhs - rhs) / float(max(scale, 1e-300)),
            "t": float(t), "r_hat": float(r_hat), "r_til": float(r_til)}
