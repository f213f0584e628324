"""Analytic reference fields used as ground truth: plane waves, electric
dipoles, the partial-wave series for scattering of a plane wave by a
perfectly conducting sphere, the x/r^2 gradient field, windowed-source
scenarios with known exact solutions, and a dense-matrix mini-oracle for
operator identities on tiny grids.

Conventions
-----------
The package's time-harmonic convention makes the first-order system read
rot H = i*omega*eps0*E and rot E = -i*omega*mu0*H; radiating fields carry
the kernel exp(+i*kappa*r)/r (the sign reached from the upper half-plane).
Classical textbook expressions written for the opposite convention map onto
this one by flipping the sign of H while keeping the same spatial kernel.

Every oracle exposes a ``self_check`` that validates it against an
independent property (boundary condition, energy identity, small-argument
asymptotics) and raises :class:`~limabs.errors.OracleInvalid` on failure,
so downstream comparisons never run against a silently broken reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special as sps

from .errors import BadParameters, OracleInvalid, TruncationInsufficient
from .operators import FieldPair

__all__ = [
    "dipole_pointwise", "dipole_field", "plane_wave_pointwise", "plane_wave",
    "MieSolution", "mie_pec_sphere", "grad_ln_r_field", "sample_pair",
    "windowed_scenario", "dense_mini_oracle",
]


# ----------------------------------------------------------------------
# sampling helpers

def dof_components(dofs, kind):
    """Integer component (0,1,2) of every packed dof of the given kind."""
    if kind == "edge":
        index, keep, n = dofs.edge_index, dofs.edge_keep, dofs.n_edge
    else:
        index, keep, n = dofs.face_index, dofs.face_keep, dofs.n_face
    comp = np.empty(n, dtype=np.int64)
    for d in range(3):
        comp[index[d][keep[d]]] = d
    return comp


def sample_pair(dofs, fn):
    """Evaluate a pointwise field function on the staggered dofs.

    ``fn(points) -> (E, H)`` with arrays of shape (npts, 3); the edge dofs
    pick the matching component of E, the face dofs of H.
    """
    pe = dofs.edge_dof_points()
    pf = dofs.face_dof_points()
    e_all, _ = fn(pe)
    _, h_all = fn(pf)
    ce = dof_components(dofs, "edge")
    cf = dof_components(dofs, "face")
    return FieldPair(e_all[np.arange(dofs.n_edge), ce],
                     h_all[np.arange(dofs.n_face), cf], dofs)


# ----------------------------------------------------------------------
# electric dipole

def dipole_pointwise(points, omega, moment=(0.0, 0.0, 1.0),
                     center=(0.0, 0.0, 0.0), outgoing=True,
                     eps0=1.0, mu0=1.0):
    """Fields of a time-harmonic electric point dipole.

    Radiating (``outgoing=True``) fields carry exp(+i*kappa*r)/r; the
    incoming partner is the conjugate E with the H sign arranged so the
    pair still solves the first-order system.
    """
    omega = float(omega)
    if omega == 0.0:
        raise BadParameters("dipole needs omega != 0")
    kappa = omega * np.sqrt(eps0 * mu0)
    pts = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    p = np.asarray(moment, dtype=float)
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    r = np.maximum(r, 1e-300)
    n = pts / r[..., None]
    phase = np.exp(1j * kappa * r) / r
    ndp = np.sum(n * p, axis=-1)
    near = (3.0 * ndp[..., None] * n - p) \
        * (1.0 / r ** 2 - 1j * kappa / r)[..., None]
    nxp = np.cross(n, np.broadcast_to(p, n.shape))
    e = (near + kappa ** 2 * np.cross(nxp, n)) * phase[..., None]
    h = -np.sqrt(eps0 / mu0) * kappa ** 2 * nxp \
        * ((1.0 + 1j / (kappa * r)) * phase)[..., None]
    if not outgoing:
        e = np.conj(e)
        h = -np.conj(h)
    return e, h


def dipole_field(dofs, omega, moment=(0.0, 0.0, 1.0),
                 center=(0.0, 0.0, 0.0), outgoing=True, eps0=1.0, mu0=1.0):
    """Dipole sampled on the staggered dofs as a packed field pair."""
    return sample_pair(dofs, lambda pts: dipole_pointwise(
        pts, omega, moment=moment, center=center, outgoing=outgoing,
        eps0=eps0, mu0=mu0))


# ----------------------------------------------------------------------
# plane wave

def plane_wave_pointwise(points, omega, polarization=(1.0, 0.0, 0.0),
                         direction=(0.0, 0.0, 1.0), amplitude=1.0,
                         eps0=1.0, mu0=1.0):
    """Homogeneous plane wave solving the first-order system exactly."""
    pol = np.asarray(polarization, dtype=float)
    khat = np.asarray(direction, dtype=float)
    khat = khat / np.linalg.norm(khat)
    if abs(np.dot(pol, khat)) > 1e-13:
        raise BadParameters("polarization must be orthogonal to direction")
    kappa = float(omega) * np.sqrt(eps0 * mu0)
    pts = np.asarray(points, dtype=float)
    phase = amplitude * np.exp(1j * kappa * (pts @ khat))
    e = phase[..., None] * pol
    h = -np.sqrt(eps0 / mu0) * phase[..., None] * np.cross(khat, pol)
    return e, h


def plane_wave(dofs, omega, **kw):
    return sample_pair(dofs, lambda pts: plane_wave_pointwise(
        pts, omega, **kw))


# ----------------------------------------------------------------------
# partial-wave series for the perfectly conducting sphere

def _angular_functions(mu, lmax):
    """pi_l and tau_l (order-1 associated Legendre combinations) for
    l = 1..lmax at mu = cos(theta); returned as lists of arrays."""
    pi_prev = np.zeros_like(mu)      # pi_0
    pi_cur = np.ones_like(mu)        # pi_1
    pis, taus = [], []
    for ell in range(1, lmax + 1):
        if ell > 1:
            pi_next = ((2 * ell - 1) * mu * pi_cur
                       - ell * pi_prev) / (ell - 1)
            pi_prev, pi_cur = pi_cur, pi_next
        tau = ell * mu * pi_cur - (ell + 1) * pi_prev
        pis.append(pi_cur.copy())
        taus.append(tau)
    return pis, taus


def _riccati_jh(ell, x):
    """psi, psi', xi, xi' for the Riccati-Bessel pair at real argument."""
    j = sps.spherical_jn(ell, x)
    jp = sps.spherical_jn(ell, x, derivative=True)
    y = sps.spherical_yn(ell, x)
    yp = sps.spherical_yn(ell, x, derivative=True)
    h = j + 1j * y
    hp = jp + 1j * yp
    psi = x * j
    psip = j + x * jp
    xi = x * h
    xip = h + x * hp
    return psi, psip, xi, xip


@dataclass
class MieSolution:
    """Scattering of an x-polarized, z-travelling plane wave of unit
    amplitude by a perfectly conducting sphere at the origin."""
    radius: float
    omega: float
    eps0: float = 1.0
    mu0: float = 1.0
    tail_tol: float = 1e-12
    lmax_cap: int = 60
    a: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)
    lmax: int = field(init=False)

    def __post_init__(self):
        kappa = self.kappa
        x = kappa * self.radius
        if x <= 0:
            raise BadParameters("need omega * radius > 0")
        coeffs_a, coeffs_b = [], []
        peak = 0.0
        for ell in range(1, self.lmax_cap + 1):
            psi, psip, xi, xip = _riccati_jh(ell, x)
            al = psip / xip
            bl = psi / xi
            coeffs_a.append(al)
            coeffs_b.append(bl)
            size = abs(al) + abs(bl)
            peak = max(peak, size)
            # the incident multipoles decay like x^l, much slower than the
            # coefficients (~x^{2l+1}); keep enough terms that the surface
            # field cancellation holds to the tail tolerance as well
            incident_tail = (2 * ell + 1) * (abs(psi) + abs(psip)) / x
            if ell >= 3 and size <= self.tail_tol * peak \
                    and incident_tail <= self.tail_tol:
                break
        else:
            raise TruncationInsufficient(
                f"partial-wave tail above {self.tail_tol:g} of the peak "
                f"after {self.lmax_cap} terms (kappa*a = {x:g})")
        self.a = np.asarray(coeffs_a)
        self.b = np.asarray(coeffs_b)
        self.lmax = len(coeffs_a)

    @property
    def kappa(self):
        return self.omega * np.sqrt(self.eps0 * self.mu0)

    # fields ------------------------------------------------------------
    def incident(self, points):
        return plane_wave_pointwise(points, self.omega,
                                    eps0=self.eps0, mu0=self.mu0)

    def scattered(self, points):
        """Scattered fields at points with |x| >= radius."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=-1))
        r = np.maximum(r, 1e-300)
        kappa = self.kappa
        rho = kappa * r
        ct = np.clip(pts[:, 2] / r, -1.0, 1.0)
        st = np.sqrt(np.maximum(0.0, 1.0 - ct * ct))
        rxy = np.sqrt(pts[:, 0] ** 2 + pts[:, 1] ** 2)
        safe = np.where(rxy > 0, rxy, 1.0)
        cp = np.where(rxy > 0, pts[:, 0] / safe, 1.0)
        sp = np.where(rxy > 0, pts[:, 1] / safe, 0.0)
        pis, taus = _angular_functions(ct, self.lmax)
        er = np.zeros(len(pts), dtype=complex)
        et = np.zeros(len(pts), dtype=complex)
        ep = np.zeros(len(pts), dtype=complex)
        hr = np.zeros(len(pts), dtype=complex)
        ht = np.zeros(len(pts), dtype=complex)
        hp_ = np.zeros(len(pts), dtype=complex)
        for idx in range(self.lmax):
            ell = idx + 1
            al, bl = self.a[idx], self.b[idx]
            en = (1j ** ell) * (2 * ell + 1) / (ell * (ell + 1))
            j = sps.spherical_jn(ell, rho)
            jp = sps.spherical_jn(ell, rho, derivative=True)
            y = sps.spherical_yn(ell, rho)
            yp = sps.spherical_yn(ell, rho, derivative=True)
            z = j + 1j * y
            dz = (jp + 1j * yp) + z / rho
            pi_l, tau_l = pis[idx], taus[idx]
            er += en * 1j * al * ell * (ell + 1) * st * pi_l * z / rho
            et += en * (1j * al * tau_l * dz - bl * pi_l * z)
            ep += en * (-1j * al * pi_l * dz + bl * tau_l * z)
            hr += en * 1j * bl * ell * (ell + 1) * st * pi_l * z / rho
            ht += en * (1j * bl * tau_l * dz - al * pi_l * z)
            hp_ += en * (1j * bl * pi_l * dz - al * tau_l * z)
        # spherical unit vectors (phi = 0 taken on the polar axis; the
        # order-1 partial waves stay continuous there)
        rhat = np.stack([st * cp, st * sp, ct], axis=-1)
        that = np.stack([ct * cp, ct * sp, -st], axis=-1)
        phat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
        e = (er * cp)[:, None] * rhat + (et * cp)[:, None] * that \
            + (ep * sp)[:, None] * phat
        h_std = (hr * sp)[:, None] * rhat + (ht * sp)[:, None] * that \
            + (hp_ * cp)[:, None] * phat
        h_std *= np.sqrt(self.eps0 / self.mu0)
        # map the classical expansion onto this package's convention
        return e, -h_std

    def total(self, points):
        ei, hi = self.incident(points)
        es, hs = self.scattered(points)
        return ei + es, hi + hs

    # integral identities -------------------------------------------------
    def cross_sections(self):
        ell = np.arange(1, self.lmax + 1)
        w = 2 * ell + 1
        k2 = self.kappa ** 2
        c_sca = (2 * np.pi / k2) * np.sum(
            w * (np.abs(self.a) ** 2 + np.abs(self.b) ** 2))
        c_ext = (2 * np.pi / k2) * np.sum(w * np.real(self.a + self.b))
        return float(c_sca), float(c_ext)

    def self_check(self, n_surface=200, seed=0):
        """Boundary condition, energy balance, and small-sphere limit."""
        report = {}
        # tangential total E on the sphere
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((n_surface, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        pts = self.radius * v
        et, _ = self.total(pts)
        tangential = et - np.sum(et * v, axis=1)[:, None] * v
        report["tangential_e"] = float(
            np.abs(tangential).max())  # incident amplitude is 1
        # a lossless scatterer: scattering and extinction sections agree
        c_sca, c_ext = self.cross_sections()
        report["optical_theorem"] = abs(c_sca - c_ext) / max(c_sca, 1e-300)
        report["c_sca"] = c_sca
        # long-wavelength limit of the conducting sphere
        x = self.kappa * self.radius
        rayleigh = (10.0 * np.pi / 3.0) * self.kappa ** 4 * self.radius ** 6
        report["rayleigh_relative"] = abs(c_sca - rayleigh) / rayleigh
        report["kappa_a"] = float(x)
        tail = abs(self.a[-1]) + abs(self.b[-1])
        peak = (np.abs(self.a) + np.abs(self.b)).max()
        report["tail_fraction"] = float(tail / peak)
        ok = (report["tangential_e"] <= 1e-8
              and report["optical_theorem"] <= 1e-8
              and report["tail_fraction"] <= self.tail_tol)
        if x <= 0.35:
            ok = ok and report["rayleigh_relative"] <= 0.05
        report["pass"] = bool(ok)
        if not ok:
            raise OracleInvalid(f"sphere-scattering reference failed "
                                f"self-check: {report}")
        return report


def mie_pec_sphere(omega, radius, dofs=None, eps0=1.0, mu0=1.0,
                   self_check=True, which="scattered"):
    """Partial-wave solution; optionally sampled on the staggered dofs.

    Returns the solution object alone, or (solution, FieldPair) when dofs
    are given; ``which`` picks the scattered or total field.
    """
    sol = MieSolution(radius=float(radius), omega=float(omega),
                      eps0=eps0, mu0=mu0)
    if self_check:
        sol.self_check()
    if dofs is None:
        return sol
    fn = sol.scattered if which == "scattered" else sol.total
    return sol, sample_pair(dofs, fn)


# ----------------------------------------------------------------------
# the x/r^2 gradient field

def grad_ln_r_field(dofs):
    """E = x/r^2 on the edge dofs (H = 0): curl-free with div = r^{-2}.

    Callers should use an obstacle containing the unit ball so the field
    is smooth on the active region.
    """
    pts = dofs.edge_dof_points()
    r2 = np.maximum(np.sum(pts * pts, axis=-1), 1e-300)
    vals = pts / r2[:, None]
    ce = dof_components(dofs, "edge")
    return FieldPair(vals[np.arange(dofs.n_edge), ce].astype(complex),
                     np.zeros(dofs.n_face, dtype=complex), dofs)


# ----------------------------------------------------------------------
# windowed scenarios with known exact solutions

def windowed_scenario(dofs, omega, solution_fn, window, window_index=0,
                      eps0=1.0, mu0=1.0):
    """Multiply an exact homogeneous solution by a radial window.

    If u solves the first-order system with zero source, then chi*u solves
    it with the commutator source f = i Lambda^{-1} (-grad(chi) x H,
    grad(chi) x E), which is compactly supported on the window transition.
    Returns (u_exact, f) as packed pairs; both respect the obstacle and
    outer-wall conditions when the window dies before the walls.
    """
    pe = dofs.edge_dof_points()
    pf = dofs.face_dof_points()
    e_pe, h_pe = solution_fn(pe)
    e_pf, h_pf = solution_fn(pf)
    chi_e = window.eta(window_index, pe)
    chi_f = window.eta(window_index, pf)
    grad_e = window.grad_eta(window_index, pe)
    grad_f = window.grad_eta(window_index, pf)
    ce = dof_components(dofs, "edge")
    cf = dof_components(dofs, "face")
    ar_e = np.arange(dofs.n_edge)
    ar_f = np.arange(dofs.n_face)
    u = FieldPair(chi_e * e_pe[ar_e, ce], chi_f * h_pf[ar_f, cf], dofs)
    # f = i Lambda^{-1} (-grad chi x H, grad chi x E)
    fe = (1j / eps0) * (-np.cross(grad_e, h_pe))[ar_e, ce]
    fh = (1j / mu0) * np.cross(grad_f, e_pf)[ar_f, cf]
    return u, FieldPair(fe, fh, dofs)


def shifted_source(u_exact, f, omega, omega_tilde):
    """Source whose exact solution at omega_tilde is the same field:
    (M - omega_tilde) u = f - (omega_tilde - omega) u."""
    return f - (complex(omega_tilde) - complex(omega)) * u_exact


# ----------------------------------------------------------------------
# dense mini-oracle

def dense_mini_oracle(n_small=4, h=1.0, seed=0, omega=1j):
    """Brute-force dense check of the operator identities on a tiny grid.

    Builds the first-order operator densely in the weighted inner product
    and verifies, via SVD/eigendecomposition: exact antisymmetry of the
    rotation block, equality of the forward and adjoint best constants
    with the inverse norm, orthogonality of kernel and range, and the
    spectral formula for the resolvent norm at omega (cross-checked by a
    power-iteration probe).
    """
    if n_small > 6:
        raise BadParameters("dense oracle is for grids up to 6^3")
    from .grid import build_grid, classify_boundary
    from .materials import build_material
    from .operators import DiscreteMaxwellOperator

    grid = build_grid(h=h, n=n_small, obstacle=None, r0=0.45 * n_small * h / 2)
    lab = classify_boundary(grid, "all_pec")
    mat = build_material({"kind": "vacuum"}, grid)
    op = DiscreteMaxwellOperator(grid, lab, mat)
    dofs = op.dofs
    n_tot = dofs.n_edge + dofs.n_face

    def apply_dense(vec):
        u = FieldPair(vec[:dofs.n_edge], vec[dofs.n_edge:], dofs)
        out = op.apply_maxwell(u)
        return np.concatenate([out.e, out.h])

    m_mat = np.empty((n_tot, n_tot), dtype=complex)
    eye = np.eye(n_tot)
    for j in range(n_tot):
        m_mat[:, j] = apply_dense(eye[:, j].astype(complex))
    w = np.concatenate([op.blocks.w_edge.diagonal(),
                        op.blocks.w_face.diagonal()])
    sq = np.sqrt(w)
    a_sym = (sq[:, None] * m_mat) / sq[None, :]

    report = {"n_dofs": n_tot}
    report["hermiticity"] = float(np.abs(a_sym - a_sym.conj().T).max())
    rot = a_sym / 1j   # the weighted rotation block, should be real skew
    report["rot_antisymmetry"] = float(np.abs(rot + rot.T).max())
    report["rot_realness"] = float(np.abs(rot.imag).max())

    # kernel / range orthogonality of the (singular) operator itself
    lam, vec = np.linalg.eigh(0.5 * (a_sym + a_sym.conj().T))
    tol = 1e-10 * max(1.0, np.abs(lam).max())
    ker = vec[:, np.abs(lam) < tol]
    ran = vec[:, np.abs(lam) >= tol]
    report["kernel_dim"] = int(ker.shape[1])
    report["range_kernel_orthogonality"] = float(
        np.abs(ker.conj().T @ (a_sym @ ran)).max()) if ran.size else 0.0

    # shifted operator: best constants and resolvent norm
    t_mat = a_sym - complex(omega) * eye
    sv = np.linalg.svd(t_mat, compute_uv=False)
    sv_adj = np.linalg.svd(t_mat.conj().T, compute_uv=False)
    inv_norm = 1.0 / sv[-1]
    report["c_forward"] = float(1.0 / sv[-1])
    report["c_adjoint"] = float(1.0 / sv_adj[-1])
    report["inverse_norm"] = float(inv_norm)
    report["best_constant_gap"] = abs(report["c_forward"]
                                      - report["c_adjoint"]) / inv_norm
    spectral = 1.0 / np.abs(lam - complex(omega)).min()
    report["spectral_formula"] = float(spectral)
    report["spectral_gap"] = abs(spectral - inv_norm) / inv_norm

    # power-iteration probe of the largest singular value of T^{-1}
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n_tot) + 1j * rng.standard_normal(n_tot)
    x /= np.linalg.norm(x)
    est = 0.0
    inv_t = np.linalg.inv(t_mat)
    gram = inv_t @ inv_t.conj().T
    for _ in range(400):
        y = gram @ x
        est_new = float(np.real(np.vdot(x, y)))
        x = y / np.linalg.norm(y)
        if abs(est_new - est) <= 1e-14 * max(est_new, 1.0):
            est = est_new
            break
        est = est_new
    report["probe_norm"] = float(np.sqrt(est))
    report["probe_gap"] = abs(report["probe_norm"] - inv_norm) / inv_norm

    ok = (report["hermiticity"] <= 1e-12
          and report["rot_antisymmetry"] <= 1e-13
          and report["rot_realness"] <= 1e-13
          and report["range_kernel_orthogonality"] <= 1e-13 * np.abs(lam).max()
          and report["best_constant_gap"] <= 1e-12
          and report["spectral_gap"] <= 1e-10
          and report["probe_gap"] <= 1e-10)
    report["pass"] = bool(ok)
    if not ok:
        raise OracleInvalid(f"dense mini-oracle failed: {report}")
    return report
