"""Linear solves of the shifted Maxwell system, resolvent-norm probes,
eigenpairs near a real frequency, and weighted-orthogonal projection
against a kernel basis.

The system solved in mass form is

    [ -omega*W_e     -i h^3 C^T ] [E]   [W_e f_e]
    [  i h^3 C      -omega*W_f  ] [H] = [W_f f_h]

which is the material-weighted form of (M_h - omega) u = f.  When the
magnetic mass matrix is diagonal the magnetic dofs are eliminated, leaving
the curl-curl system (S - omega^2 W_e) E = omega W_e f_e - i h^3 C^T f_h
with S = h^6 C^T W_f^{-1} C real symmetric positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceFailure,
    SingularAtRealFrequency,
    SolverStagnation,
)
from .grid import radial_weight
from .operators import FieldPair, colocate

_DIRECT_LIMIT = 16  # direct factorization for n <= this many cells per axis


def _dof_weights(dofs, t):
    key = ("weights", t)
    cache = _POINT_CACHE.setdefault(id(dofs), {})
    if key not in cache:
        if "pts" not in cache:
            cache["pts"] = (dofs.edge_dof_points(), dofs.face_dof_points())
        pe, pf = cache["pts"]
        cache[key] = (radial_weight(pe, t), radial_weight(pf, t))
    return cache[key]


_POINT_CACHE = {}


def pair_weighted_norm(u, t):
    """Weighted L2 norm of a packed pair using dof locations."""
    we, wf = _dof_weights(u.dofs, t)
    h3 = u.dofs.grid.h ** 3
    return float(np.sqrt((np.sum(we ** 2 * np.abs(u.e) ** 2)
                          + np.sum(wf ** 2 * np.abs(u.h) ** 2)) * h3))


def pair_r_norm(u, t, op):
    """Weighted graph norm: field at weight t, block curl at weight t+1."""
    ru = op.apply_rot(u)
    return float(np.sqrt(pair_weighted_norm(u, t) ** 2
                         + pair_weighted_norm(ru, t + 1.0) ** 2))


# ----------------------------------------------------------------------
# factorized shifted solvers

class ShiftedSolver:
    """Reusable solver for (M_h - omega)u = f at fixed omega.

    Methods: "direct" (sparse LU of the reduced curl-curl system, affordable
    up to ~_DIRECT_LIMIT cells per axis), "fft" (GMRES preconditioned by the
    exact spectral inverse of the constant-coefficient full-box operator at
    the same shift; the obstacle elimination and material variation are
    localized/decaying perturbations, so iteration counts stay modest), or
    "auto" to pick by grid size.
    """

    def __init__(self, op, omega, tol=1e-10, method="auto"):
        if omega.imag == 0.0:
            raise SingularAtRealFrequency(
                "direct solves need Im omega != 0; use the limit driver instead")
        self.op = op
        self.omega = complex(omega)
        self.tol = float(tol)
        blk = op.blocks
        self.h3 = op.grid.h ** 3
        self._wf_diag = blk._is_diag(blk.w_face)
        if method == "auto":
            method = "direct" if op.grid.n <= _DIRECT_LIMIT or not self._wf_diag \
                else "fft"
        self.method = method
        self.iterations = 0
        if self._wf_diag:
            wf_inv = 1.0 / blk.w_face.diagonal()
            self._s_mat = _curlcurl(op, wf_inv)
            a = (self._s_mat - self.omega ** 2 * blk.w_edge).tocsc()
            if method == "direct":
                self.factor = spla.splu(a)
                self._solve_reduced = self.factor.solve
            else:
                from .spectral_box import BoxCurlCurlSolver
                self._a_mat = a.tocsr()
                mat = op.mat
                self._box = BoxCurlCurlSolver(op.grid.n, op.grid.h,
                                              eps0=mat.eps0, mu0=mat.mu0)
            self._wf_inv = wf_inv
        else:
            a = sp.bmat([
                [-self.omega * blk.w_edge, -1j * self.h3 * op.curl.T],
                [1j * self.h3 * op.curl, -self.omega * blk.w_face],
            ], format="csc")
            self._solve_full = spla.splu(a).solve

    def solve(self, f):
        op, blk = self.op, self.op.blocks
        if self._wf_diag:
            rhs = self.omega * (blk.w_edge @ f.e) - 1j * self.h3 * (op.curl.T @ f.h)
            if self.method == "direct":
                e = self._solve_reduced(rhs)
            else:
                e = self._krylov(rhs)
            h = (1j * self.h3 * self._wf_inv * (op.curl @ e) - f.h) / self.omega
            u = FieldPair(e, h, op.dofs)
        else:
            x = self._solve_full(np.concatenate([blk.w_edge @ f.e,
                                                 blk.w_face @ f.h]))
            u = FieldPair(x[:op.dofs.n_edge], x[op.dofs.n_edge:], op.dofs)
        return u

    def _krylov(self, rhs):
        count = [0]

        def cb(_):
            count[0] += 1

        dofs, h3, w2 = self.op.dofs, self.h3, self.omega ** 2

        def precond(v):
            return self._box.solve_packed(dofs, v, w2) / h3

        x, info = spla.gmres(self._a_mat, rhs, rtol=self.tol * 0.1,
                             atol=0.0, restart=100, maxiter=10,
                             M=spla.LinearOperator(self._a_mat.shape,
                                                   matvec=precond),
                             callback=cb, callback_type="pr_norm")
        self.iterations += count[0]
        if info != 0:
            raise SolverStagnation(
                f"preconditioned solve did not reach tolerance (info={info})")
        return x


def _curlcurl(op, wf_inv):
    h3 = op.grid.h ** 3
    c = op.curl
    return (h3 ** 2) * (c.T @ sp.diags(wf_inv) @ c)


@dataclass
class ResolventSolve:
    omega: complex
    f: FieldPair
    u: FieldPair
    residual: float
    iterations: int
    method: str

    def record(self):
        return {
            "omega": [self.omega.real, self.omega.imag],
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
        }


def solve_resolvent(op, omega, f, tol=1e-10, method="auto", solver=None):
    """Solve (M_h - omega) u = f with relative residual <= tol."""
    s = solver if solver is not None else ShiftedSolver(
        op, omega, tol=tol, method=method)
    u = s.solve(f)
    r = op.apply_maxwell(u) - omega * u - f
    fn = op.lambda_norm(f)
    resid = op.lambda_norm(r) / fn if fn > 0 else 0.0
    if resid > max(tol, 1e-9) * 10 and fn > 0:
        raise SolverStagnation(f"relative residual {resid:.2e} above tolerance")
    return ResolventSolve(omega=complex(omega), f=f, u=u, residual=resid,
                          iterations=s.iterations, method=s.method)


def resolvent_norm_probe(op, omega, samples=3, iters=25, tol=1e-10, seed=0):
    """Power-iteration estimate of the weighted operator norm of the
    resolvent, plus the empirical graph-norm constant of the bound
    ||u||_R <= c (1+|omega|)/|Im omega| ||f||.
    """
    rng = np.random.default_rng(seed)
    solver = ShiftedSolver(op, omega, tol=tol)
    best = 0.0
    c_emp = 0.0
    for _ in range(samples):
        x = FieldPair.random(op.dofs, rng)
        nx = op.lambda_norm(x)
        x = x * (1.0 / nx)
        for _ in range(iters):
            y = solver.solve(x)
            ny = op.lambda_norm(y)
            best = max(best, ny)
            x = y * (1.0 / ny)
        f = FieldPair.random(op.dofs, rng)
        u = solver.solve(f)
        c_emp = max(c_emp, pair_r_norm(u, 0.0, op) * abs(omega.imag)
                    / ((1.0 + abs(omega)) * op.lambda_norm(f)))
    return {"norm_estimate": best, "bound": 1.0 / abs(omega.imag),
            "c_emp": c_emp}


# ----------------------------------------------------------------------
# eigenpairs near a real frequency

@dataclass
class KernelBasis:
    omega0: float
    vectors: list            # FieldPairs, weighted-orthonormal
    eigenvalues: np.ndarray  # complex (zero imaginary part by construction)
    residuals: np.ndarray
    localization: np.ndarray

    def filtered(self, residual_tol=1e-6, localization_max=0.2):
        sel = [i for i in range(len(self.vectors))
               if self.residuals[i] <= residual_tol
               and self.localization[i] < localization_max]
        return KernelBasis(self.omega0, [self.vectors[i] for i in sel],
                           self.eigenvalues[sel], self.residuals[sel],
                           self.localization[sel])

    def __len__(self):
        return len(self.vectors)


def _localization_ratio(u, grid):
    """Outer-half vs inner-half field mass; small means localized."""
    ec, hc = colocate(u)
    r = grid.cell_radii()
    dens = np.sum(np.abs(ec) ** 2 + np.abs(hc) ** 2, axis=-1)
    outer = float(np.sum(dens[r >= 0.5 * grid.r_max]))
    inner = float(np.sum(dens[r < 0.5 * grid.r_max]))
    if inner == 0.0:
        return np.inf
    return np.sqrt(outer / inner)


def eigensolve_near(op, omega0, k=6):
    """Shift-invert eigenpairs of the weighted self-adjoint pencil nearest
    the real frequency omega0 (nonnegative side).  Magnetic parts are
    reconstructed from the electric eigenvectors of the curl-curl pencil.
    """
    blk = op.blocks
    if not blk._is_diag(blk.w_face):
        raise ConvergenceFailure("eigensolve needs a diagonal magnetic mass")
    wf_inv = 1.0 / blk.w_face.diagonal()
    s = _curlcurl(op, wf_inv)
    sigma = float(omega0) ** 2
    opinv = None
    # the spectral inverse is exact on the empty vacuum box; prefer it at
    # every size (ARPACK's own factorization struggles with the large
    # gradient kernel even on small grids)
    empty_vacuum = not np.any(op.grid.mask) and op.mat.is_isotropic
    if op.grid.n > _DIRECT_LIMIT or empty_vacuum:
        opinv = _shift_invert_operator(op, s, sigma)
    # fixed start vector: reproducible runs, and ARPACK occasionally stalls
    # from an unlucky random start near the gradient kernel
    v0 = np.random.default_rng(0).standard_normal(s.shape[0])
    try:
        vals, vecs = spla.eigsh(s, k=k, M=blk.w_edge.tocsc(), sigma=sigma,
                                which="LM", mode="normal", OPinv=opinv,
                                v0=v0, maxiter=100000)
    except Exception as exc:  # ARPACK failures surface as our error class
        raise ConvergenceFailure(str(exc)) from exc
    h3 = op.grid.h ** 3
    order = np.argsort(np.abs(np.sqrt(np.maximum(vals, 0.0)) - omega0))
    vectors, eigenvalues, residuals, localization = [], [], [], []
    for i in order:
        lam2 = float(vals[i])
        lam = np.sqrt(max(lam2, 0.0))
        e = vecs[:, i].astype(complex)
        if lam > 1e-12:
            h = 1j * h3 * wf_inv * (op.curl @ e) / lam
        else:
            h = np.zeros(op.dofs.n_face, dtype=complex)
        v = FieldPair(e, h, op.dofs)
        nv = op.lambda_norm(v)
        if nv == 0.0:
            continue
        v = v * (1.0 / nv)
        res = op.lambda_norm(op.apply_maxwell(v) - lam * v)
        vectors.append(v)
        eigenvalues.append(complex(lam))
        residuals.append(res)
        localization.append(_localization_ratio(v, op.grid))
    return KernelBasis(omega0=float(omega0), vectors=vectors,
                       eigenvalues=np.asarray(eigenvalues),
                       residuals=np.asarray(residuals),
                       localization=np.asarray(localization))


def _shift_invert_operator(op, s_mat, sigma):
    """Matrix-free (S - sigma W_e)^{-1} for large grids.

    On the empty vacuum box the spectral inverse is exact; otherwise it
    preconditions an inner GMRES on the true shifted matrix.
    """
    from .spectral_box import BoxCurlCurlSolver

    blk = op.blocks
    dofs, h3 = op.dofs, op.grid.h ** 3
    mat = op.mat
    box = BoxCurlCurlSolver(op.grid.n, op.grid.h, eps0=mat.eps0, mu0=mat.mu0)
    we = blk.w_edge.diagonal()
    exact = (not np.any(op.grid.mask)
             and mat.is_isotropic
             and np.allclose(we, mat.eps0 * h3, rtol=1e-13)
             and dofs.n_edge == 3 * op.grid.n * (op.grid.n - 1) ** 2)
    if exact:
        def matvec(v):
            return np.real(box.solve_packed(dofs, v.astype(complex), sigma)) / h3
    else:
        a = (s_mat - sigma * blk.w_edge).tocsr()
        pre = spla.LinearOperator(
            a.shape, matvec=lambda v: box.solve_packed(dofs, v, sigma) / h3,
            dtype=complex)

        def matvec(v):
            x, info = spla.gmres(a, v.astype(complex), rtol=1e-12, atol=0.0,
                                 restart=150, maxiter=10, M=pre)
            if info != 0:
                raise ConvergenceFailure(
                    "inner shift-invert solve stalled; use a direct grid size")
            return np.real(x)

    return spla.LinearOperator((dofs.n_edge, dofs.n_edge), matvec=matvec,
                               dtype=float)


def project_out_kernel(f, basis, mat=None, op=None):
    """Remove the weighted projection onto the basis vectors from f."""
    if len(basis) == 0:
        return f
    from .materials import lambda_inner
    out = f.copy()
    for v in basis.vectors:
        coef = lambda_inner(out, v, mat if mat is not None else op.mat)
        out = out - coef * v
    return out
