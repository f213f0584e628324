"""Exact trigonometric diagonalization of the constant-coefficient staggered
curl-curl operator on the full box with tangential-E = 0 walls.

Per edge component the eigenbasis is a cosine (half-sample) profile along
the component axis and sine (node) profiles along the other two; a triple of
matched mode indices couples through the 3x3 symbol |s|^2 I - s s^T with
s_d = (2/h) sin(pi p_d / (2N)).  This gives an O(N^3 log N) exact solve of

    (C^T C / mu0 - omega^2 eps0) E = b

on the empty box, used directly as a solver there and as a preconditioner
for obstacle grids (where the boundary elimination is a localized
perturbation).
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft


class BoxCurlCurlSolver:
    """Reusable spectral solver at fixed grid size and material constants."""

    def __init__(self, n, h, eps0=1.0, mu0=1.0, workers=1):
        self.n = int(n)
        self.h = float(h)
        self.eps0 = float(eps0)
        self.mu0 = float(mu0)
        self.workers = workers
        self._sax = (2.0 / h) * np.sin(np.pi * np.arange(n) / (2 * n))

    # transforms --------------------------------------------------------
    def _fwd(self, a, comp):
        for ax in range(3):
            if ax == comp:
                a = sfft.dct(a, type=2, axis=ax, norm="ortho",
                             workers=self.workers)
            else:
                a = sfft.dst(a, type=1, axis=ax, norm="ortho",
                             workers=self.workers)
        return a

    def _inv(self, a, comp):
        for ax in range(3):
            if ax == comp:
                a = sfft.dct(a, type=3, axis=ax, norm="ortho",
                             workers=self.workers)
            else:
                a = sfft.dst(a, type=1, axis=ax, norm="ortho",
                             workers=self.workers)
        return a

    def solve(self, bx, by, bz, omega2):
        """Solve (curl curl / mu0 - omega2 * eps0) E = b on interior arrays.

        Interior shapes: component d has n entries along axis d and n-1
        along the others (wall-tangential dofs eliminated).
        """
        cx = self._fwd(np.ascontiguousarray(bx), 0)
        cy = self._fwd(np.ascontiguousarray(by), 1)
        cz = self._fwd(np.ascontiguousarray(bz), 2)
        shift = self.eps0 * complex(omega2)
        # Coefficient (p,q,r) of component d sits at cos-index p_d along its
        # own axis and sin-indices along the others; embed all three on a
        # common (n,n,n) index cube, zero-padding the absent sin index 0.
        n = self.n
        cube = np.zeros((3, n, n, n), dtype=complex)
        cube[0, :, 1:, 1:] = cx
        cube[1, 1:, :, 1:] = cy
        cube[2, 1:, 1:, :] = cz
        # along axis d the wavenumber for every component is the same
        # function of the shared index p_d: (2/h) sin(pi p_d / (2N))
        SX = self._sax[:, None, None]
        SY = self._sax[None, :, None]
        SZ = self._sax[None, None, :]
        s2 = SX ** 2 + SY ** 2 + SZ ** 2
        sdotb = SX * cube[0] + SY * cube[1] + SZ * cube[2]
        denom_perp = s2 / self.mu0 - shift
        denom_par = -shift
        with np.errstate(invalid="ignore", divide="ignore"):
            s2_safe = np.where(s2 > 0, s2, 1.0)
            par_x = SX * sdotb / s2_safe
            par_y = SY * sdotb / s2_safe
            par_z = SZ * sdotb / s2_safe
        res = np.empty_like(cube)
        res[0] = (cube[0] - par_x) / denom_perp + par_x / denom_par
        res[1] = (cube[1] - par_y) / denom_perp + par_y / denom_par
        res[2] = (cube[2] - par_z) / denom_perp + par_z / denom_par
        ex = self._inv(np.ascontiguousarray(res[0][:, 1:, 1:]), 0)
        ey = self._inv(np.ascontiguousarray(res[1][1:, :, 1:]), 1)
        ez = self._inv(np.ascontiguousarray(res[2][1:, 1:, :]), 2)
        return ex, ey, ez

    # packed-dof adapters ------------------------------------------------
    def interior_slices(self, comp):
        sl = [slice(1, self.n)] * 3
        sl[comp] = slice(0, self.n)
        return tuple(sl)

    def solve_packed(self, dofs, rhs, omega2):
        """Solve on packed retained edge dofs (zero-fill elsewhere)."""
        grid = dofs.grid
        comps = dofs.unpack_edges(rhs)
        ins = [np.ascontiguousarray(comps[d][self.interior_slices(d)])
               for d in range(3)]
        ex, ey, ez = self.solve(ins[0], ins[1], ins[2], omega2)
        out = []
        for d, sol in enumerate((ex, ey, ez)):
            full = np.zeros(grid.edge_shape(d), dtype=complex)
            full[self.interior_slices(d)] = sol
            out.append(full)
        packed = np.empty(dofs.n_edge, dtype=complex)
        for d in range(3):
            packed[dofs.edge_index[d][dofs.edge_keep[d]]] = out[d][dofs.edge_keep[d]]
        return packed
