"""Staggered exterior-domain grid: obstacle voxelization, boundary labeling,
radial weights, smooth radial cutoffs, and shell quadrature.

Conventions
-----------
The computational box is [-L, L]^3 with L = N*h/2, cut into N^3 cubic cells.
Electric dofs live on cell edges (component along the edge), magnetic dofs on
cell faces (component normal to the face).  Edge arrays for component ``d``
have N entries along axis ``d`` and N+1 along the other two; face arrays have
N+1 entries along axis ``d`` and N along the others.

Boundary faces carry one of two labels: ``pec`` (tangential E forced to zero)
or ``pmc`` (tangential H zero, enforced weakly by the one-sided curl stencil).
The outer box surface is always ``pec``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import (
    BadParameters,
    DimensionMismatch,
    DomainDisconnected,
    ObstacleTooLarge,
    ShellOutsideDomain,
    UnlabeledFace,
)

PEC = 1  # tangential E = 0
PMC = 2  # tangential H = 0


def radial_weight(points, t):
    """(1 + |x|^2)^(t/2) evaluated at an (..., 3) array of points."""
    pts = np.asarray(points, dtype=float)
    r2 = np.sum(pts * pts, axis=-1)
    return (1.0 + r2) ** (t / 2.0)


# ----------------------------------------------------------------------
# obstacles

def voxelize_obstacle(obstacle, centers_x, r0):
    """Boolean cell mask (True = inside obstacle) from a shape description.

    ``obstacle`` is None, "none", or a dict with ``kind`` in
    {"sphere", "box", "union"}.
    """
    n = centers_x.size
    if obstacle is None or obstacle == "none" or obstacle == {}:
        return np.zeros((n, n, n), dtype=bool)
    xc, yc, zc = np.meshgrid(centers_x, centers_x, centers_x, indexing="ij")
    kind = obstacle.get("kind")
    if kind == "sphere":
        a = float(obstacle["radius"])
        c = np.asarray(obstacle.get("center", (0.0, 0.0, 0.0)), dtype=float)
        if np.linalg.norm(c) + a > r0:
            raise ObstacleTooLarge(
                f"sphere of radius {a} at {c} exceeds the obstacle ball radius {r0}")
        return (xc - c[0]) ** 2 + (yc - c[1]) ** 2 + (zc - c[2]) ** 2 < a * a
    if kind == "box":
        half = np.asarray(obstacle["half_widths"], dtype=float)
        c = np.asarray(obstacle.get("center", (0.0, 0.0, 0.0)), dtype=float)
        if np.linalg.norm(c) + np.linalg.norm(half) > r0:
            raise ObstacleTooLarge(
                f"box with half widths {half} at {c} exceeds the obstacle ball radius {r0}")
        return ((np.abs(xc - c[0]) < half[0])
                & (np.abs(yc - c[1]) < half[1])
                & (np.abs(zc - c[2]) < half[2]))
    if kind == "union":
        mask = np.zeros((n, n, n), dtype=bool)
        for part in obstacle["parts"]:
            mask |= voxelize_obstacle(part, centers_x, r0)
        return mask
    raise BadParameters(f"unknown obstacle kind {kind!r}")


# ----------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class StaggeredGrid:
    h: float
    n: int
    r0: float
    mask: np.ndarray  # (n,n,n) bool, True = obstacle cell (excluded)

    def __post_init__(self):
        if self.h <= 0:
            raise BadParameters("h must be positive")
        if self.n < 4:
            raise BadParameters("need at least 4 cells per axis")
        if self.r_max <= 2.0 * self.r0:
            raise BadParameters(
                f"truncation radius {self.r_max} must exceed 2*r0 = {2 * self.r0}")
        active = ~self.mask
        lab, num = ndimage.label(active)
        if num != 1:
            raise DomainDisconnected(f"active region splits into {num} components")
        centers = self.cell_centers_axis
        xc, yc, zc = np.meshgrid(centers, centers, centers, indexing="ij")
        rc = np.sqrt(xc * xc + yc * yc + zc * zc)
        if np.any(self.mask & (rc >= self.r0)):
            raise ObstacleTooLarge(
                "obstacle cells must have centers inside the r0 ball")

    # geometry ---------------------------------------------------------
    @property
    def r_max(self):
        return 0.5 * self.n * self.h

    @property
    def nodes_axis(self):
        return -self.r_max + self.h * np.arange(self.n + 1)

    @property
    def cell_centers_axis(self):
        return -self.r_max + self.h * (np.arange(self.n) + 0.5)

    @property
    def active(self):
        return ~self.mask

    def cell_centers(self):
        """(n,n,n,3) array of cell-center coordinates."""
        c = self.cell_centers_axis
        xc, yc, zc = np.meshgrid(c, c, c, indexing="ij")
        return np.stack([xc, yc, zc], axis=-1)

    def cell_radii(self):
        cc = self.cell_centers()
        return np.sqrt(np.sum(cc * cc, axis=-1))

    def edge_shape(self, d):
        s = [self.n + 1] * 3
        s[d] = self.n
        return tuple(s)

    def face_shape(self, d):
        s = [self.n] * 3
        s[d] = self.n + 1
        return tuple(s)

    def edge_axes(self, d):
        """Coordinate axes (ax0, ax1, ax2) for edge dofs of component d."""
        return tuple(self.cell_centers_axis if a == d else self.nodes_axis
                     for a in range(3))

    def face_axes(self, d):
        return tuple(self.nodes_axis if a == d else self.cell_centers_axis
                     for a in range(3))

    def edge_points(self, d):
        ax = self.edge_axes(d)
        g = np.meshgrid(*ax, indexing="ij")
        return np.stack(g, axis=-1)

    def face_points(self, d):
        ax = self.face_axes(d)
        g = np.meshgrid(*ax, indexing="ij")
        return np.stack(g, axis=-1)

    # incidence --------------------------------------------------------
    def _padded_active(self):
        p = np.zeros((self.n + 2,) * 3, dtype=bool)
        p[1:-1, 1:-1, 1:-1] = self.active
        return p

    def candidate_edges(self, d):
        """Edges of component d touching at least one active cell."""
        p = self._padded_active()
        sl_cell = slice(1, -1)
        out = np.zeros(self.edge_shape(d), dtype=bool)
        others = [a for a in range(3) if a != d]
        # the four cells around an edge differ by 0/-1 along the two other axes
        for da in (0, 1):
            for db in (0, 1):
                sl = [None, None, None]
                sl[d] = sl_cell
                sl[others[0]] = slice(da, da + self.n + 1)
                sl[others[1]] = slice(db, db + self.n + 1)
                out |= p[tuple(sl)]
        return out

    def _face_sides(self, d):
        """(before, after) active flags of the two cells adjacent to d-faces."""
        p = self._padded_active()
        sl = [slice(1, -1)] * 3
        sl_lo = list(sl)
        sl_lo[d] = slice(0, self.n + 1)
        sl_hi = list(sl)
        sl_hi[d] = slice(1, self.n + 2)
        return p[tuple(sl_lo)], p[tuple(sl_hi)]

    def candidate_faces(self, d):
        lo, hi = self._face_sides(d)
        return lo | hi

    def boundary_faces(self, d):
        """Faces with exactly one active neighbor (obstacle or outer wall)."""
        lo, hi = self._face_sides(d)
        return lo ^ hi

    def outer_faces(self, d):
        """Boundary faces lying on the box surface."""
        lo, hi = self._face_sides(d)
        out = np.zeros(self.face_shape(d), dtype=bool)
        first = [slice(None)] * 3
        first[d] = 0
        last = [slice(None)] * 3
        last[d] = self.n
        out[tuple(first)] = hi[tuple(first)]
        out[tuple(last)] = lo[tuple(last)]
        return out

    def summary(self):
        return {
            "h": self.h,
            "N": self.n,
            "r0": self.r0,
            "R_max": self.r_max,
            "cells_active": int(np.count_nonzero(self.active)),
            "cells_masked": int(np.count_nonzero(self.mask)),
        }


def build_grid(h, n, obstacle=None, r0=None):
    """Construct the truncated exterior grid; see module docstring."""
    if r0 is None:
        raise BadParameters("r0 is required")
    centers = -0.5 * n * h + h * (np.arange(n) + 0.5)
    mask = voxelize_obstacle(obstacle, centers, r0)
    return StaggeredGrid(h=float(h), n=int(n), r0=float(r0), mask=mask)


# ----------------------------------------------------------------------
# boundary labeling

@dataclass(frozen=True)
class BoundaryLabeling:
    """Per-face labels: 0 = not a boundary face, PEC = 1, PMC = 2.

    ``labels`` is a tuple of three int8 arrays, one per face component.
    Outer-wall faces are always PEC.
    """
    labels: tuple
    n_pec: int
    n_pmc: int

    def key(self):
        return tuple(lab.tobytes() for lab in self.labels)


def classify_boundary(grid, rule="all_pec"):
    """Assign a PEC/PMC label to every obstacle boundary face.

    ``rule`` is "all_pec", "all_pmc", "hemisphere" (z >= 0 is PEC, the rest
    PMC), or a callable mapping an (m, 3) array of face centers to a boolean
    array (True = PEC).
    """
    labels = []
    n_pec = n_pmc = 0
    for d in range(3):
        lab = np.zeros(grid.face_shape(d), dtype=np.int8)
        bnd = grid.boundary_faces(d)
        outer = grid.outer_faces(d)
        obst = bnd & ~outer
        lab[outer] = PEC
        if np.any(obst):
            if rule == "all_pec":
                lab[obst] = PEC
            elif rule == "all_pmc":
                lab[obst] = PMC
            elif rule == "hemisphere":
                pts = grid.face_points(d)[obst]
                lab[obst] = np.where(pts[:, 2] >= 0.0, PEC, PMC)
            elif callable(rule):
                pts = grid.face_points(d)[obst]
                res = np.asarray(rule(pts))
                if res.shape != (pts.shape[0],):
                    raise UnlabeledFace("labeling rule left faces unassigned")
                lab[obst] = np.where(res, PEC, PMC)
            else:
                raise BadParameters(f"unknown labeling rule {rule!r}")
        n_pec += int(np.count_nonzero(lab == PEC))
        n_pmc += int(np.count_nonzero(lab == PMC))
        labels.append(lab)
    return BoundaryLabeling(labels=tuple(labels), n_pec=n_pec, n_pmc=n_pmc)


# ----------------------------------------------------------------------
# dof maps

def _face_edges(d):
    """Edge component/offset pattern of the four edges bounding a d-face.

    Returns a list of (edge_component, offset) where offset is added to the
    face index to get the edge index.
    """
    others = [a for a in range(3) if a != d]
    pat = []
    for e in others:
        o = [a for a in others if a != e][0]
        for shift in (0, 1):
            off = [0, 0, 0]
            off[o] = shift
            pat.append((e, tuple(off)))
    return pat


@dataclass(frozen=True)
class DofMap:
    """Retained-dof numbering for a grid/labeling combination."""
    grid: StaggeredGrid
    labeling: BoundaryLabeling
    edge_keep: tuple      # three bool arrays
    face_keep: tuple
    edge_index: tuple     # int arrays, -1 where not retained
    face_index: tuple
    n_edge: int
    n_face: int

    @property
    def n_total(self):
        return self.n_edge + self.n_face

    def pack_edges(self, comps):
        out = np.empty(self.n_edge, dtype=complex)
        for d in range(3):
            out[self.edge_index[d][self.edge_keep[d]]] = comps[d][self.edge_keep[d]]
        return out

    def unpack_edges(self, vec):
        comps = []
        for d in range(3):
            arr = np.zeros(self.grid.edge_shape(d), dtype=complex)
            arr[self.edge_keep[d]] = vec[self.edge_index[d][self.edge_keep[d]]]
            comps.append(arr)
        return comps

    def pack_faces(self, comps):
        out = np.empty(self.n_face, dtype=complex)
        for d in range(3):
            out[self.face_index[d][self.face_keep[d]]] = comps[d][self.face_keep[d]]
        return out

    def unpack_faces(self, vec):
        comps = []
        for d in range(3):
            arr = np.zeros(self.grid.face_shape(d), dtype=complex)
            arr[self.face_keep[d]] = vec[self.face_index[d][self.face_keep[d]]]
            comps.append(arr)
        return comps

    def edge_dof_points(self):
        pts = np.empty((self.n_edge, 3))
        for d in range(3):
            pts[self.edge_index[d][self.edge_keep[d]]] = \
                self.grid.edge_points(d)[self.edge_keep[d]]
        return pts

    def face_dof_points(self):
        pts = np.empty((self.n_face, 3))
        for d in range(3):
            pts[self.face_index[d][self.face_keep[d]]] = \
                self.grid.face_points(d)[self.face_keep[d]]
        return pts


def _index_from_keep(keep):
    idx = np.full(keep.shape, -1, dtype=np.int64)
    cnt = int(np.count_nonzero(keep))
    idx[keep] = np.arange(cnt)
    return idx, cnt


def build_dof_maps(grid, labeling):
    """Retained edges: candidates minus the edges of PEC-labeled faces.
    Retained faces: candidates minus PEC-labeled boundary faces (whose curl
    row would be identically zero).  PMC faces stay; their tangential-H
    condition is carried by the one-sided transpose-curl stencil.
    """
    kill_edge = [np.zeros(grid.edge_shape(d), dtype=bool) for d in range(3)]
    for d in range(3):
        pec = labeling.labels[d] == PEC
        if not np.any(pec):
            continue
        where = np.argwhere(pec)
        for (e, off) in _face_edges(d):
            idx = where + np.asarray(off)
            kill_edge[e][idx[:, 0], idx[:, 1], idx[:, 2]] = True

    edge_keep, face_keep = [], []
    edge_index, face_index = [], []
    n_edge = n_face = 0
    for d in range(3):
        keep = grid.candidate_edges(d) & ~kill_edge[d]
        idx = np.full(keep.shape, -1, dtype=np.int64)
        cnt = int(np.count_nonzero(keep))
        idx[keep] = n_edge + np.arange(cnt)
        n_edge += cnt
        edge_keep.append(keep)
        edge_index.append(idx)
    for d in range(3):
        keep = grid.candidate_faces(d) & ~(labeling.labels[d] == PEC)
        idx = np.full(keep.shape, -1, dtype=np.int64)
        cnt = int(np.count_nonzero(keep))
        idx[keep] = n_face + np.arange(cnt)
        n_face += cnt
        face_keep.append(keep)
        face_index.append(idx)
    return DofMap(grid=grid, labeling=labeling,
                  edge_keep=tuple(edge_keep), face_keep=tuple(face_keep),
                  edge_index=tuple(edge_index), face_index=tuple(face_index),
                  n_edge=n_edge, n_face=n_face)


# ----------------------------------------------------------------------
# weights and norms

def weight_samples(grid, t, points=None):
    """Per-dof weights (1+|x|^2)^(t/2); defaults to cell centers."""
    if points is None:
        points = grid.cell_centers()
    return radial_weight(points, t)


def weighted_norm(values, grid, t, points=None):
    """Weighted L2 norm (sum rho^{2t} |f|^2 h^3)^(1/2) over cell centers or
    supplied dof locations.  Trailing component axes of ``values`` relative
    to ``points`` are summed as vector magnitudes.
    """
    values = np.asarray(values)
    if points is None:
        points = grid.cell_centers()
        if values.shape[:3] != (grid.n,) * 3:
            raise DimensionMismatch(
                f"expected leading shape {(grid.n,) * 3}, got {values.shape}")
    w = radial_weight(points, t)
    mag2 = np.abs(values) ** 2
    while mag2.ndim > w.ndim:
        mag2 = np.sum(mag2, axis=-1)
    if mag2.shape != w.shape:
        raise DimensionMismatch(
            f"field shape {values.shape} does not match points {points.shape}")
    return float(np.sqrt(np.sum(w ** 2 * mag2) * grid.h ** 3))


def shell_integral(values, r, grid, points=None):
    """Quadrature of |values|^2 over the discrete sphere of radius r
    (cell centers with radius in [r - h/2, r + h/2), scaled by 1/h to
    approximate surface measure).
    """
    if r >= grid.r_max:
        raise ShellOutsideDomain(f"shell radius {r} outside box (R_max={grid.r_max})")
    values = np.asarray(values)
    if points is None:
        points = grid.cell_centers()
    rad = np.sqrt(np.sum(points * points, axis=-1))
    sel = (rad >= r - 0.5 * grid.h) & (rad < r + 0.5 * grid.h)
    mag2 = np.abs(values) ** 2
    while mag2.ndim > rad.ndim:
        mag2 = np.sum(mag2, axis=-1)
    if mag2.shape != rad.shape:
        raise DimensionMismatch("field/points shape mismatch")
    return float(np.sum(mag2[sel]) * grid.h ** 3 / grid.h)


# ----------------------------------------------------------------------
# cutoffs

def _smooth_step(t):
    """C^4 monotone polynomial step: 0 for t <= 0, 1 for t >= 1, with the
    first four derivatives vanishing at both endpoints.  The degree-9
    polynomial keeps the higher derivatives moderate, so finite-difference
    stencils applied across the blend converge at their nominal order on
    practical grids (an exponential-type blend has factorially growing
    derivatives and stays pre-asymptotic)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t ** 5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + t * 70.0))))


def _smooth_step_deriv(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    out[mid] = 630.0 * tm ** 4 * (1.0 - tm) ** 4
    return out


@dataclass(frozen=True)
class CutoffFamily:
    """Radial cutoffs eta_k(x) = profile(|x| / r_k), r_k = 2^k * r0.

    The profile is exactly 1 for s <= 1 + delta and exactly 0 for
    s >= 2 - delta, with a smooth monotone blend in between.
    """
    r0: float
    delta: float = 0.1

    def radius(self, k):
        return (2.0 ** k) * self.r0

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        t = (s - (1.0 + self.delta)) / (1.0 - 2.0 * self.delta)
        return 1.0 - _smooth_step(t)

    def profile_deriv(self, s):
        s = np.asarray(s, dtype=float)
        t = (s - (1.0 + self.delta)) / (1.0 - 2.0 * self.delta)
        return -_smooth_step_deriv(t) / (1.0 - 2.0 * self.delta)

    def eta(self, k, points):
        pts = np.asarray(points, dtype=float)
        r = np.sqrt(np.sum(pts * pts, axis=-1))
        return self.profile(r / self.radius(k))

    def eta_check(self, k, points):
        return 1.0 - self.eta(k, points)

    def grad_eta(self, k, points):
        """Analytic gradient of eta_k; zero at the origin."""
        pts = np.asarray(points, dtype=float)
        r = np.sqrt(np.sum(pts * pts, axis=-1))
        rk = self.radius(k)
        dp = self.profile_deriv(r / rk) / rk
        safe = np.where(r > 0, r, 1.0)
        return dp[..., None] * pts / safe[..., None]


def cutoff_eval(family, k, x):
    """Value of eta_k at a single point or array of points."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    val = family.eta(k, x if not single else x[None, :])
    return float(val[0]) if single else val
