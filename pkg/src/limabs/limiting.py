"""Vanishing-absorption driver: complex frequency schedule, truncation-radius
control, Cauchy monitoring in weighted norms, and the outgoing-solution
certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameters, NotConverged
from .grid import radial_weight
from .operators import silver_mueller_residual
from .resolvent import (
    ShiftedSolver,
    pair_r_norm,
    pair_weighted_norm,
    solve_resolvent,
)


@dataclass(frozen=True)
class FrequencySchedule:
    omega: float
    sigma0: float
    ratio: float
    n_max: int
    half_plane: str = "upper"

    @property
    def sigmas(self):
        return self.sigma0 * self.ratio ** np.arange(self.n_max)

    @property
    def omegas(self):
        out = []
        for s in self.sigmas:
            w = np.sqrt(complex(self.omega ** 2, s * self.omega))
            if w.imag < 0:
                w = -w
            if self.half_plane == "lower":
                w = np.conj(w)
            out.append(w)
        return np.asarray(out)


def make_schedule(omega, sigma0, ratio, n_max, half_plane="upper"):
    if omega == 0.0:
        raise BadParameters("schedule omega must be nonzero")
    if not 0.0 < ratio < 1.0:
        raise BadParameters("schedule.ratio must be in (0,1)")
    if sigma0 <= 0.0 or n_max < 1:
        raise BadParameters("need sigma0 > 0 and n_max >= 1")
    sched = FrequencySchedule(float(omega), float(sigma0), float(ratio),
                              int(n_max), half_plane)
    im = np.imag(sched.omegas)
    if half_plane == "upper":
        assert np.all(im > 0) and np.all(np.diff(im) < 0)
    return sched


@dataclass(frozen=True)
class TruncationChoice:
    radius: float
    error_bound: float
    flagged: bool


def choose_truncation(omega_n, mat, support_radius, tol, budget):
    """Truncation radius from the exponential decay rate Im(omega_n)*sqrt(
    eps0*mu0); flagged when the budget caps it above the requested bound."""
    rate = abs(omega_n.imag) * np.sqrt(mat.eps0 * mat.mu0)
    want = support_radius + np.log(1.0 / tol) / rate if tol < 1.0 else support_radius
    r = min(budget, want)
    bound = float(np.exp(-rate * max(r - support_radius, 0.0)))
    return TruncationChoice(radius=float(r), error_bound=bound,
                            flagged=bool(r < want - 1e-12))


@dataclass
class LimitRun:
    schedule: FrequencySchedule
    iterates: list
    gaps: np.ndarray
    gap_ratios: np.ndarray
    converged: bool
    u_star: object
    monitor_t: float
    radiation: np.ndarray        # weighted outgoing-residual norm per iterate
    kernel_products: list        # per iterate: list of |<u_n, v_i>_Lambda|
    truncation: list             # TruncationChoice per step
    solves: list                 # solve records
    extrapolated: bool = False

    def table(self):
        rows = []
        for i, w in enumerate(self.schedule.omegas):
            rows.append({
                "n": i,
                "sigma": float(self.schedule.sigmas[i]),
                "omega_re": float(w.real),
                "omega_im": float(w.imag),
                "gap": float(self.gaps[i - 1]) if i >= 1 else float("nan"),
                "radiation_residual": float(self.radiation[i]),
                "truncation_bound": self.truncation[i].error_bound,
                "truncation_flagged": self.truncation[i].flagged,
            })
        return rows


def run_limit(op, schedule, f, monitor_t=-1.0, kernel=None, tol=1e-10,
              truncation_tol=1e-6, extrapolate=False, keep_iterates=True,
              strict=False):
    """Solve along the schedule and monitor Cauchy gaps at weight monitor_t."""
    if monitor_t >= -0.5:
        raise BadParameters("monitor weight must be below -1/2")
    mat = op.mat
    if kernel is not None and len(kernel) > 0:
        from .resolvent import project_out_kernel
        f = project_out_kernel(f, kernel, mat=mat)
    omegas = schedule.omegas
    support = _support_radius(f, op)
    iterates, records, trunc = [], [], []
    for i, w in enumerate(omegas):
        solver = ShiftedSolver(op, w, tol=tol)
        sol = solve_resolvent(op, w, f, tol=tol, solver=solver)
        iterates.append(sol.u)
        records.append(sol.record())
        trunc.append(choose_truncation(w, mat, support, truncation_tol,
                                       op.grid.r_max))
    gaps = np.array([pair_weighted_norm(iterates[i + 1] - iterates[i], monitor_t)
                     for i in range(len(iterates) - 1)])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = gaps[1:] / gaps[:-1]
    last = ratios[-3:] if ratios.size >= 3 else ratios
    converged = bool(last.size > 0 and np.all(last <= 0.9))
    if not converged and np.all(gaps == 0.0):
        converged = True  # trivial run (zero data)
    u_star = iterates[-1]
    extrapolated = False
    if extrapolate and len(iterates) >= 2:
        s_prev, s_last = schedule.sigmas[-2], schedule.sigmas[-1]
        u_star = (s_prev * iterates[-1] - s_last * iterates[-2]) \
            * (1.0 / (s_prev - s_last))
        extrapolated = True
    shells = _default_shells(op.grid)
    radiation = np.array([
        silver_mueller_residual(u, mat, -0.25, shells).outgoing_weighted
        for u in iterates])
    products = []
    for u in iterates:
        if kernel is not None and len(kernel) > 0:
            from .materials import lambda_inner
            products.append([abs(lambda_inner(u, v, mat))
                             for v in kernel.vectors])
        else:
            products.append([])
    run = LimitRun(schedule=schedule,
                   iterates=iterates if keep_iterates else [],
                   gaps=gaps, gap_ratios=ratios, converged=converged,
                   u_star=u_star, monitor_t=float(monitor_t),
                   radiation=radiation, kernel_products=products,
                   truncation=trunc, solves=records,
                   extrapolated=extrapolated)
    if strict and not converged:
        raise NotConverged("Cauchy gaps did not settle; see run.table()")
    return run


def _support_radius(f, op):
    """Radius of the smallest origin ball containing the source support."""
    pts_e = f.dofs.edge_dof_points()
    pts_f = f.dofs.face_dof_points()
    r = 0.0
    for vals, pts in ((f.e, pts_e), (f.h, pts_f)):
        nz = np.abs(vals) > 1e-14 * max(np.abs(vals).max(), 1e-300)
        if np.any(nz):
            r = max(r, float(np.sqrt((pts[nz] ** 2).sum(axis=1)).max()))
    return r


def _default_shells(grid, n_shells=8, r_min=None):
    lo = r_min if r_min is not None else 1.5 * grid.r0
    hi = 0.92 * grid.r_max
    return np.linspace(lo, hi, n_shells)


def apriori_report(run, s=1.0, t=-1.0, that=-0.25, op=None, f=None, delta=1.0):
    """Empirical constants of the graph-norm a-priori bound along the run:
    (||u_n||_{R_t} + ||radiation functional||_{that}) over
    (||f||_{L2_s} + ||u_n||_{L2_{-delta}}).
    """
    if s <= 0.5 or t >= -0.5:
        raise BadParameters("need s > 1/2 and t < -1/2")
    shells = _default_shells(op.grid)
    fs = pair_weighted_norm(f, s)
    rows = []
    for i, u in enumerate(run.iterates):
        lhs = pair_r_norm(u, t, op) + silver_mueller_residual(
            u, op.mat, that, shells).outgoing_weighted
        rhs = fs + pair_weighted_norm(u, -delta)
        rows.append({"n": i, "sigma": float(run.schedule.sigmas[i]),
                     "lhs": lhs, "rhs": rhs,
                     "c": lhs / rhs if rhs > 0 else float("nan"),
                     "truncation_flagged": run.truncation[i].flagged})
    cs = np.array([r["c"] for r in rows if np.isfinite(r["c"])])
    report = {"rows": rows}
    if cs.size:
        report["c_max"] = float(cs.max())
        report["c_median"] = float(np.median(cs))
        report["uniform"] = bool(cs.max() <= 3.0 * np.median(cs))
    else:
        report["uniform"] = True
        report["note"] = "all constants undefined (zero data)"
    return report


def radiating_certificate(u, omega, f, t_grid=(-1.0, -0.75, -0.5, -0.25, 0.0),
                          op=None):
    """Equation residual, weighted-norm profile, and the outgoing/incoming
    contrast.  Passes when the outgoing functional decays at least half an
    order faster than the field across shells (and the incoming one does
    not), or trivially for zero data.
    """
    mat = op.mat
    res = op.apply_maxwell(u) - omega * u - f
    residual = op.lambda_norm(res)
    norms = {float(t): pair_weighted_norm(u, t) for t in t_grid}
    shells = _default_shells(op.grid)
    rad = silver_mueller_residual(u, mat, -0.25, shells)
    if rad.field_weighted == 0.0:
        return {"residual": residual, "norms": norms, "pass": True,
                "trivial": True}
    slope_out = shell_amplitude_slope(shells, rad.outgoing_shell)
    slope_in = shell_amplitude_slope(shells, rad.incoming_shell)
    slope_field = shell_amplitude_slope(shells, rad.field_shell)
    passed = bool(slope_out <= slope_field - 0.5)
    return {
        "residual": residual,
        "norms": norms,
        "radiation_norms": {"outgoing": rad.outgoing_weighted,
                            "incoming": rad.incoming_weighted,
                            "field": rad.field_weighted},
        "slopes": {"outgoing": slope_out, "incoming": slope_in,
                   "field": slope_field},
        "pass": passed,
        "trivial": False,
    }


def _loglog_slope(radii, values):
    vals = np.asarray(values, dtype=float)
    ok = vals > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(radii)[ok]), np.log(vals[ok]), 1)[0])


def shell_amplitude_slope(radii, shell_norms):
    """Decay exponent of the pointwise shell amplitude: the shell L2 norm is
    divided by sqrt(4 pi r^2), so a 1/r field fits slope -1."""
    radii = np.asarray(radii, dtype=float)
    amp = np.asarray(shell_norms, dtype=float) / np.sqrt(4.0 * np.pi * radii ** 2)
    return _loglog_slope(radii, amp)
