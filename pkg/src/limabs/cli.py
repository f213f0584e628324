"""Command-line entry points.

Commands: solve, verify, spectrum, limit, decompose, helmholtz.
Global flags: --config PATH, --out DIR, --threads N, --seed N
(env LIMABS_THREADS is the fallback for --threads).

Exit codes: 0 success, 2 configuration/usage error, 3 solver error.
All outputs are deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .config import RunConfig, build_scene, build_source, load_config, \
    validate_config
from .errors import ConfigError, LimabsError
from .io_utils import grid_summary, write_csv, write_field_vtk, \
    write_json_record

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _resolve_threads(value):
    if value is not None:
        return int(value)
    env = os.environ.get("LIMABS_THREADS")
    return int(env) if env else 1

def _apply_threads(n):
    for var in ("OMP_NUM_THREADS", "MKL_NUM_THREADS",
                "OPENBLAS_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def _load(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = validate_config({})
    if args.seed is not None:
        data = dict(cfg.raw)
        data["seed"] = int(args.seed)
        cfg = validate_config(data)
    return cfg


def _outdir(args, cfg):
    out = args.out or cfg.outputs.get("dir", ".")
    os.makedirs(out, exist_ok=True)
    return out


# ----------------------------------------------------------------------
# solve

def cmd_solve(cfg, out):
    from .limiting import choose_truncation
    from .resolvent import pair_weighted_norm, solve_resolvent

    grid, labeling, mat, op = build_scene(cfg)
    f = build_source(cfg, op)
    omega = cfg.omega()
    if omega.imag == 0.0:
        raise ConfigError("frequency.omega_im must be nonzero for cmd_solve; "
                          "use the limit command for real frequencies")
    sol = solve_resolvent(op, omega, f, tol=cfg.solver["tol"],
                          method=cfg.solver["method"])
    budget = min(grid.r_max, float(cfg.solver["budget"]))
    src_r = float(np.linalg.norm(cfg.source.get("center", (0, 0, 0)))) \
        + 4.0 * float(cfg.source.get("width", 0.0))
    trunc = choose_truncation(omega, mat, src_r, 1e-6, budget)

    write_field_vtk(os.path.join(out, "solution.vtk"), sol.u, op,
                    config_hash=cfg.hash)
    record = sol.record()
    record["grid"] = grid_summary(grid, op.dofs, labeling)
    record["truncation_radius"] = trunc.radius
    record["truncation_error_bound"] = trunc.error_bound
    record["truncation_flagged"] = trunc.flagged
    record["norm_f"] = op.lambda_norm(f)
    record["norm_u"] = op.lambda_norm(sol.u)
    write_json_record(os.path.join(out, "solve_record.json"), record,
                      config_hash=cfg.hash)
    rows = [{"weight_t": t, "norm_u": pair_weighted_norm(sol.u, t),
             "norm_f": pair_weighted_norm(f, t)}
            for t in (-1.0, -0.5, 0.0, 0.5, 1.0)]
    write_csv(os.path.join(out, "norms.csv"),
              ["weight_t", "norm_u", "norm_f"], rows, config_hash=cfg.hash)
    print(f"solve: wrote 3 files to {out} (residual {sol.residual:.2e})")
    return EXIT_OK


# ----------------------------------------------------------------------
# verify

def _check(name, measured, threshold, larger_is_bad=True):
    ok = measured <= threshold if larger_is_bad else measured >= threshold
    return {"name": name, "measured": float(measured),
            "threshold": float(threshold),
            "direction": "max" if larger_is_bad else "min",
            "passed": bool(ok)}


def _suite_operators(cfg, rng):
    from .operators import FieldPair, node_gradient, face_divergence

    checks = []
    grid, labeling, mat, op = build_scene(cfg)
    dofs = op.dofs
    g, _, _ = node_gradient(dofs)
    cg = op.curl @ g
    checks.append(_check("curl_of_gradient", float(abs(cg).max() if cg.nnz
                                                   else 0.0), 1e-13))
    div, _ = face_divergence(dofs)
    dv = div @ op.curl
    checks.append(_check("div_of_curl", float(abs(dv).max() if dv.nnz
                                              else 0.0), 1e-13))
    worst = 0.0
    for _ in range(5):
        u = FieldPair(rng.standard_normal(dofs.n_edge)
                      + 1j * rng.standard_normal(dofs.n_edge),
                      rng.standard_normal(dofs.n_face)
                      + 1j * rng.standard_normal(dofs.n_face), dofs)
        v = FieldPair(rng.standard_normal(dofs.n_edge)
                      + 1j * rng.standard_normal(dofs.n_edge),
                      rng.standard_normal(dofs.n_face)
                      + 1j * rng.standard_normal(dofs.n_face), dofs)
        gap = abs(op.lambda_inner(op.apply_maxwell(u), v)
                  - op.lambda_inner(u, op.apply_maxwell(v)))
        worst = max(worst, gap / (op.lambda_norm(u) * op.lambda_norm(v)))
    checks.append(_check("self_adjointness", worst, 1e-12))
    return checks


def _suite_resolvent(cfg, rng):
    from .operators import FieldPair
    from .resolvent import solve_resolvent

    checks = []
    grid, labeling, mat, op = build_scene(cfg)
    dofs = op.dofs
    worst = 0.0
    for omega in (1j, 1.0 + 0.5j):
        for _ in range(3):
            f = FieldPair(rng.standard_normal(dofs.n_edge)
                          + 1j * rng.standard_normal(dofs.n_edge),
                          rng.standard_normal(dofs.n_face)
                          + 1j * rng.standard_normal(dofs.n_face), dofs)
            sol = solve_resolvent(op, omega, f, tol=cfg.solver["tol"])
            ratio = op.lambda_norm(sol.u) * abs(omega.imag) / op.lambda_norm(f)
            worst = max(worst, ratio)
    checks.append(_check("resolvent_bound", worst, 1.0 + 1e-8))
    return checks


def _suite_limabs(cfg, rng):
    from .grid import CutoffFamily, build_grid, classify_boundary
    from .limiting import make_schedule, run_limit
    from .materials import build_material
    from .operators import DiscreteMaxwellOperator
    from .oracles import MieSolution, windowed_scenario

    # A windowed scattering solution is compactly supported and therefore
    # the exact vanishing-absorption limit of its own source; the Cauchy
    # gaps must then track the schedule ratio.
    checks = []
    g = cfg.grid
    r0 = float(g["r0"])
    grid = build_grid(h=g["h"], n=int(g["n"]),
                      obstacle={"kind": "sphere", "radius": 0.6 * r0}, r0=r0)
    labeling = classify_boundary(grid, "all_pec")
    mat = build_material({"kind": "vacuum"}, grid)
    op = DiscreteMaxwellOperator(grid, labeling, mat)
    omega = float(cfg.frequency["omega"]) or 1.0
    mie = MieSolution(radius=0.6 * r0, omega=omega)
    mie.self_check()
    window = CutoffFamily(r0=0.36 * grid.r_max)
    _, f = windowed_scenario(op.dofs, omega,
                             lambda pts: mie.total(pts), window)
    sched_cfg = cfg.frequency.get("schedule") or \
        {"sigma0": 0.5, "ratio": 0.5, "n_max": 4}
    sched = make_schedule(omega, sched_cfg["sigma0"],
                          sched_cfg["ratio"], int(sched_cfg["n_max"]))
    run = run_limit(op, sched, f, tol=cfg.solver["tol"])
    checks.append(_check("cauchy_gaps_decreasing",
                         float(run.gap_ratios.max()) if run.gap_ratios.size
                         else 0.0, 0.85))
    checks.append(_check("imag_parts_positive",
                         float(np.imag(sched.omegas).min()), 0.0,
                         larger_is_bad=False))
    return checks


def _suite_decomposition(cfg, rng):
    from .decomposition import helmholtz_decompose
    from .grid import build_dof_maps

    checks = []
    grid, labeling, mat, op = build_scene(cfg)
    dofs = op.dofs
    field = rng.standard_normal(dofs.n_edge) \
        + 1j * rng.standard_normal(dofs.n_edge)
    split = helmholtz_decompose(field, mat.eps, "electric", grid, labeling,
                                dofs=dofs)
    checks.append(_check("gamma_orthogonality", split.orthogonality, 1e-10))
    checks.append(_check("solenoidal_divergence", split.div_residual, 1e-8))
    again = helmholtz_decompose(split.gradient_part, mat.eps, "electric",
                                grid, labeling, dofs=dofs)
    drift = np.linalg.norm(again.gradient_part - split.gradient_part) \
        / max(np.linalg.norm(split.gradient_part), 1e-300)
    checks.append(_check("idempotence", float(drift), 1e-9))
    return checks


def _suite_helmholtz(cfg, rng):
    from .helmholtz import ScalarField, gaussian_bump, h2_regularity_check, \
        solve_scalar_resolvent

    checks = []
    m, h = 24, 0.3
    g = gaussian_bump(m, h, width=0.6)
    g.values = g.values * (1.0 + 0.3j)
    worst = 0.0
    for tau in (1.0, 0.5, 0.25):
        sol = solve_scalar_resolvent(1.0, tau, g)
        ratio = sol.w.weighted_norm(0.0) * 1.0 * tau / g.weighted_norm(0.0)
        worst = max(worst, ratio)
    checks.append(_check("scalar_resolvent_bound", worst, 1.0 + 1e-8))
    worst = 0.0
    for _ in range(10):
        f = ScalarField(values=rng.standard_normal((m, m, m))
                        + 1j * rng.standard_normal((m, m, m)), spacing=h)
        rep = h2_regularity_check(f)
        worst = max(worst, rep["rhs_half"] / rep["lhs"])
    checks.append(_check("fourier_inequality", worst, 1.0 + 1e-12))
    return checks


def _suite_oracles(cfg, rng):
    from .errors import OracleInvalid
    from .oracles import MieSolution, dense_mini_oracle

    checks = []
    try:
        mie = MieSolution(radius=0.6, omega=1.0)
        mie.self_check()
        checks.append(_check("mie_self_check", 0.0, 1.0))
    except OracleInvalid as exc:
        checks.append({"name": "mie_self_check", "measured": float("nan"),
                       "threshold": 1.0, "direction": "max", "passed": False,
                       "detail": str(exc)})
    try:
        rep = dense_mini_oracle()
        checks.append(_check("dense_norm_equalities",
                             rep["probe_gap"], 1e-8))
    except OracleInvalid as exc:
        checks.append({"name": "dense_norm_equalities",
                       "measured": float("nan"), "threshold": 1e-8,
                       "direction": "max", "passed": False,
                       "detail": str(exc)})
    return checks


_SUITES = {
    "operators": _suite_operators,
    "resolvent": _suite_resolvent,
    "limabs": _suite_limabs,
    "decomposition": _suite_decomposition,
    "helmholtz": _suite_helmholtz,
    "oracles": _suite_oracles,
}


def cmd_verify(cfg, out, suite):
    if suite != "all" and suite not in _SUITES:
        raise ConfigError(f"unknown verify suite {suite!r}; expected one of "
                          f"{sorted(_SUITES) + ['all']}")
    names = sorted(_SUITES) if suite == "all" else [suite]
    t0 = time.perf_counter()
    checks = []
    for name in names:
        rng = np.random.default_rng(cfg.seed)
        for chk in _SUITES[name](cfg, rng):
            chk["suite"] = name
            checks.append(chk)
    elapsed = time.perf_counter() - t0
    all_pass = all(c["passed"] for c in checks)
    report = {"suite": suite, "seed": cfg.seed, "checks": checks,
              "all_passed": all_pass}
    write_json_record(os.path.join(out, "verify_report.json"), report,
                      config_hash=cfg.hash)
    write_csv(os.path.join(out, "verify_report.csv"),
              ["suite", "name", "measured", "threshold", "passed"],
              checks, config_hash=cfg.hash)
    for c in checks:
        status = "pass" if c["passed"] else "FAIL"
        print(f"[{status}] {c['suite']}.{c['name']}: measured "
              f"{c['measured']:.3e} vs {c['direction']} {c['threshold']:.3e}")
    print(f"verify: {len(checks)} checks, "
          f"{'all passed' if all_pass else 'FAILURES'}, {elapsed:.1f} s")
    return EXIT_OK if all_pass else 1


# ----------------------------------------------------------------------
# spectrum

def cmd_spectrum(cfg, out):
    from .resolvent import eigensolve_near

    grid, labeling, mat, op = build_scene(cfg)
    omega0 = float(cfg.frequency["omega"])
    basis = eigensolve_near(op, omega0, k=6)
    rows = [{"eigenvalue_re": lam.real, "eigenvalue_im": lam.imag,
             "residual": basis.residuals[i],
             "localization_ratio": basis.localization[i]}
            for i, lam in enumerate(basis.eigenvalues)]
    write_csv(os.path.join(out, "spectrum.csv"),
              ["eigenvalue_re", "eigenvalue_im", "residual",
               "localization_ratio"], rows, config_hash=cfg.hash)
    record = {"omega0": omega0,
              "n_pairs": len(basis),
              "max_abs_imag": float(np.abs(basis.eigenvalues.imag).max())
              if len(basis) else 0.0,
              "grid": grid_summary(grid, op.dofs, labeling)}
    write_json_record(os.path.join(out, "spectrum.json"), record,
                      config_hash=cfg.hash)
    print(f"spectrum: {len(basis)} pairs near {omega0}; files in {out}")
    return EXIT_OK


# ----------------------------------------------------------------------
# limit

def cmd_limit(cfg, out, write_iterates=False):
    from .limiting import make_schedule, run_limit

    sched_cfg = cfg.frequency.get("schedule")
    if sched_cfg is None:
        raise ConfigError("frequency.schedule is required for cmd_limit")
    grid, labeling, mat, op = build_scene(cfg)
    f = build_source(cfg, op)
    sched = make_schedule(cfg.frequency["omega"], sched_cfg["sigma0"],
                          sched_cfg["ratio"], int(sched_cfg["n_max"]))
    run = run_limit(op, sched, f, tol=cfg.solver["tol"])
    table = run.table()
    write_csv(os.path.join(out, "limit_table.csv"),
              ["n", "sigma", "omega_re", "omega_im", "gap",
               "radiation_residual", "truncation_bound",
               "truncation_flagged"], table, config_hash=cfg.hash)
    record = {"converged": run.converged,
              "gaps": run.gaps, "gap_ratios": run.gap_ratios,
              "monitor_t": run.monitor_t,
              "radiation": run.radiation,
              "solves": run.solves,
              "grid": grid_summary(grid, op.dofs, labeling)}
    write_json_record(os.path.join(out, "limit_record.json"), record,
                      config_hash=cfg.hash)
    write_field_vtk(os.path.join(out, "limit_field.vtk"), run.u_star, op,
                    config_hash=cfg.hash)
    if write_iterates:
        for i, u in enumerate(run.iterates):
            write_field_vtk(os.path.join(out, f"iterate_{i:02d}.vtk"), u, op,
                            config_hash=cfg.hash)
    print(f"limit: {len(sched.omegas)} steps, converged={run.converged}; "
          f"files in {out}")
    return EXIT_OK


# ----------------------------------------------------------------------
# decompose

def cmd_decompose(cfg, out):
    from .decomposition import cutoff_identity_decompose
    from .io_utils import write_vtk_cells
    from .resolvent import solve_resolvent

    grid, labeling, mat, op = build_scene(cfg)
    # the splitting's commutator source lives on the cutoff transition
    # [1.1 r0, 1.9 r0], which must fit inside the padded-box support limit
    limit_r = 0.5 * grid.r_max + grid.h
    if 1.9 * grid.r0 > limit_r:
        raise ConfigError(
            "grid too small for the splitting: the cutoff transition "
            f"reaches {1.9 * grid.r0:.2f} but compact support is only "
            f"guaranteed up to {limit_r:.2f}; increase grid.n (need "
            "r_max >= ~3.8*r0)")
    f = build_source(cfg, op)
    omega = cfg.omega()
    if omega.imag == 0.0:
        raise ConfigError("frequency.omega_im must be nonzero for "
                          "cmd_decompose")
    sol = solve_resolvent(op, omega, f, tol=cfg.solver["tol"])
    dec = cutoff_identity_decompose(sol.u, f, omega, mat, grid)
    rows = [{"piece": name, "identity": name, "residual": val, "h": grid.h}
            for name, val in sorted(dec.residuals.items())]
    write_csv(os.path.join(out, "decomposition_residuals.csv"),
              ["piece", "identity", "residual", "h"], rows,
              config_hash=cfg.hash)
    origin = (-0.5 * grid.n * grid.h,) * 3
    write_vtk_cells(os.path.join(out, "decomposition_near.vtk"),
                    {"E_near": dec.eta_u[0], "H_near": dec.eta_u[1]},
                    grid.h, origin, config_hash=cfg.hash)
    sl = dec.u1.inner
    write_vtk_cells(os.path.join(out, "decomposition_pieces.vtk"),
                    {"E_grad": dec.u1.e[sl], "E_compact": dec.u2.e[sl],
                     "E_wave": dec.u3.e[sl]},
                    grid.h, origin, config_hash=cfg.hash)
    print(f"decompose: residuals "
          + ", ".join(f"{k}={v:.3e}" for k, v in sorted(dec.residuals.items()))
          + f"; files in {out}")
    return EXIT_OK


# ----------------------------------------------------------------------
# helmholtz (scalar suite)

def cmd_helmholtz(cfg, out):
    from .helmholtz import gaussian_bump, ikebe_saito_check, \
        solve_scalar_resolvent

    m = int(cfg.grid["n"])
    h = float(cfg.grid["h"])
    g = gaussian_bump(max(m, 16), h, width=2.0 * h)
    nu = float(cfg.frequency["omega"]) or 1.0
    rows = []
    for tau in (1.0, 0.5, 0.25, 0.125):
        sol = solve_scalar_resolvent(nu, tau, g)
        bound = g.weighted_norm(0.0) / (abs(nu) * tau)
        rep = ikebe_saito_check(nu, tau, g)
        rows.append({"tau": tau,
                     "lhs": sol.w.weighted_norm(0.0),
                     "rhs": bound,
                     "c_emp": rep["c_emp"]})
    write_csv(os.path.join(out, "scalar_suite.csv"),
              ["tau", "lhs", "rhs", "c_emp"], rows, config_hash=cfg.hash)
    cs = np.array([r["c_emp"] for r in rows])
    record = {"nu": nu, "taus": [r["tau"] for r in rows],
              "c_emp": cs, "uniformity": float(cs.max() / np.median(cs))}
    write_json_record(os.path.join(out, "scalar_suite.json"), record,
                      config_hash=cfg.hash)
    print(f"helmholtz: uniformity {record['uniformity']:.3f}; files in {out}")
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point

def build_parser():
    p = argparse.ArgumentParser(
        prog="limabs",
        description="Frequency-domain exterior Maxwell solver and "
                    "verification tool")
    p.add_argument("--config", help="TOML run config")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--threads", type=int, default=None,
                   help="thread cap (env LIMABS_THREADS as fallback)")
    p.add_argument("--seed", type=int, default=None,
                   help="seed override for random fields")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", help="single complex-frequency solve")
    v = sub.add_parser("verify", help="run a property-check suite")
    v.add_argument("suite", nargs="?", default="all",
                   help="one of %s or all" % ", ".join(sorted(_SUITES)))
    sub.add_parser("spectrum", help="eigenpairs near the target frequency")
    li = sub.add_parser("limit", help="vanishing-absorption schedule run")
    li.add_argument("--write-iterates", action="store_true")
    sub.add_parser("decompose", help="four-piece splitting of a solve")
    sub.add_parser("helmholtz", help="scalar resolvent suite")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    _apply_threads(_resolve_threads(args.threads))
    try:
        cfg = _load(args)
        out = _outdir(args, cfg)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.suite)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, out)
        if args.command == "limit":
            return cmd_limit(cfg, out, write_iterates=args.write_iterates)
        if args.command == "decompose":
            return cmd_decompose(cfg, out)
        if args.command == "helmholtz":
            return cmd_helmholtz(cfg, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LimabsError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
