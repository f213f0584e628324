#!/usr/bin/env python3
"""h-refinement study of the field-splitting identity residuals.

Solves the shifted scattering problem for a compact bump source outside a
sphere obstacle on a sequence of grids, decomposes the solution with the
cutoff/whole-space splitting, and tabulates how each identity residual
shrinks under mesh halving.

Usage:
    python3 scripts/splitting_refinement.py                 # 16^3, 32^3
    python3 scripts/splitting_refinement.py --fine          # adds 64^3
"""

import argparse
import time

import numpy as np

from limabs.decomposition import cutoff_identity_decompose
from limabs.operators import FieldPair
from limabs.resolvent import solve_resolvent

from _common import make_scene

KEYS = ("first_order_cutoff", "first_order_tilde", "helmholtz_remainder")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fine", action="store_true",
                    help="include the 64^3 level (slow)")
    ap.add_argument("--omega-re", type=float, default=1.0)
    ap.add_argument("--omega-im", type=float, default=0.25)
    args = ap.parse_args()

    omega = args.omega_re + 1j * args.omega_im
    levels = [(0.5, 16), (0.25, 32)] + ([(0.125, 64)] if args.fine else [])

    rows = []
    for h, n in levels:
        t0 = time.perf_counter()
        grid, labeling, mat, op = make_scene(h=h, n=n)
        c = np.array([1.1, 0.0, 0.0])
        rr = np.linalg.norm(op.dofs.edge_dof_points() - c, axis=1)
        f = FieldPair(
            (np.exp(-(rr / 0.35) ** 2) * (rr < 0.8)).astype(complex),
            np.zeros(op.dofs.n_face, complex), op.dofs)
        sol = solve_resolvent(op, omega, f)
        dec = cutoff_identity_decompose(sol.u, f, omega, mat, grid)
        rows.append((h, n, dec.residuals, time.perf_counter() - t0))

    header = f"{'h':>7} {'n':>4} " + " ".join(f"{k:>22}" for k in KEYS) \
        + f" {'time/s':>8}"
    print(header)
    for h, n, res, dt in rows:
        print(f"{h:7.3f} {n:4d} "
              + " ".join(f"{res[k]:22.4e}" for k in KEYS) + f" {dt:8.1f}")
    print()
    for (hc, _, rc, _), (hf, _, rf, _) in zip(rows, rows[1:]):
        ratios = ", ".join(f"{k}: {rc[k] / rf[k]:.2f}" for k in KEYS)
        print(f"refinement {hc} -> {hf}: {ratios}")


if __name__ == "__main__":
    main()
