#!/usr/bin/env python3
"""Shell-decay study of the outgoing-radiation functional.

Evaluates the radiation mismatch (Lambda0 + sqrt(eps0 mu0) Xi) u on
concentric shells for an outgoing dipole and for its conjugate (incoming)
field, and fits log-log decay slopes.  The outgoing field should lose one
extra order relative to the field amplitude; the incoming field should not.

Usage:
    python3 scripts/radiation_slopes.py --h 0.5 --n 32
"""

import argparse

import numpy as np

from limabs.limiting import shell_amplitude_slope
from limabs.operators import silver_mueller_residual
from limabs.oracles import dipole_field

from _common import make_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--omega", type=float, default=1.0)
    ap.add_argument("--shell-min", type=float, default=3.0)
    ap.add_argument("--shell-max", type=float, default=7.0)
    ap.add_argument("--shell-step", type=float, default=0.5)
    args = ap.parse_args()

    grid, labeling, mat, op = make_scene(h=args.h, n=args.n)
    shells = np.arange(args.shell_min, args.shell_max + args.shell_step / 2,
                       args.shell_step)
    if shells.max() >= grid.r_max:
        raise SystemExit("outer shell exceeds the box; increase --n")

    print(f"{'shell r':>8} {'|R u_out|':>12} {'|u_out|':>12} "
          f"{'|R u_in|':>12}")
    out = dipole_field(op.dofs, args.omega, outgoing=True)
    inc = dipole_field(op.dofs, args.omega, outgoing=False)
    rep_out = silver_mueller_residual(out, mat, -0.25, shells)
    rep_in = silver_mueller_residual(inc, mat, -0.25, shells)
    for i, r in enumerate(shells):
        print(f"{r:8.2f} {rep_out.outgoing_shell[i]:12.4e} "
              f"{rep_out.field_shell[i]:12.4e} "
              f"{rep_in.outgoing_shell[i]:12.4e}")

    print()
    print(f"outgoing residual slope: "
          f"{shell_amplitude_slope(shells, rep_out.outgoing_shell):+.3f} "
          "(expect ~ -2)")
    print(f"field amplitude slope:   "
          f"{shell_amplitude_slope(shells, rep_out.field_shell):+.3f} "
          "(expect ~ -1)")
    print(f"incoming residual slope: "
          f"{shell_amplitude_slope(shells, rep_in.outgoing_shell):+.3f} "
          "(expect ~ -1: no extra decay)")


if __name__ == "__main__":
    main()
