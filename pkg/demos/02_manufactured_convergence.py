"""Manufactured-solution convergence of the harmonic coupling.

The quarter ring is split into two non-conforming multipatch annuli and
coupled with 7 Fourier multipliers; the discretization error, the
interface jump and the multiplier error all converge at their expected
orders (p+1, ~p+1, ~2p).

Run:  python demos/02_manufactured_convergence.py  (about half a minute)
"""
from igamag import studies

for degree, levels in ((1, (2, 3, 4, 5)), (2, (1, 2, 3, 4)), (3, (1, 2, 3))):
    runs = [studies.solve_verification(degree=degree, refinement=r) for r in levels]
    hs = [r.h for r in runs]
    print(f"degree p = {degree}")
    print("  h        N_dof   eps_L2      eps_jump    eps_lambda")
    for r in runs:
        print(f"  1/{int(1/r.h):<4d}   {r.n_dofs:<5d}   {r.eps_l2:.3e}   "
              f"{r.eps_jump:.3e}   {r.eps_lambda:.3e}")
    print(f"  fitted orders: L2 {studies.fit_slope(hs, [r.eps_l2 for r in runs]):.2f}, "
          f"jump {studies.fit_slope(hs, [r.eps_jump for r in runs]):.2f}, "
          f"multiplier {studies.fit_slope(hs, [r.eps_lambda for r in runs]):.2f}")
