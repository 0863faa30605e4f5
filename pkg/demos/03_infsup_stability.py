"""Stability of the saddle-point coupling: the inf-sup constant.

For a fixed mesh, enlarging the multiplier (harmonic) space drives the
inf-sup constant down - the saddle problem degrades when the trace space
cannot control the multipliers.  For a fixed small harmonic set, beta is
mesh-robust.

Run:  python demos/03_infsup_stability.py
"""
from igamag import studies

rows = studies.run_infsup_study(degree=2, refinements=(2, 3, 4), max_orders=(0, 1, 2, 3, 4, 5))
print("refinement  max_order  N_harmonics  beta")
for r, mo, ng, beta in rows:
    print(f"{r:^10d}  {mo:^9d}  {ng:^11d}  {beta:.4e}")
print("\nbeta decreases along each mesh block (growing multiplier space)")
print("and is stable down each max_order column (mesh refinement).")
