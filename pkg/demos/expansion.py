"""Residuals of the 1/N expansion of the MIH/NM log-ratio and their slopes.

Run with ``python demos/expansion.py``.
"""

from mihnm import RegionSpec, fit_loglog_slope, residual_sweep
from mihnm.expansion import sweep_N_values

region = RegionSpec("3/4")
p, n, k = ["3/10", "1/5"], 2, [1, 1]
Ns = sweep_N_values(p, n, k, region, doublings=6)
rows = residual_sweep(p, n, k, Ns, region)

print(f"{'N':>8} {'order':>5} {'residual':>12} {'scale':>12}")
for r in rows:
    print(f"{r.N:>8} {r.order:>5} {r.residual:>12.3e} {r.remainder_scale:>12.3e}")

for order, expected in ((1, -2), (2, -3)):
    sel = [r for r in rows if r.order == order]
    slope = fit_loglog_slope([r.N for r in sel], [r.residual for r in sel])
    print(f"order {order}: slope {slope:.3f} (expected {expected})")
