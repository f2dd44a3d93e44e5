"""Constructive deficiency bounds between MIH and Gaussian experiments.

Both directions go through explicit kernels: jittering maps counts to a
density, and nearest-integer rounding maps a Gaussian back to counts.  The
rounding direction can never do worse than the jittering one.

Run with ``python demos/deficiency.py``.
"""

import math

from mihnm import ModelParams, deficiency_upper_bound_PQ, deficiency_upper_bound_QP, lattice_N_at_least

p = ["2/5"]
print(f"{'n':>4} {'N':>8} {'family':>12} {'P->Q':>9} {'Q->P':>9} {'sqrt(n) P->Q':>13}")
for n in (16, 36, 64, 100):
    params = ModelParams(lattice_N_at_least(n**3, n, p), n, p)
    for family in ("Normal-Q", "Normal-Qbar", "Normal-Qstar"):
        fwd = deficiency_upper_bound_PQ(params, family)
        back = deficiency_upper_bound_QP(params, family, forward=fwd)
        print(f"{n:>4} {params.N:>8} {family:>12} {fwd.upper_bound:9.5f} {back.upper_bound:9.5f} "
              f"{fwd.upper_bound * math.sqrt(n):13.4f}")
