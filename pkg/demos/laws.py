"""Exact MIH and NM masses, support tables and samplers.

Run with ``python demos/laws.py``.
"""

import math

from mihnm import (
    ModelParams,
    chi_square_gof,
    enumerate_mih_support,
    make_rng,
    mih_log_pmf,
    nm_log_pmf,
    sample_mih,
    truncate_nm_support,
)

# Four objects, two successes and two failures; stop at the first failure.
small = ModelParams(4, 1, "1/2")
law = enumerate_mih_support(small)
for k, m in zip(law.support[:, 0], law.mass):
    print(f"P(K={k}) = {m:.6f}")

# The with-replacement limit has q**n mass at zero.
print("NM(1, 1/2) at 0:", math.exp(nm_log_pmf(ModelParams(None, 1, "1/2"), [0])))

# A larger urn: the MIH mass approaches the NM mass as N grows.
for N in (100, 1000, 10000):
    params = ModelParams(N, 3, ["1/5", "2/5"])
    print(N, mih_log_pmf(params, [2, 3]), nm_log_pmf(params, [2, 3]))

# NM tables are truncated with a certified tail.
nm = truncate_nm_support(ModelParams(None, 3, ["1/5", "2/5"]), 1e-10)
print("NM table:", len(nm), "points, tail <=", nm.tail_mass)

# Draws from the urn agree with the exact law.
params = ModelParams(30, 2, ["1/3", "1/3"])
draws = sample_mih(params, make_rng(1), size=50_000)
stat, pvalue, dof = chi_square_gof(draws, enumerate_mih_support(params))
print(f"chi-square {stat:.1f} on {dof} dof, p = {pvalue:.3f}")
