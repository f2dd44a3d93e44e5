"""Distances between discrete laws, jittered laws and Gaussians.

Run with ``python demos/distances.py``.
"""

from mihnm import (
    ModelParams,
    apply_jitter,
    enumerate_mih_support,
    hellinger_discrete,
    hellinger_jittered,
    hellinger_jittered_vs_normal,
    kl_discrete,
    normal_family_spec,
    truncate_mih_support,
    truncate_nm_support,
    tv_discrete,
    tv_jittered_vs_normal,
)

mih = enumerate_mih_support(ModelParams(4, 1, "1/2"))
nm = truncate_nm_support(ModelParams(None, 1, "1/2"), 1e-15)
print("H  ", hellinger_discrete(mih, nm))
print("TV ", tv_discrete(mih, nm))
print("KL ", kl_discrete(mih, nm))

# Jittering is invertible, so it leaves the Hellinger distance unchanged.
print("H after jitter", hellinger_jittered(apply_jitter(mih), apply_jitter(nm)).value)

# A larger urn against its matching Gaussian.
params = ModelParams(4096, 16, "1/2")
law = apply_jitter(truncate_mih_support(params))
g = normal_family_spec(params, "Normal-Q")
print(tv_jittered_vs_normal(law, g).to_json())
print(hellinger_jittered_vs_normal(law, g).to_json())
