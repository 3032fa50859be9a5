# %% [markdown]
# # From a latency budget to a slow-SINR floor
#
# A V-UE has to push N = 12800 bits through E_all RB slots inside
# L_tol = 10 time units, and may miss that at most once in 10^5 windows.
# The eNB only sees slow fading, so the requirement becomes a floor on the
# slow SINR of every RB the V-UE gets.  Here we find that floor by Monte Carlo.

# %%
import numpy as np

from d2dv2v.qos import McConfig, VueQos, derive_sinr_threshold, outage_probability

# 10^6 samples keep this quick; the acceptance suite uses 10^7
mc = McConfig(num_samples=1_000_000, seed=2015)
qos = VueQos(p_o=1e-4)

# %% [markdown]
# ### Outage against slow SINR
#
# All calls share one sample set (common random numbers), so the curve is
# monotone and bisection on it is well defined.

# %%
for db in np.arange(28.0, 40.0, 2.0):
    p = outage_probability(10 ** (db / 10), qos, mc)
    print(f"{db:5.1f} dB  outage {p:.2e}")

# %% [markdown]
# ### Thresholds for a few resource levels
#
# More RBs per window means more diversity, so the floor drops quickly.

# %%
for e_all in (20, 30, 40):
    q = VueQos(p_o=1e-4, e_all=e_all)
    g, p = derive_sinr_threshold(q, mc, return_outage=True)
    print(f"E_all={e_all:2d} (E={q.rbs_per_unit} per time unit): gamma_T = {10 * np.log10(g):.2f} dB, outage {p:.1e}")
