# %% [markdown]
# # One drop, step by step
#
# Four C-UEs with one RB each share the band with two V-UEs that need two
# RBs each.  We walk through the pairing weights, the matching, the power
# control, and compare against the exhaustive optimum.

# %%
import numpy as np

from d2dv2v.allocation import build_weights, expand_subusers, hungarian_max_weight
from d2dv2v.baselines import exhaustive_optimal
from d2dv2v.evaluation import check_allocation, vue_slow_sinr
from d2dv2v.power import solve_power
from d2dv2v.qos import VueQos
from d2dv2v.scenario import ChannelConfig, Scenario, generate_drop, linear_to_dbm

sc = Scenario(num_subbands=4, cue_rbs=[1, 1, 1, 1], vue_rbs=[2, 2], seed=1)
qos = [VueQos(e_all=20, gamma_t=10 ** 3.43)] * 2
sub = expand_subusers(sc, qos)
pos, gains = generate_drop(sc, ChannelConfig(), drop_index=0)
print("C-UE positions (m):\n", pos.cue.round(1))

# %% [markdown]
# ### Stage 1: penalized weights under equal power
#
# Rows are sub-C-UEs, columns sub-V-UEs.  Large negative entries are pairs
# where the V-UE would miss its floor at equal power.

# %%
wm = build_weights(sub, gains)
np.set_printoptions(precision=2, suppress=False, linewidth=120)
print(wm.w)
a = hungarian_max_weight(wm)
print("pairing:", a.pair, "total weight", round(a.total_weight, 3))

# %% [markdown]
# ### Stage 2: power control for that pairing

# %%
pa = solve_power(a, sub, gains)
print("C-UE powers (dBm):", linear_to_dbm(pa.s).round(2))
print("V-UE powers (dBm):", linear_to_dbm(pa.p).round(2))
print("V-UE SINR (dB):   ", (10 * np.log10(vue_slow_sinr(a, pa, gains, sub)[sub.is_real])).round(2))
print("sum rate per RB:", round(pa.objective / sub.size, 4), " KKT residual:", f"{pa.kkt_residual:.1e}")
print("constraint check:", check_allocation(a, pa, gains, sub) or "all satisfied")

# %% [markdown]
# ### Exhaustive optimum
#
# Every distinct pairing with its own optimal powers.

# %%
a_opt, pa_opt = exhaustive_optimal(sub, gains)
print("optimal pairing:", a_opt.pair, "sum rate per RB:", round(pa_opt.objective / sub.size, 4))
