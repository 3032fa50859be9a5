# %% [markdown]
# # Comparing schemes over paired drops
#
# Ten C-UEs hold ten RBs each; five V-UEs need two RBs each.  All schemes
# see the same drops and the same fading draws, so differences are paired.

# %%
import numpy as np

from d2dv2v.config import parse_config
from d2dv2v.experiment import run_experiment

cfg = parse_config({
    "scenario": {"num_subbands": 100, "num_cues": 10, "num_vues": 5},
    "qos": {"E_all": 20, "gamma_T_dB": 34.34},
    "schemes": ["srbp", "feng", "zulhasnine"],
    "num_drops": 20,
    "num_fading": 1000,
    "seed": 2,
})
reports, _, _ = run_experiment(cfg)

# %% [markdown]
# ### Mean sum rate per RB

# %%
ref = reports["srbp"].sumrate_slow
for name, r in reports.items():
    d = ref - r.sumrate_slow
    print(f"{name:>11s}: {r.mean_rate:.4f} bit/s/Hz   SRBP minus this: {d.mean():+.4f}")

# %% [markdown]
# ### V-UE delivered bits
#
# Lower tail of the bits delivered by V-UE 0 within its 5 ms window, against
# the 12800-bit requirement.

# %%
for name, r in reports.items():
    b = r.vue_bits[0]
    q = np.quantile(b, [0.001, 0.01, 0.5])
    print(f"{name:>11s}: 0.1% {q[0]:8.0f}  1% {q[1]:8.0f}  median {q[2]:8.0f}  outage {r.outage:.1e}")
