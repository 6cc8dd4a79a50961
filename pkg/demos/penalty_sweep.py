"""
How large does the penalty need to be?
======================================

The explicit coercivity bound for Example 1 is close to 1e6, yet the
interface error settles for penalties a few orders of magnitude smaller.
Sweep gamma on one mesh pair and report the smallest value after which the
error stops changing by more than 5%.
"""
import warnings

from nitsche_hybrid.experiments import ExperimentConfig, gamma_threshold, sweep_gamma

cfg = ExperimentConfig(h=(2.0**-6,), H=(2.0**-4,), eps=0.05, ref_n=256)
gammas = [1, 2, 5, 10, 20, 50, 100, 1000]

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    reports = sweep_gamma(cfg, gammas, write=False)

for r in reports:
    print(f"gamma={r.gamma:7g}  e(u_eps)={r.e_ueps:.4e}")
print("gamma* =", gamma_threshold([r.gamma for r in reports], [r.e_ueps for r in reports]))
