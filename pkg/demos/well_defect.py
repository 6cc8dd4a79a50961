"""
A well defect coupled to a homogenized background
=================================================

Solve the hybrid problem for the square defect at a small scale, then
refine the fine mesh and watch the microscopic error drop while the
macroscopic error stays put.  Uses eps = 0.05 and a 256 x 256 reference
so the whole script finishes in well under a minute.
"""
import warnings

import numpy as np

from nitsche_hybrid.experiments import ExperimentConfig, run_experiment
from nitsche_hybrid.postproc import convergence_rates

# h is the fine mesh inside the buffer, H the coarse mesh outside it
cfg = ExperimentConfig(h=(2.0**-5, 2.0**-6, 2.0**-7), H=(2.0**-4,), eps=0.05, ref_n=256)

# gamma = 50 sits far below the coercivity bound; the run warns and goes on
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    reports = run_experiment(cfg, write=False)

for r in reports:
    print(f"h=2^{np.log2(r.h):.0f}  e(u_eps)={r.e_ueps:.3e}  e(u_0)={r.e_u0:.3e}  "
          f"dofs={r.dofs}  gamma0={r.extra['gamma0']:.2e}")

print("rates e(u_eps):", np.round(convergence_rates([r.e_ueps for r in reports]), 2))
