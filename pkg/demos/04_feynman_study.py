"""One seeded trial of the bundled Feynman I.24.6 study at desk scale.

Three candidate forms share the inputs (m, w, w0, z); the truth is
E = c m^e1 (w^e2 + w0^e3) z^e4 with c = 1/4, e1 = 1, e2 = e3 = e4 = 2.
Eighteen adaptively chosen measurements at noise sigma^2 = 0.01 drive the
true form's probability to one; the full campaign (20 trials, CSV output)
runs via `symdisc run`.
"""

import numpy as np

from symdisc import apply_profile, bundled_config_path, load_config, run_single_trial

cfg = apply_profile(load_config(bundled_config_path()), "desk")
print(f"models: {[m.name for m in cfg.models]}")
print(f"truth:  {cfg.truth_model} with theta = {cfg.truth_theta}")

trace = run_single_trial(cfg, trial_index=0)
print(f"\nprior per-parameter variances: {np.round(trace.prior_variances, 3)}")
print("\nround  p(omega_sum)  p(monomial)  p(z_sum)   var(omega_sum)")
for rec in trace.records:
    p = rec.model_probs
    print(f"{rec.round:>5}  {p[0]:>12.4f}  {p[1]:>11.4f}  {p[2]:>8.4f}   {rec.variances[0]:.5f}")
