"""Building f, F, G for a weight and reading off the boundary behaviour."""
import numpy as np

from hardylab import (build_profile, classify, estimate_F_asymptotics, make_weight,
                      parse_weight, verify_identities)

w = make_weight(parse_weight("exppow:1,0.5"))     # exp(+1/sqrt t), class Q
cls = classify(w, 0.25)
prof = build_profile(w, cls, 0.25, 1.0, t_min=1e-7)

ident = verify_identities(prof, raise_on_fail=False)
print("identity residuals:", ident.to_json())

t = np.geomspace(1e-6, 1e-1, 6)
F = np.exp(prof.log_F_at(t))
for ti, Fi in zip(t, F):
    print(f"t={ti:8.1e}  F={Fi:.6e}  F/t^1.5={Fi / ti ** 1.5:.4f}")

# F ~ C t^(3/2) as t -> 0; the fitted exponent lands close to 3/2, while the
# coefficient drifts slowly because the next correction is O(sqrt t).
fit = estimate_F_asymptotics(prof, fit_range=(1e-6, 1e-3))
print("fit:", fit.to_json())
