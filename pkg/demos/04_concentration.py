"""Do minimisers run into the boundary?

Below lambda* the infimum 1/4 is not attained: the discrete minimisers push
their Hardy mass into ever thinner boundary layers as the mesh resolves
more of the boundary.  Above lambda* they settle on a fixed profile.
"""
from hardylab import REGISTRY, Interval, Problem, make_weight
from hardylab.variational import concentration_diagnostic, deep_ladder, supersolution_check

pr = Problem.build(make_weight(REGISTRY["const1"]), Interval(1.0), 2.0)
ladder = deep_ladder(pr.domain, 400, [1e-2, 1e-8, 1e-14, 1e-20], pr.eta0)

for lam in (-5.0, 20.0):
    rep = concentration_diagnostic(pr, lam, ladder)
    print(f"lambda={lam}: {rep.verdict}")
    for row in rep.rows():
        print("   res={boundary_resolution:8.1e}  J={J:.6f}  boundary mass={boundary_mass_fraction:.3f}"
              .format(**row))

# the supersolution used for the lower bound: E_s must stay positive in the collar
for s in (0.6, 1.0):
    r = supersolution_check(pr.weight, pr.profile, s, 1.0, pr.domain)
    print(f"s={s}: limit ok={r.limit_ok}  positive for t <= {r.t_ok:.3g}")
