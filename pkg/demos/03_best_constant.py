"""The quotient J(lambda) for w = 1 on an interval, p = 2.

J(lambda) stays at 1/4 for lambda up to a threshold lambda*, then drops.
On a mesh the plateau is never exactly 1/4; it decreases towards it as the
boundary resolution shrinks, and that drift is what lambda_star separates
from the genuine fall past the threshold.
"""
from hardylab import REGISTRY, Interval, Problem, lambda_star, make_weight, mesh_ladder
from hardylab.variational import J_levels

pr = Problem.build(make_weight(REGISTRY["const1"]), Interval(1.0), 2.0)
ladder = mesh_ladder(pr.domain, 200, 3, 1e-6, breakpoints=(pr.eta0,))

for lam in (-5.0, 0.0, 2.0, 3.0, 5.0, 10.0):
    js = J_levels(pr, ladder, lam)
    print(f"lambda={lam:5.1f}  " + "  ".join(f"{j:.6f}" for j in js))

rep = lambda_star(pr, ladder, bracket=(-10.0, 50.0), tol=0.1)
print(f"lambda* in [{rep.bracket[0]:.4f}, {rep.bracket[1]:.4f}]")
print("audits:", rep.audits)
