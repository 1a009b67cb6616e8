"""Which weights the Hardy kernel can handle, and why.

Each weight gets a class (P when 1/w is integrable at 0, Q otherwise), a
doubling check, a monotonicity scan and the admissibility verdict that
depends on how fast F(t) goes to zero.
"""
from hardylab import (check_admissible, check_monotone, classify, is_doubling, make_weight,
                      parse_weight)
from hardylab.errors import Inconclusive

ETA = 0.25

weights = ["const:1", "power:0.5", "power:2", "exppow:1,0.5", "exppow:-1,0.5",
           "exppow:-1,1", "expr:2+t*sin(1/t)"]

print(f"{'weight':22s} {'class':6s} {'doubling':12s} {'monotone':10s} admissible")
for text in weights:
    w = make_weight(parse_weight(text))
    try:
        c = classify(w, ETA)
    except Inconclusive as e:
        print(f"{text:22s} inconclusive: {e}")
        continue
    dbl = is_doubling(w, 1e-8, ETA / 2)
    mono = check_monotone(w, ETA)
    adm = check_admissible(w, c, ETA)
    print(f"{text:22s} {c.kind:6s} {dbl.verdict:12s} {mono.sign:10s} {adm.verdict}")

# For exp(-1/t) the log of int 1/w grows like 1/t, faster than 1/sqrt t, so
# the admissibility quantity sqrt(t) log int 1/w blows up.  exp(-1/sqrt t)
# sits exactly on the edge and stays bounded.  The oscillating expression
# defeats the 1/w quadrature and is reported as inconclusive.
