import time

import numpy as np

from plap1d import Interval, Problem, Weight, solve_full, step_weight, sweep
from plap1d.core_types import CertificateError

UNIT = Interval(0.0, 1.0)
WIN = Interval(0.25, 0.75)

# scaling consistency, m >= 0, window = domain, c > 0
p, q = 2.5, 1.0
prob1 = Problem(p=p, q=q, domain=UNIT, m=Weight.constant(1.0, UNIT),
                c=Weight.constant(0.3, UNIT), window=UNIT)
prob2 = Problem(p=p, q=q, domain=UNIT, m=Weight.constant(2.0, UNIT),
                c=Weight.constant(0.3, UNIT), window=UNIT)
g = prob1.default_grid(256)
t0 = time.time()
r1 = solve_full(prob1, grid=g)
r2 = solve_full(prob2, grid=g)
t1 = time.time()
t = 2.0 ** (1.0 / (p - 1.0 - q))
diff = float(np.max(np.abs(r2.u.values - t * r1.u.values))) / float(np.max(r2.u.values))
print("scaling: rel sup diff", diff, "theorems", r1.certificates["sub"].construction["theorem"],
      "time", round(t1 - t0, 2))
print("residuals", r1.residual, r2.residual)

# auto order with c > 0 on sign-changing weight
prob3 = Problem(p=2.0, q=0.5, domain=UNIT, m=step_weight(UNIT, WIN, 1.0, -0.3),
                c=Weight.constant(0.5, UNIT), window=WIN)
r3 = solve_full(prob3, grid=prob3.default_grid(256))
print("c>0 auto theorem:", r3.certificates["sub"].construction["theorem"],
      "holds:", [(c.name, c.holds) for c in r3.conditions])
print("r3 residual", r3.residual, "min_interior", r3.min_interior)

# no condition holds
prob_bad = Problem(p=2.0, q=0.5, domain=UNIT, m=step_weight(UNIT, WIN, 1.0, -1.0),
                   c=Weight.constant(0.0, UNIT), window=WIN)
try:
    solve_full(prob_bad, grid=prob_bad.default_grid(128))
    print("ERROR: expected CertificateError")
except CertificateError as e:
    print("no-certificate ok:", str(e)[:80])

# sweep jobs=1 vs solve_full; then jobs=2
def factory(mu):
    return Problem(p=2.0, q=0.5, domain=UNIT, m=step_weight(UNIT, WIN, 1.0, -mu),
                   c=Weight.constant(0.0, UNIT), window=WIN)

t0 = time.time()
rows = sweep(factory, {"mu": [0.45, 0.62]}, grid_n=128)
t1 = time.time()
for row in rows:
    print({k: (round(v, 6) if isinstance(v, float) else v) for k, v in row.items()
           if k in ("mu", "status", "theorem", "cor_holds", "cor_margin", "error", "min_interior")})
print("sweep time", round(t1 - t0, 2))

t0 = time.time()
rows2 = sweep(factory, {"mu": [0.45, 0.62]}, grid_n=128, jobs=2)
t1 = time.time()
print("jobs=2 match:", all(
    r1k == r2k for r1k, r2k in zip(
        [sorted(r.items()) for r in rows],
        [sorted(r.items()) for r in rows2],
    )
), "time", round(t1 - t0, 2))
