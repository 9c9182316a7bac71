import time
import numpy as np
from plap1d import (
    Problem, build_subsolution, build_supersolution, enforce_ordering,
    solve_between, solution_residual, step_weight,
)
from plap1d.core_types import Interval

dom = Interval(0.0, 1.0)
win = Interval(0.25, 0.75)
m = step_weight(dom, win, inside=1.0, outside=-0.1)
prob = Problem(p=1.75, q=0.5, domain=dom, m=m, c=lambda x: np.full_like(np.asarray(x, float), 0.1), window=win)
grid = prob.default_grid(512)
sub = build_subsolution(prob, "thm1_ii")
sup = build_supersolution(prob)
sub, sup = enforce_ordering(sub, sup, grid)
t0 = time.time()
u = solve_between(prob, sub, sup, grid=grid, tol=1e-8)
dt = time.time() - t0
res = solution_residual(u, prob)
lo = np.maximum(sub(grid.nodes), 0.0)
interior = u.values[1:-1]
print(f"time {dt:.2f}s  residual {res:.3e}")
print(f"min interior u {interior.min():.3e}  max u {u.values.max():.3e}")
print(f"min ratio u/sub {np.min(interior / lo[1:-1]):.3e}")
print(f"active-at-lo nodes: {int(np.sum(interior <= lo[1:-1] * (1 + 1e-9)))}")
