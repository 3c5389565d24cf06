"""Knot count of the minimum V_p interpolant as p sweeps across the sparsity threshold."""

import numpy as np

from lpsi.core import Dataset1D, vp_cost
from lpsi.univariate import compute_pstar, min_l0, solve

data = Dataset1D.from_points(zip(range(6), ["0", "0", "0.05", "5.05", "14.95", "24.95"]), exact=True)
pstar = compute_pstar(data)
print(f"p* = {pstar.value:.10f}; fewest possible knots = {min_l0(data).count}")
for run, winner, rival, threshold in pstar.crossings:
    print(f"  run at point {run.start} (m={run.m}): sparse vertex {winner} loses to {rival} at p = {threshold:.10f}")
print(f"{'p':>6} {'knots':>5} {'V_p':>12} {'V_1':>6}")
for p in np.round(np.linspace(0.05, 0.95, 19), 2):
    f = solve(data, float(p)).f
    print(f"{p:6.2f} {len(f.knots):5d} {vp_cost(f, float(p)):12.6f} {float(vp_cost(f, 1)):6.2f}")
