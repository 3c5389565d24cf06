"""Minimum V_p interpolant of a four-point zigzag, with its independent checks."""

import math

from lpsi.core import Dataset1D, vp_cost
from lpsi.univariate import solve, verify

data = Dataset1D.from_points([(0, 0), (1, 1), (2, 0), (3, 1)], exact=True)
res = solve(data, 0.5)
f = res.f
print("knots (location, slope change):", [(str(u), str(c)) for u, c in f.knots])
print(f"V_0.5 = {vp_cost(f, 0.5):.12f}  (2*sqrt(2) = {2 * math.sqrt(2):.12f})")
print("V_1 =", vp_cost(f, 1), " Lipschitz =", res.report.lipschitz, " unique:", res.unique)
rep = verify(data, f, 0.5)
for c in rep.checks:
    print(f"  {c.name:18s} {'ok' if c.passed else 'FAILED'}  {c.detail}")
