"""Sparsest and minimum l^p interpolating networks for small multivariate datasets."""

import numpy as np

from lpsi.multivariate import (
    DatasetND,
    build_reformulation,
    enumerate_patterns,
    pstar_bound,
    reconstruct_network,
    solve_l0,
    solve_lp_exact,
    solve_lp_irl1,
)

peak = DatasetND(np.array([[-1.0], [0.0], [1.0]]), np.array([0.0, 1.0, 0.0]))
problem = build_reformulation(peak, enumerate_patterns(peak))
l0 = solve_l0(problem)
print(f"peak: {problem.J} patterns, {problem.n_vars} coordinates, fewest nonzeros = {l0.l0}")
for p in (0.05, 0.5, 0.9):
    ex = solve_lp_exact(problem, p, support_cap=l0.l0 + 2)
    heur = solve_lp_irl1(problem, p)
    net = reconstruct_network(ex, problem)
    print(
        f"  p={p}: exact cost {problem.cost(ex.z, p):.6f} (support {ex.l0}, {net.active_neurons} neurons), "
        f"reweighted-l1 cost {problem.cost(heur.z, p):.6f}"
    )
bound = pstar_bound(problem, [l0, solve_lp_exact(problem, 0.05, support_cap=l0.l0 + 2)])
print(f"  estimated threshold p* ~ {bound.value:.4f} (m0={bound.m0}, r_hat={bound.r_hat:.3g}, R={bound.R})")

plane = DatasetND(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([0.0, 1.0, 1.0]))
problem = build_reformulation(plane, enumerate_patterns(plane))
sol = solve_lp_exact(problem, 0.3, support_cap=4)
net = reconstruct_network(sol, problem)
print(f"plane: support {sol.l0}, neurons:")
for w, v, j, side in net.neurons:
    print(f"  v={v:+d} w={w} pattern {problem.patterns[j]} ({side})")
print("  max residual", float(np.abs(net(plane.X) - plane.y).max()))
