"""How close gradient training gets to the exact minimum path norm (reported, not asserted)."""

import sys

from lpsi.core import Dataset1D, vp_cost
from lpsi.trainer import TrainConfig, train
from lpsi.univariate import solve

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
data = Dataset1D.from_points([(0, 0), (1, 1), (2, 0), (3, 1)])
p = 0.5
target = float(vp_cost(solve(data, p).f, p))
print(f"exact minimum V_{p} = {target:.6f}; training {steps} steps per seed")
print(f"{'seed':>4} {'path norm':>10} {'ratio':>7} {'neurons':>7} {'max resid':>10}")
for seed in range(5):
    res = train(data, TrainConfig(p=p, width=8, steps=steps, seed=seed))
    print(
        f"{seed:4d} {res.path_norm:10.6f} {res.path_norm / target:7.3f} "
        f"{res.active_neurons:7d} {res.max_residual:10.2e}"
    )
