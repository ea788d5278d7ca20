"""Random doubling maps with cos(2 pi x): every route should give sigma^2 = 1/2.

Run from the repository root:  python3 demos/doubling_oracle.py
"""
import numpy as np

from quenched_clt.limit_variance import (DoubledEnsemble, classical_green_kubo_split,
                                         green_kubo_doubled, sigma_sq_series)
from quenched_clt.maps import Ensemble, MapSystem
from quenched_clt.observables import Cosine
from quenched_clt.quenched import correlation_table, sigma_path
from quenched_clt.selection import SelectionProcess, sample_omega

T = MapSystem.doubling(2)
coin = SelectionProcess.iid((0.5, 0.5))
f = Cosine(1)
grid = Ensemble.grid(2 ** 20)

omega = sample_omega(coin, 16, seed=1)
table = correlation_table(T, omega, f, grid, 16)
print("off-diagonal correlations, largest:", np.max(np.abs(table - 0.5 * np.eye(16))))
print("sigma_n^2 for n = 1..16:", np.round(sigma_path(T, omega, f, grid, range(1, 17)), 12))

vk = sigma_sq_series(T, coin, f, grid, 8, seed=1, K=4, burn_in_i=8)
gk = green_kubo_doubled(T, coin, f, DoubledEnsemble.product(Ensemble.grid(2 ** 10)), 2, 4, 8, seed=1)
split = classical_green_kubo_split(T, coin, f, grid, 4, 8, 8, seed=1)
print(f"series route     {vk.sigma_sq:.6f}")
print(f"doubled route    {gk.sigma_sq:.6f}")
print(f"split route      {split.difference:.6f}")
