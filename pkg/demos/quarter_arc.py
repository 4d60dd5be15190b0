# %% [markdown]
# # Clamped quarter circle
#
# The smooth minimizer for these data is the unit quarter circle with energy
# pi/4.  The discrete minimizer clamps its first and last edges, which costs
# an O(h) error in energy and curvature near the ends.

# %%
import math

import numpy as np

from elastica import experiments as X
from elastica.mesh import uniform_partition
from elastica.polygon import curvature
from elastica.solver import initial_guess, minimize

bd = X.preset("quarter-arc")

# %%
for n in (16, 32, 64, 128):
    T = uniform_partition(bd.L, n)
    P, rep = minimize(initial_guess(bd, T), bd)
    kappa = np.linalg.norm(curvature(P).values, axis=1)
    print(f"n={n:4d}  E={rep.energy:.6f}  |E-pi/4|={abs(rep.energy - math.pi / 4):.2e}  "
          f"max||k|-1|={np.max(np.abs(kappa - 1)):.3f}  kkt={rep.kkt_residual:.1e}")

# %% [markdown]
# Curvature along the polygon at n = 64: flat in the middle, bent at the ends.

# %%
T = uniform_partition(bd.L, 64)
P, _ = minimize(initial_guess(bd, T), bd)
k = np.linalg.norm(curvature(P).values, axis=1)
print(np.round(k[:4], 3), "...", np.round(k[30:34], 3), "...", np.round(k[-4:], 3))
