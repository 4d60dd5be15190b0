# %% [markdown]
# # A toy problem with the same flavour
#
# F_n(x) = (1 - |x|^2)^2 - (-1)^n x_1 / (n (1 + |x|^2)) has a unique minimizer
# that jumps between (1, 0) and (-1, 0) with the parity of n, while the sets
# of 3/n-minimizers fill out the whole unit circle as n grows.

# %%
from elastica import experiments as X

for r in X.tilted_demo((16, 17, 64, 65, 256), resolution=512):
    print(f"n={r['n']:3d} argmin=({r['argmin_x']:+.3f}, {r['argmin_y']:+.3f}) "
          f"hausdorff={r['hausdorff']:.4f} bound={r['bound']:.4f}")
