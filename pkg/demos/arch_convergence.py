# %% [markdown]
# # Near-minimizers approach the elastica
#
# For the arch data we shoot an analytic elastica, then compare it with the
# reconstructed delta-minimizer sets (delta = h) on refined meshes.

# %%
from elastica import experiments as X

bd = X.preset("arch")
ref = X.reference_solution(bd, threads=4)
print(ref["params"].family, "k =", round(ref["params"].k, 4), "E =", round(ref["info"]["energy"], 6))
print("ODE residual", ref["ode"]["residual"])

# %%
res = X.convergence_study(bd, (8, 16, 32, 64), threads=4)
for r in res["rows"]:
    print(f"n={r['n']:3d} members={r['members']:2d} W1inf={r['w1inf']:.4f} W2,2={r['w2p2']:.4f}")
print("fitted W1inf slope", res["rates"]["w1inf"]["slope"])
