"""
Spatial convergence on non-convex cells
=======================================

Solve the manufactured Ginzburg-Landau problem on the square with
u = exp(it) sin(x) sin(y) (1-x) (1-y) up to T = 1 on a sequence of
L-shaped meshes and read off the L2 and broken H1 orders.  For degree k
the expected rates are k+1 and k.
"""
import time

from polydg import verify

# %%
# A short study with linear elements.  The time step is small enough
# (h_min^((k+1)/2) / 4) that the time error stays below the space error.
t0 = time.perf_counter()
table = verify.spatial_convergence(verify.EXAMPLE1, "nonconvex", k=1, theta=1 / 8,
                                   hs=[1 / 4, 1 / 8, 1 / 16])
print(table.to_markdown())
print(f"tau = {table.meta['tau']:.4g}, {time.perf_counter() - t0:.1f} s")
# The L2 order of the linears approaches 2 from below; one more level
# (h = 1/32) gives about 1.94.

# %%
# The same with quadratics; the L2 order should now be close to 3.
table = verify.spatial_convergence(verify.EXAMPLE1, "nonconvex", k=2, theta=1 / 8,
                                   hs=[1 / 4, 1 / 8, 1 / 16])
print(table.to_markdown())

# %%
# Tables go to disk as RFC-4180 CSV.
with open("spatial_k2.csv", "w", newline="") as fh:
    fh.write(table.to_csv())
