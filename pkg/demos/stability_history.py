"""
Energy decay without a source
=============================

Start from the disk example's initial datum, switch off the source and the
boundary data, and watch the discrete L2 norm.  The theory only promises
max_n ||u^n|| <= C1 ||u^0|| with a very pessimistic C1; in practice the
norm simply decays.  The history is drawn into ``stability_history.png``.
"""
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from polydg import mesh, verify

msh = mesh.family_for_h("disk", 1 / 16)
res, C1, ok = verify.stability_run(msh, k=1, theta=0.25, tau=0.01, T=1.0)
hist = res.l2_history
print(f"{msh.n_cells} cells, {len(hist) - 1} steps")
print(f"max ||u^n|| / ||u^0|| = {max(hist) / hist[0]:.4f}   C1 = {C1:.3e}   bound holds: {ok}")

# %%
plt.semilogy(res.times, hist)
plt.xlabel("t")
plt.ylabel("||u_h^n||")
plt.title("zero-source L2 norm history")
plt.savefig("stability_history.png", dpi=120, bbox_inches="tight")
