"""
Polygonal mesh families
=======================

Four mesh families are used in the studies: L-shaped hexagons tiled with
squares, centroidal Voronoi cells on the square and on the disk, and a
mixed mesh with hanging nodes.  This script builds one of each, prints the
quality report and draws them side by side into ``mesh_families.png``.
"""
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from polydg import mesh

# %%
# Build the meshes.  ``n`` is the number of sub-squares per side for the
# structured families and the number of seeds for the Voronoi ones.
meshes = {
    "non-convex (n=8)": mesh.generate_structured_nonconvex(8),
    "Voronoi (64 seeds)": mesh.generate_voronoi(64, lloyd_iters=20, seed=0),
    "mixed (n=8)": mesh.generate_mixed(8),
    "disk (200 seeds)": mesh.generate_voronoi(200, "disk", lloyd_iters=20),
}

for name, m in meshes.items():
    q = mesh.quality_report(m)
    print(f"{name:20s} cells={m.n_cells:4d} h={q.h:.3f} rho={q.quasi_uniformity_ratio:.2f} "
          f"hanging={q.has_hanging_nodes} area={m.cell_areas.sum():.4f}")

# %%
# The disk area falls short of pi because boundary edges are chords.
print("pi - disk area =", np.pi - meshes["disk (200 seeds)"].cell_areas.sum())

# %%
fig, axes = plt.subplots(1, 4, figsize=(16, 4))
for ax, (name, m) in zip(axes, meshes.items()):
    for c in range(m.n_cells):
        xy = m.cell_xy(c)
        ax.fill(xy[:, 0], xy[:, 1], facecolor="none", edgecolor="k", lw=0.6)
    ax.set_title(name)
    ax.set_aspect("equal")
    ax.axis("off")
fig.savefig("mesh_families.png", dpi=120, bbox_inches="tight")
print("wrote mesh_families.png")
