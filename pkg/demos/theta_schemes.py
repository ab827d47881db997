"""
The weighted theta-scheme in time
=================================

theta = 0 gives a BDF2-type method and theta = 1/2 a Crank-Nicolson-type
one; every theta in between is second order.  On a fixed fine mesh with
cubic elements the error is dominated by the time step, so halving tau
should cut the L2 error by about four for each theta.
"""
import numpy as np

from polydg import mesh, verify
from polydg.stepper import stencils

# %%
# The stencil weights.  ``dt`` multiplies (u^n, u^{n-1}, u^{n-2}) / (2 tau),
# ``mean`` forms the implicit average and ``extrap`` the explicit guess
# that linearizes |u|^2 u.
for theta in (0.0, 0.25, 0.5):
    s = stencils(theta)
    print(f"theta={theta:4}: dt={s.dt} mean={s.mean} extrap={s.extrap}")

# %%
# h = 1/16 keeps the spatial error of the cubics well below the time error
m = mesh.family_for_h("nonconvex", 1 / 16)
taus = [1 / 4, 1 / 8, 1 / 16]
for theta in (0.0, 0.25, 0.5):
    tab = verify.temporal_convergence(verify.EXAMPLE1, m, 3, theta, taus)
    orders = ", ".join(f"{o:.3f}" for o in tab.l2_orders[1:])
    print(f"theta={theta:4}: L2 errors {np.round(tab.l2, 8)}  orders {orders}")
