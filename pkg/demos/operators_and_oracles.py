"""
Inside the discretization
=========================

A tour of the building blocks: the orthonormal basis makes the mass matrix
the identity, the SIPG matrix is real symmetric and coercive for a large
enough penalty, and the discrete inequalities behind the analysis can be
checked on random data.
"""
import numpy as np

from polydg import forms, mesh, verify
from polydg.space import build_space

sp = build_space(mesh.generate_mixed(8), 2)
print(f"{sp.n_cells} cells, {sp.nb} dofs per cell, {sp.ndofs} in total")

# %%
M = forms.assemble_mass(sp)
A = forms.assemble_sipg(sp)
print("||M - I||_max =", abs(M - np.eye(sp.ndofs)).max())
print("||A - A^T||_max =", abs(A - A.T).max())

# %%
# The smallest eigenvalue of A as a function of the penalty; below the
# threshold the form stops being coercive.
for lam in (2.0, 4.0, 8.0, forms.default_penalty(2)):
    ev = np.linalg.eigvalsh(forms.assemble_sipg(sp, lam).toarray().real).min()
    print(f"lambda={lam:5.1f}: smallest eigenvalue {ev: .3e}")

# %%
# Energy, transfer and inverse inequalities on random sequences and fields.
rep = verify.lemma_property_suite(seed=7, trials=200)
for name, r in rep.results.items():
    print(f"{name:14s} {'PASS' if r['passed'] else 'FAIL'}")

# %%
# Reversing the energy inequality must produce counterexamples.
bad = verify.lemma_property_suite(seed=7, trials=200, flip=True)
print("flipped inequality failures:", bad.results["energy"]["failures"])
