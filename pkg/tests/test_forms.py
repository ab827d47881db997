import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

from polydg import forms
from polydg import mesh as M
from polydg.forms import ModelParams
from polydg.quadrature import volume_rule
from polydg.solver import read_triplets
from polydg.space import FieldCoefficients, build_space, cell_values, l2_project
from polydg.verify import fitted_order, orders

SPEC_LAMBDA = lambda k: 10.0 * (k + 1) ** 2


@pytest.fixture(scope="module", params=[("nonconvex", 4, 1), ("mixed", 8, 2), ("voronoi", 16, 3)])
def space(request):
    family, n, k = request.param
    return build_space(M.generate(family, n, seed=1), k)


def random_fields(space, count, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(count, space.ndofs)) + 1j * rng.normal(size=(count, space.ndofs))


def test_model_params():
    p = ModelParams(2.0, 3.0, 1.0, -1.0, 0.5)
    assert p.diffusion == 2 + 3j
    assert p.reaction == 1 - 1j
    with pytest.raises(ValueError):
        ModelParams(nu=0.0)
    with pytest.raises(ValueError):
        ModelParams(kappa=-1.0)


def test_mass_identity_and_spd(space):
    Mm = forms.assemble_mass(space)
    assert abs(Mm - np.eye(space.ndofs)).max() < 1e-10
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(100, space.ndofs)):
        assert x @ (Mm @ x).real > 0


def test_raw_monomial_mass_on_unit_square():
    rule = volume_rule(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float), 4)
    x, y = rule.points.T
    basis = np.stack([np.ones_like(x), x - 0.5, y - 0.5])
    Mraw = (basis * rule.weights) @ basis.T
    assert np.allclose(Mraw, np.diag([1, 1 / 12, 1 / 12]), atol=1e-14)


def test_sipg_symmetric_real(space):
    A = forms.assemble_sipg(space)
    assert abs(A - A.T).max() <= 1e-10
    assert abs(A.imag).max() == 0


def test_coercivity_sampling(space):
    A = forms.assemble_sipg(space, SPEC_LAMBDA(space.k))
    for v in random_fields(space, 100):
        assert forms.energy(A, v) > 0


def test_norm_equivalence_gate(space):
    A = forms.assemble_sipg(space, SPEC_LAMBDA(space.k))
    D = forms.assemble_dg_norm_matrix(space)
    ratios = [forms.energy(A, v) / forms.energy(D, v) for v in random_fields(space, 100, 1)]
    assert min(ratios) >= 0.1
    assert max(ratios) <= 100


def test_dg_norm_matrix_matches_norms(space):
    D = forms.assemble_dg_norm_matrix(space)
    for v in random_fields(space, 3, 2):
        assert np.isclose(forms.norms(space, v)[2], forms.norms(space, v, D)[2], rtol=1e-10)


def test_penalty_warning():
    sp = build_space(M.generate_quad_grid(2), 1)
    with pytest.warns(UserWarning):
        forms.assemble_sipg(sp, 0.5)


def test_continuous_field_has_no_jump_terms():
    # continuous piecewise bilinear (in P2 per cell) vanishing on the boundary
    n = 4
    rng = np.random.default_rng(5)
    nodal = np.zeros((n + 1, n + 1), complex)
    nodal[1:-1, 1:-1] = rng.normal(size=(n - 1, n - 1)) + 1j * rng.normal(size=(n - 1, n - 1))
    grid = np.linspace(0, 1, n + 1)
    interp = RegularGridInterpolator((grid, grid), nodal)
    sp = build_space(M.generate_quad_grid(n), 2)
    w = l2_project(sp, lambda p: interp(np.clip(p, 0, 1))).values
    A = forms.assemble_sipg(sp)
    _, h1, dg = forms.norms(sp, w)
    assert abs(dg - h1) < 1e-10
    assert abs(np.vdot(w, A @ w) - h1 ** 2) < 1e-10


def test_weighted_mass():
    sp = build_space(M.generate_mixed(4), 2)
    Mm = forms.assemble_mass(sp)
    assert abs(forms.assemble_weighted_mass(sp, sp.zeros())).max() == 0
    c = 0.3 - 1.1j
    wc = l2_project(sp, lambda p: np.full(len(p), c))
    assert abs(forms.assemble_weighted_mass(sp, wc) - abs(c) ** 2 * Mm).max() < 1e-10
    rng = np.random.default_rng(0)
    W = forms.assemble_weighted_mass(sp, rng.normal(size=sp.ndofs) + 1j * rng.normal(size=sp.ndofs))
    assert abs(W - W.conj().T).max() < 1e-10
    assert np.linalg.eigvalsh(W.toarray()).min() > -1e-12


def test_weighted_mass_single_cell():
    sp = build_space(M.make_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]]), 1)
    wx = l2_project(sp, lambda p: p[:, 0].astype(complex))
    W = forms.assemble_weighted_mass(sp, wx)
    assert abs(W[0, 0] - 1 / 3) < 1e-12


def test_load_vectors(space):
    assert not forms.assemble_load(space, lambda p, t: np.zeros(len(p)), 0.0).any()
    F1 = forms.assemble_load(space, lambda p, t: np.ones(len(p)), 0.0).reshape(space.n_cells, space.nb)
    assert np.allclose(F1[:, 0], np.sqrt(space.mesh.cell_areas), atol=1e-12)
    assert np.abs(F1[:, 1:]).max() < 1e-12
    # f = one basis function -> its column of M
    j = 3 * space.nb + 1
    e = np.zeros(space.ndofs)
    e[j] = 1.0

    def basis_fn(p, t):
        # the load is sampled at the space's own quadrature points
        assert p is space.qpts
        return np.where(space.qcell == 3, space.phi[:, 1], 0.0)
    F = forms.assemble_load(space, basis_fn, 0.0)
    assert np.allclose(F, forms.assemble_mass(space) @ e, atol=1e-12)


def poly_u(p, t=0.0):
    x, y = p[:, 0], p[:, 1]
    return (x * (1 - x) * y * (1 - y)).astype(complex)


def poly_grad(p, t=0.0):
    x, y = p[:, 0], p[:, 1]
    return np.stack([(1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)], axis=1).astype(complex)


def test_ritz_order_k2():
    hs, err = [], []
    for n in (4, 8, 16):
        sp = build_space(M.generate_structured_nonconvex(n), 2)
        A = forms.assemble_sipg(sp)
        R = forms.ritz_project(sp, A, poly_u, poly_grad)
        val, _ = cell_values(sp, R.values)
        err.append(np.sqrt(sp.qwts @ np.abs(val - poly_u(sp.qpts)) ** 2))
        hs.append(sp.mesh.h)
    assert fitted_order(hs, err) >= 2.8


def test_ritz_zero_and_galerkin_orthogonality():
    sp = build_space(M.generate_mixed(8), 2)
    A = forms.assemble_sipg(sp)
    zero = lambda p, t=0.0: np.zeros(len(p), complex)
    zgrad = lambda p, t=0.0: np.zeros((len(p), 2), complex)
    assert not forms.ritz_project(sp, A, zero, zgrad).values.any()
    R = forms.ritz_project(sp, A, poly_u, poly_grad)
    b = forms.ritz_rhs(sp, poly_u, poly_grad)
    for v in random_fields(sp, 5):
        assert abs(np.vdot(v, A @ R.values - b)) <= 1e-8 * np.linalg.norm(v) * np.linalg.norm(b)


def test_ritz_rhs_zero_trace_matches_reduced_form():
    # for zero-trace u the boundary data term must vanish
    sp = build_space(M.generate_structured_nonconvex(4), 1)
    lift = forms.assemble_boundary_lift(sp, poly_u)
    assert np.abs(lift).max() < 1e-15


def interior_jump(sp, v):
    total = 0.0
    for ed in sp.edges:
        if len(ed.cells) == 1:
            continue
        a = ed.phi[0] @ v[ed.cells[0] * sp.nb:(ed.cells[0] + 1) * sp.nb]
        b = ed.phi[1] @ v[ed.cells[1] * sp.nb:(ed.cells[1] + 1) * sp.nb]
        total += ed.weights @ np.abs(a - b) ** 2
    return np.sqrt(total)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_jump_consistency_order(k):
    # the rate k + 1/2 is approached from below
    f = lambda p: np.sin(2 * p[:, 0]) * np.cos(p[:, 1])
    js = []
    for n in (8, 16, 32):
        sp = build_space(M.generate_structured_nonconvex(n), k)
        js.append(interior_jump(sp, l2_project(sp, f).values))
    o = orders(js)
    assert o[0] <= o[1] <= k + 0.5
    assert o[1] >= k + 0.4


def test_matrix_export_roundtrip(tmp_path):
    sp = build_space(M.generate_mixed(4), 1)
    A = forms.assemble_sipg(sp) * (1 + 0.5j)
    forms.export_matrix(A, tmp_path / "A.txt")
    first = (tmp_path / "A.txt").read_text().splitlines()[1]
    assert first.count("(") == 1 and "," in first
    B = read_triplets(tmp_path / "A.txt")
    assert abs(A - B).max() < 1e-14 * abs(A).max()


def test_field_type_accepted():
    sp = build_space(M.generate_quad_grid(2), 1)
    v = FieldCoefficients(np.ones(sp.ndofs, complex))
    assert forms.norms(sp, v)[0] > 0
