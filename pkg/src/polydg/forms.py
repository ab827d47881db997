"""Discrete operators: mass, SIPG stiffness, nonlinearity-weighted mass, loads, norms."""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import solver
from .space import FieldCoefficients, cell_integrals, cell_point_values, cell_values, mass_blocks


@dataclass(frozen=True)
class ModelParams:
    nu: float = 1.0
    alpha: float = 1.0
    kappa: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        # kappa = 0 gives the linear problem used by the dense oracles
        if self.nu <= 0 or self.kappa < 0:
            raise ValueError("nu must be positive and kappa non-negative")

    @property
    def diffusion(self):
        return complex(self.nu, self.alpha)

    @property
    def reaction(self):
        return complex(self.kappa, self.beta)


def default_penalty(k):
    return 2.0 * (k + 1) ** 2


def min_penalty(k):
    """Below this value coercivity is not expected on the supported mesh families."""
    return float((k + 1) ** 2)


@dataclass(frozen=True)
class SpaceConfig:
    k: int = 1
    penalty: float = None

    @property
    def lam(self):
        return default_penalty(self.k) if self.penalty is None else self.penalty


def block_diagonal(blocks):
    nc, nb, _ = blocks.shape
    n = nc * nb
    indptr = np.arange(n + 1) * nb
    indices = (np.arange(nc)[:, None, None] * nb
               + np.zeros((1, nb, 1), dtype=np.int64) + np.arange(nb)[None, None, :]).reshape(-1)
    return sp.csr_matrix((blocks.reshape(-1), indices, indptr), shape=(n, n))


def assemble_mass(space):
    return block_diagonal(mass_blocks(space))


def _edge_sides(ed):
    """(sign in the jump, weight in the average) for each side of an edge."""
    if len(ed.cells) == 2:
        return [(1.0, 0.5), (-1.0, 0.5)]
    return [(1.0, 1.0)]


def _assemble_edge_form(space, consistency, penalty, volume=True):
    """Triplets of  vol - c*sum{grad u}.n[v] - c*sum[u]{grad v}.n + sum p/h_E [u][v]."""
    nb = space.nb
    rows, cols, vals = [], [], []
    if volume:
        blocks = cell_integrals(space, np.einsum("pid,pjd->pij", space.dphi, space.dphi))
        A = block_diagonal(blocks).tocoo()
        rows.append(A.row)
        cols.append(A.col)
        vals.append(A.data)
    li, lj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
    for ed in space.edges:
        sides = _edge_sides(ed)
        w = ed.weights
        dn = [g @ ed.normal for g in ed.dphi]       # (nq, nb)
        for s, (sig_s, om_s) in enumerate(sides):
            for t, (sig_t, om_t) in enumerate(sides):
                phi_s, phi_t = ed.phi[s], ed.phi[t]
                blk = np.zeros((nb, nb))
                if consistency:
                    blk -= consistency * om_t * sig_s * (phi_s.T @ (w[:, None] * dn[t]))
                    blk -= consistency * om_s * sig_t * (dn[s].T @ (w[:, None] * phi_t))
                if penalty:
                    blk += penalty / ed.length * sig_s * sig_t * (phi_s.T @ (w[:, None] * phi_t))
                rows.append((ed.cells[s] * nb + li).ravel())
                cols.append((ed.cells[t] * nb + lj).ravel())
                vals.append(blk.ravel())
    return solver.from_triplets(space.ndofs, np.concatenate(rows), np.concatenate(cols),
                                np.concatenate(vals))


def assemble_sipg(space, lam=None):
    """Symmetric interior penalty stiffness; edge sums include boundary edges."""
    lam = default_penalty(space.k) if lam is None else lam
    if lam < min_penalty(space.k):
        warnings.warn(f"penalty {lam} below {min_penalty(space.k)}; coercivity not guaranteed")
    return _assemble_edge_form(space, 1.0, lam)


def assemble_dg_norm_matrix(space):
    """Matrix D with v^H D v = ||v||_DG^2."""
    return _assemble_edge_form(space, 0.0, 1.0)


def assemble_jump_matrix(space, boundary=True):
    """Matrix J with v^H J v = sum_E h_E^{-1} int_E |[v]|^2."""
    nb = space.nb
    rows, cols, vals = [], [], []
    li, lj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
    for ed in space.edges:
        if len(ed.cells) == 1 and not boundary:
            continue
        sides = _edge_sides(ed)
        for s, (sig_s, _) in enumerate(sides):
            for t, (sig_t, _) in enumerate(sides):
                blk = sig_s * sig_t / ed.length * (ed.phi[s].T @ (ed.weights[:, None] * ed.phi[t]))
                rows.append((ed.cells[s] * nb + li).ravel())
                cols.append((ed.cells[t] * nb + lj).ravel())
                vals.append(blk.ravel())
    return solver.from_triplets(space.ndofs, np.concatenate(rows), np.concatenate(cols),
                                np.concatenate(vals))


def weighted_mass_blocks(space, w):
    """Per-cell blocks of  int |w|^2 phi_j phi_i  with the weight taken pointwise."""
    v = w.values if isinstance(w, FieldCoefficients) else w
    _, wts, phi = space.padded
    wq = cell_point_values(space, v)
    scaled = phi * (wts * (wq.real ** 2 + wq.imag ** 2))[..., None]
    return np.matmul(scaled.transpose(0, 2, 1), phi)


def assemble_weighted_mass(space, w):
    return block_diagonal(weighted_mass_blocks(space, w))


def assemble_load(space, f, t=0.0):
    """F_i = int f(x, t) conj(phi_i) dx (the basis is real)."""
    fq = np.asarray(f(space.qpts, t), dtype=complex)
    return cell_integrals(space, fq[:, None] * space.phi).reshape(-1)


def assemble_boundary_lift(space, g, t=0.0, lam=None):
    """Boundary data contribution  sum_{E on bdry} int g (-grad phi_i . n + lam/h_E phi_i).

    With this right-hand side term the SIPG form imposes ``u = g`` weakly;
    it vanishes for homogeneous data.
    """
    lam = default_penalty(space.k) if lam is None else lam
    F = np.zeros(space.ndofs, dtype=complex)
    nb = space.nb
    for ed in space.edges:
        if len(ed.cells) != 1:
            continue
        gq = np.asarray(g(ed.points, t), dtype=complex)
        phi, dn = ed.phi[0], ed.dphi[0] @ ed.normal
        c = ed.cells[0]
        F[c * nb:(c + 1) * nb] += (ed.weights * gq) @ (lam / ed.length * phi - dn)
    return F


def ritz_rhs(space, u, grad_u, lam=None, t=0.0):
    """b_i = a_h(u, phi_i) for a smooth, globally continuous ``u``.

    Interior jumps of ``u`` vanish; boundary traces enter through the
    boundary convention {v} = [v] = v|_K.
    """
    gq = np.asarray(grad_u(space.qpts, t))
    b = cell_integrals(space, np.einsum("pd,pid->pi", gq, space.dphi)).reshape(-1).astype(complex)
    nb = space.nb
    for ed in space.edges:
        gn = np.asarray(grad_u(ed.points, t)) @ ed.normal
        for s, (sig, _) in enumerate(_edge_sides(ed)):
            c = ed.cells[s]
            b[c * nb:(c + 1) * nb] -= sig * ((ed.weights * gn) @ ed.phi[s])
    b += assemble_boundary_lift(space, u, t, lam)
    return b


def ritz_project(space, A, u, grad_u, lam=None, t=0.0, tol=solver.DEFAULT_TOL):
    """Elliptic projection: solve a_h(R u, v) = a_h(u, v) for all v."""
    b = ritz_rhs(space, u, grad_u, lam, t)
    x, _ = solver.solve_spd(A, b, tol=tol, block_size=space.nb)
    return FieldCoefficients(x, t)


def norms(space, coeffs, D=None):
    """(L2 norm, broken H1 seminorm, DG norm) of a discrete field."""
    v = coeffs.values if isinstance(coeffs, FieldCoefficients) else np.asarray(coeffs)
    val, grad = cell_values(space, v)
    l2 = np.sqrt(np.sum(space.qwts * np.abs(val) ** 2))
    h1sq = np.sum(space.qwts * np.sum(np.abs(grad) ** 2, axis=1))
    if D is None:
        jump = 0.0
        nb = space.nb
        for ed in space.edges:
            tr = 0
            for s, (sig, _) in enumerate(_edge_sides(ed)):
                c = ed.cells[s]
                tr = tr + sig * (ed.phi[s] @ v[c * nb:(c + 1) * nb])
            jump += np.sum(ed.weights * np.abs(tr) ** 2) / ed.length
        dgsq = h1sq + jump
    else:
        dgsq = float(np.real(np.vdot(v, D @ v)))
    return float(l2), float(np.sqrt(h1sq)), float(np.sqrt(max(dgsq, 0.0)))


def lp_norm(space, coeffs, p=4):
    v = coeffs.values if isinstance(coeffs, FieldCoefficients) else np.asarray(coeffs)
    val, _ = cell_values(space, v)
    return float(np.sum(space.qwts * np.abs(val) ** p) ** (1.0 / p))


def energy(A, coeffs):
    v = coeffs.values if isinstance(coeffs, FieldCoefficients) else np.asarray(coeffs)
    return float(np.real(np.vdot(v, A @ v)))


def export_matrix(A, path):
    solver.export_triplets(A, path)
