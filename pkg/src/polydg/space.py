"""Broken polynomial spaces on polygonal meshes.

Each cell carries the scaled monomials ``((x - x_K)/h_K)^a ((y - y_K)/h_K)^b``,
``a + b <= k``, orthonormalized in L2(K) through a Cholesky factor of their
Gram matrix. Degrees of freedom are numbered cell-major.
"""
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quadrature import edge_rule, volume_rule

SUPPORTED_DEGREES = (1, 2, 3)


def monomial_exponents(k):
    return [(d - b, b) for d in range(k + 1) for b in range(d + 1)]


def n_basis(k):
    return (k + 1) * (k + 2) // 2


@dataclass(eq=False)
class EdgeData:
    """Quadrature on one edge with the traces of the adjacent cells' bases."""
    index: int
    cells: tuple
    normal: np.ndarray
    length: float
    points: np.ndarray
    weights: np.ndarray
    phi: list = field(default_factory=list)     # per side: (nq, nb)
    dphi: list = field(default_factory=list)    # per side: (nq, nb, 2)


@dataclass(eq=False)
class BrokenSpace:
    mesh: object
    k: int
    nb: int
    centroids: np.ndarray
    scales: np.ndarray
    coeffs: np.ndarray          # (n_cells, nb, nb): monomial -> orthonormal
    qpts: np.ndarray            # all volume quadrature points
    qwts: np.ndarray
    qcell: np.ndarray           # owning cell of each point
    qoffsets: np.ndarray        # start of each cell's points, length n_cells + 1
    phi: np.ndarray             # (P, nb)
    dphi: np.ndarray            # (P, nb, 2)
    edges: list
    volume_degree: int
    edge_degree: int

    @property
    def n_cells(self):
        return self.mesh.n_cells

    @property
    def ndofs(self):
        return self.n_cells * self.nb

    @property
    def dofs_per_cell(self):
        return self.nb

    def cell_dofs(self, c):
        return np.arange(c * self.nb, (c + 1) * self.nb)

    def fingerprint(self):
        return {"mesh": self.mesh.fingerprint(), "k": self.k}

    def zeros(self, t=0.0):
        return FieldCoefficients(np.zeros(self.ndofs, dtype=complex), t)

    @cached_property
    def padded(self):
        """Cell-major copies of the volume rule padded to a common point count.

        Returns ``(index, weights, phi)`` with shapes (n_cells, P), (n_cells, P)
        and (n_cells, P, nb); padding slots point at 0 and carry zero weight
        and zero basis values, so batched BLAS products need no masking.
        """
        counts = np.diff(self.qoffsets)
        P = int(counts.max())
        slot = np.arange(P)
        valid = slot[None, :] < counts[:, None]
        index = np.where(valid, self.qoffsets[:-1, None] + slot[None, :], 0)
        weights = np.where(valid, self.qwts[index], 0.0)
        phi = np.where(valid[..., None], self.phi[index], 0.0)
        return index, weights, phi


@dataclass
class FieldCoefficients:
    values: np.ndarray
    t: float = 0.0

    def to_json(self, space):
        return {"space": space.fingerprint(), "t": self.t,
                "values": [[float(z.real), float(z.imag)] for z in self.values]}

    @classmethod
    def from_json(cls, data, space=None):
        if space is not None and data["space"] != space.fingerprint():
            raise ValueError("field was saved on a different space")
        v = np.array(data["values"], dtype=float).reshape(-1, 2)
        return cls(v[:, 0] + 1j * v[:, 1], float(data["t"]))

    def save(self, path, space, step=None):
        d = self.to_json(space)
        if step is not None:
            d["step"] = int(step)
        with open(path, "w") as fh:
            json.dump(d, fh)

    @classmethod
    def load(cls, path, space=None):
        with open(path) as fh:
            return cls.from_json(json.load(fh), space)


def _monomials(points, centroid, scale, k):
    """Scaled monomials and gradients, shapes (P, nb) and (P, nb, 2)."""
    X = (points[:, 0] - centroid[0]) / scale
    Y = (points[:, 1] - centroid[1]) / scale
    exps = monomial_exponents(k)
    P = len(points)
    val = np.empty((P, len(exps)))
    grad = np.zeros((P, len(exps), 2))
    xp = [np.ones(P)] + [X ** p for p in range(1, k + 1)]
    yp = [np.ones(P)] + [Y ** p for p in range(1, k + 1)]
    for i, (a, b) in enumerate(exps):
        val[:, i] = xp[a] * yp[b]
        if a:
            grad[:, i, 0] = a * xp[a - 1] * yp[b] / scale
        if b:
            grad[:, i, 1] = b * xp[a] * yp[b - 1] / scale
    return val, grad


def build_space(mesh, k, volume_degree=None, edge_degree=None):
    if k not in SUPPORTED_DEGREES:
        raise ValueError(f"polynomial degree must be one of {SUPPORTED_DEGREES}, got {k}")
    volume_degree = max(2 * k + 2, 4 * k) if volume_degree is None else volume_degree
    edge_degree = 2 * k + 2 if edge_degree is None else edge_degree
    nb = n_basis(k)
    nc = mesh.n_cells
    cents = mesh.cell_centroids.copy()
    scales = mesh.cell_diameters.copy()
    coeffs = np.empty((nc, nb, nb))
    pts, wts, cell_of, phis, dphis = [], [], [], [], []
    for c in range(nc):
        rule = volume_rule(mesh.cell_xy(c), volume_degree)
        m, dm = _monomials(rule.points, cents[c], scales[c], k)
        gram = m.T @ (rule.weights[:, None] * m)
        L = np.linalg.cholesky(gram)
        C = np.linalg.inv(L).T
        coeffs[c] = C
        pts.append(rule.points)
        wts.append(rule.weights)
        cell_of.append(np.full(len(rule.weights), c))
        phis.append(m @ C)
        dphis.append(np.einsum("pmd,mj->pjd", dm, C))
    counts = np.array([len(w) for w in wts])
    offsets = np.concatenate([[0], np.cumsum(counts)])
    space = BrokenSpace(mesh, k, nb, cents, scales, coeffs,
                        np.vstack(pts), np.concatenate(wts), np.concatenate(cell_of), offsets,
                        np.vstack(phis), np.concatenate(dphis), [], volume_degree, edge_degree)
    verts = mesh.vertices
    for ei, e in enumerate(mesh.edges):
        rule = edge_rule(verts[e.endpoints[0]], verts[e.endpoints[1]], edge_degree)
        ed = EdgeData(ei, e.cells, e.normal, e.length, rule.points, rule.weights)
        for c in e.cells:
            v, g = eval_basis(space, c, rule.points)
            ed.phi.append(v)
            ed.dphi.append(g)
        space.edges.append(ed)
    return space


def eval_basis(space, cell, points):
    """Orthonormal basis values (P, nb) and gradients (P, nb, 2) of ``cell`` at ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m, dm = _monomials(points, space.centroids[cell], space.scales[cell], space.k)
    C = space.coeffs[cell]
    return m @ C, np.einsum("pmd,mj->pjd", dm, C)


def cell_values(space, coeffs):
    """Field values and gradients at every volume quadrature point."""
    U = np.asarray(coeffs).reshape(space.n_cells, space.nb)[space.qcell]
    val = np.einsum("pi,pi->p", space.phi, U)
    grad = np.einsum("pid,pi->pd", space.dphi, U)
    return val, grad


def eval_field(space, coeffs, cell, points):
    v, g = eval_basis(space, cell, points)
    c = np.asarray(coeffs)[cell * space.nb:(cell + 1) * space.nb]
    return v @ c, np.einsum("pid,i->pd", g, c)


def cell_integrals(space, integrand):
    """Per-cell sums of ``w_q * integrand_q`` along the leading axis."""
    return np.add.reduceat(space.qwts.reshape((-1,) + (1,) * (integrand.ndim - 1)) * integrand,
                           space.qoffsets[:-1], axis=0)


def cell_point_values(space, coeffs):
    """Field values on the padded per-cell layout, shape (n_cells, P)."""
    _, _, phi = space.padded
    U = np.asarray(coeffs).reshape(space.n_cells, space.nb)
    return np.matmul(phi, U[:, :, None])[..., 0]


def mass_blocks(space):
    return cell_integrals(space, space.phi[:, :, None] * space.phi[:, None, :])


def l2_project(space, f, t=0.0):
    """Cellwise L2 projection of the pointwise function ``f(points) -> complex``."""
    fq = np.asarray(f(space.qpts), dtype=complex)
    rhs = cell_integrals(space, fq[:, None] * space.phi)
    blocks = mass_blocks(space)
    vals = np.linalg.solve(blocks, rhs[..., None])[..., 0]
    return FieldCoefficients(vals.reshape(-1), t)
