"""General polygonal meshes of the unit square and the unit disk.

Cells are counter-clockwise vertex loops. Loops may contain collinear
vertices (conforming refinement points) and neighbouring loops need not
match vertex by vertex: a vertex lying inside another cell's side is a
hanging node and the side is split into several edges by
:func:`build_topology`.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .quadrature import drop_collinear, polygon_area, polygon_centroid

log = logging.getLogger(__name__)


class MeshError(ValueError):
    pass


class TopologyError(MeshError):
    pass


@dataclass(frozen=True)
class Edge:
    endpoints: tuple
    cells: tuple            # (K1,) for boundary edges, (K1, K2) with K1 < K2 otherwise
    normal: np.ndarray      # points from K1 to K2, outward on the boundary
    length: float

    @property
    def kind(self):
        return "interior" if len(self.cells) == 2 else "boundary"

    @property
    def is_boundary(self):
        return len(self.cells) == 1


@dataclass(frozen=True)
class MeshQualityReport:
    h: float
    min_h_K: float
    quasi_uniformity_ratio: float
    min_edge_to_cell_ratio: float
    has_hanging_nodes: bool


@dataclass(eq=False)
class PolyMesh:
    vertices: np.ndarray
    cells: list
    edges: list = field(default_factory=list)
    cell_edges: list = field(default_factory=list)
    cell_diameters: np.ndarray = None
    cell_areas: np.ndarray = None
    cell_centroids: np.ndarray = None
    family: str = "custom"
    domain: str = "square"
    meta: dict = field(default_factory=dict)

    @property
    def h(self):
        return float(self.cell_diameters.max())

    @property
    def n_cells(self):
        return len(self.cells)

    def cell_xy(self, c):
        return self.vertices[self.cells[c]]

    @property
    def interior_edges(self):
        return [e for e in self.edges if not e.is_boundary]

    @property
    def boundary_edges(self):
        return [e for e in self.edges if e.is_boundary]

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        for c in self.cells:
            h.update(np.asarray(c, dtype=np.int64).tobytes())
            h.update(b"|")
        return h.hexdigest()[:16]

    def to_json(self):
        return {"vertices": self.vertices.tolist(),
                "cells": [list(map(int, c)) for c in self.cells]}

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def _diameter(xy):
    d = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def make_mesh(vertices, cells, family="custom", domain="square", meta=None):
    """Validate cells and compute geometry and edge topology."""
    vertices = np.asarray(vertices, dtype=float)
    cells = [np.asarray(c, dtype=np.int64) for c in cells]
    areas = np.empty(len(cells))
    cents = np.empty((len(cells), 2))
    diams = np.empty(len(cells))
    for i, c in enumerate(cells):
        xy = vertices[c]
        areas[i] = polygon_area(xy)
        if areas[i] <= 0:
            raise MeshError(f"cell {i} is not counter-clockwise with positive area")
        cents[i] = polygon_centroid(xy)
        diams[i] = _diameter(xy)
    edges, cell_edges = build_topology(vertices, cells)
    return PolyMesh(vertices, cells, edges, cell_edges, diams, areas, cents,
                    family=family, domain=domain, meta=dict(meta or {}))


def load_mesh(path):
    with open(path) as fh:
        data = json.load(fh)
    return make_mesh(data["vertices"], data["cells"], family=data.get("family", "custom"),
                     domain=data.get("domain", "square"))


def build_topology(vertices, cells, tol=1e-10):
    """Edge set for a polygonal partition.

    Every cell side is cut at all mesh vertices lying on it; the resulting
    atomic segments must be shared by one cell (boundary) or two cells.
    Consecutive collinear segments with the same cell pair are merged, so
    edges are maximal straight shared segments. Returns ``(edges,
    cell_edges)`` where ``cell_edges[c]`` lists edge indices of cell ``c``.
    """
    vertices = np.asarray(vertices, dtype=float)
    tree = cKDTree(vertices)
    scale = np.ptp(vertices, axis=0).max()
    atoms = {}      # (i, j) sorted -> list of (cell, side_direction_sign)
    cell_atoms = []
    for c, loop in enumerate(cells):
        seq = []
        n = len(loop)
        for s in range(n):
            i, j = int(loop[s]), int(loop[(s + 1) % n])
            a, b = vertices[i], vertices[j]
            d = b - a
            L = float(np.hypot(*d))
            cand = tree.query_ball_point((a + b) / 2, L / 2 + tol * scale)
            inner = []
            for v in cand:
                if v in (i, j):
                    continue
                p = vertices[v] - a
                t = float(np.dot(p, d)) / (L * L)
                if 0 < t < 1 and abs(p[0] * d[1] - p[1] * d[0]) <= tol * scale * L:
                    inner.append((t, v))
            chain = [i] + [v for _, v in sorted(inner)] + [j]
            for p, q in zip(chain[:-1], chain[1:]):
                seq.append((p, q))
        cell_atoms.append(seq)
        for p, q in seq:
            atoms.setdefault((min(p, q), max(p, q)), []).append(c)

    for key, owners in atoms.items():
        if len(owners) > 2 or (len(owners) == 2 and owners[0] == owners[1]):
            raise TopologyError(f"segment {key} is shared by cells {owners}")

    edges = []
    cell_edges = [[] for _ in cells]
    seen = {}
    for c, seq in enumerate(cell_atoms):
        # group consecutive atoms of this cell with same neighbour and direction
        groups = []
        for p, q in seq:
            owners = atoms[(min(p, q), max(p, q))]
            nb = [o for o in owners if o != c]
            nb = nb[0] if nb else -1
            d = vertices[q] - vertices[p]
            d = d / np.hypot(*d)
            if groups and groups[-1][0] == nb and np.dot(groups[-1][2], d) > 1 - 1e-12:
                groups[-1][1].append(q)
            else:
                groups.append([nb, [p, q], d])
        # the loop may start in the middle of a group
        if len(groups) > 1 and groups[0][0] == groups[-1][0] \
                and np.dot(groups[0][2], groups[-1][2]) > 1 - 1e-12:
            last = groups.pop()
            groups[0][1] = last[1][:-1] + groups[0][1]
        for nb, chain, d in groups:
            p, q = chain[0], chain[-1]
            key = (min(p, q), max(p, q), min(c, nb) if nb >= 0 else c, nb)
            if nb >= 0 and (min(p, q), max(p, q), min(c, nb), max(c, nb)) in seen:
                eid = seen[(min(p, q), max(p, q), min(c, nb), max(c, nb))]
                cell_edges[c].append(eid)
                continue
            a, b = vertices[p], vertices[q]
            t = b - a
            L = float(np.hypot(*t))
            outward = np.array([t[1], -t[0]]) / L  # CCW loop: right-hand normal is outward
            if nb < 0:
                e = Edge((p, q), (c,), outward, L)
                eid = len(edges)
                edges.append(e)
            else:
                k1, k2 = min(c, nb), max(c, nb)
                n = outward if c == k1 else -outward
                ends = (p, q) if c == k1 else (q, p)
                e = Edge(ends, (k1, k2), n, L)
                eid = len(edges)
                edges.append(e)
                seen[(min(p, q), max(p, q), k1, k2)] = eid
            cell_edges[c].append(eid)
    return edges, cell_edges


def quality_report(mesh):
    hK = mesh.cell_diameters
    ratio = np.inf
    for c, eids in enumerate(mesh.cell_edges):
        for e in eids:
            ratio = min(ratio, mesh.edges[e].length / hK[c])
    return MeshQualityReport(
        h=float(hK.max()),
        min_h_K=float(hK.min()),
        quasi_uniformity_ratio=float(hK.min() / hK.max()),
        min_edge_to_cell_ratio=float(ratio),
        has_hanging_nodes=has_hanging_nodes(mesh),
    )


def has_hanging_nodes(mesh):
    """True if some vertex lies inside a side of a cell without being one of its loop vertices."""
    on_loop = {}
    for c, loop in enumerate(mesh.cells):
        for v in loop:
            on_loop.setdefault(int(v), set()).add(c)
    for e in mesh.edges:
        for c in e.cells:
            for v in e.endpoints:
                if c not in on_loop.get(v, ()):
                    return True
    return False


# ---------------------------------------------------------------- generators

def _check_even(n):
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise ValueError(f"subdivision count must be an even integer >= 2, got {n!r}")


def _block_cells(i, j, offset_x, vid, conforming):
    """The L-hexagon and its complementary square for 2x2 sub-quad block (i, j).

    The block's missing corner rotates with (i + j) so that neighbouring
    L-cells interlock. ``vid(a, b)`` maps sub-grid coordinates to vertex ids.
    """
    x0, y0 = 2 * i, 2 * j
    corner = (i + j) % 4
    # sub-grid ring around the block, CCW starting at lower-left
    ring = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
    # the cut-out square occupies the block corner at ring index 2*q
    q = [2, 4, 6, 0][corner]        # ring index of the cut corner
    cut_corner = ring[q]
    centre = (1, 1)
    a, b = ring[q - 1], ring[(q + 1) % 8]
    square = [a, cut_corner, b, centre]
    lshape = []
    for t in range(8):
        p = ring[(q + 1 + t) % 8]
        if p == cut_corner:
            continue
        lshape.append(p)
        if p == a:
            break
    # lshape runs b ... a along the ring; close through the centre
    lshape = lshape + [centre]
    if not conforming:
        keep = []
        for p in lshape:
            if p in (a, b, centre) or p in ring[0::2]:
                keep.append(p)
        lshape = keep
    to_id = lambda p: vid(offset_x + x0 + p[0], y0 + p[1])
    return [to_id(p) for p in lshape], [to_id(p) for p in square]


def generate_structured_nonconvex(n):
    """Interlocking L-hexagon tiling of the unit square on an ``n x n`` sub-quad grid.

    Each 2x2 block of sub-quads is split into an L-shaped (non-convex)
    cell of three sub-quads and the remaining square; all sub-grid points
    on a cell's boundary are kept in its loop so the mesh is conforming.
    Nominal mesh size is ``2/n``.
    """
    _check_even(n)
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    vid = lambda a, b: a * (n + 1) + b
    cells = []
    for i in range(n // 2):
        for j in range(n // 2):
            L, S = _block_cells(i, j, 0, vid, True)
            cells += [L, S]
    return make_mesh(verts, cells, family="nonconvex", meta={"n": n, "h_nominal": 2.0 / n})


def generate_mixed(n):
    """Axis-aligned quads on the left half, L-hexagon blocks on the right half.

    Left: ``(n/2) x n`` quads of side ``1/n``. Right: ``(n/4) x (n/2)``
    blocks of side ``2/n`` whose loops omit the sub-grid midpoints, so the
    interface and the block boundaries carry hanging nodes. ``n`` must be
    a multiple of 4.
    """
    _check_even(n)
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    vid = lambda a, b: a * (n + 1) + b
    half = n // 2
    if half % 2:
        raise ValueError("mixed family needs n divisible by 4")
    cells = []
    for a in range(half):
        for b in range(n):
            cells.append([vid(a, b), vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1)])
    for i in range(half // 2):
        for j in range(n // 2):
            L, S = _block_cells(i, j, half, vid, False)
            cells += [L, S]
    used = sorted({v for c in cells for v in c})
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    cells = [[int(remap[v]) for v in c] for c in cells]
    return make_mesh(verts[used], cells, family="mixed", meta={"n": n, "h_nominal": 2.0 / n})


def generate_quad_grid(n):
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    vid = lambda a, b: a * (n + 1) + b
    cells = [[vid(a, b), vid(a + 1, b), vid(a + 1, b + 1), vid(a, b + 1)]
             for a in range(n) for b in range(n)]
    return make_mesh(verts, cells, family="quad", meta={"n": n, "h_nominal": 1.0 / n})


def _mirror(seeds, domain):
    if domain == "square":
        x, y = seeds[:, 0], seeds[:, 1]
        return np.vstack([
            np.column_stack([-x, y]), np.column_stack([2 - x, y]),
            np.column_stack([x, -y]), np.column_stack([x, 2 - y]),
        ])
    r = np.hypot(seeds[:, 0], seeds[:, 1])
    r = np.maximum(r, 1e-12)
    return seeds * ((2.0 - r) / r)[:, None]


def _voronoi_cells(seeds, domain):
    """Voronoi regions of ``seeds`` clipped to the domain by mirror seeds.

    For the disk, vertices on the mirror bisectors are pushed radially onto
    the unit circle so boundary edges are chords.
    """
    m = len(seeds)
    allpts = np.vstack([seeds, _mirror(seeds, domain)])
    vor = Voronoi(allpts)
    region_of = vor.point_region
    # vertices touching a mirror region lie on the boundary
    boundary_v = set()
    for (p, q), rv in zip(vor.ridge_points, vor.ridge_vertices):
        if (p < m) != (q < m):
            boundary_v.update(v for v in rv if v >= 0)
    V = vor.vertices.copy()
    if domain == "square":
        V = np.clip(V, 0.0, 1.0)
        V[np.abs(V) < 1e-12] = 0.0
        V[np.abs(V - 1) < 1e-12] = 1.0
    else:
        for v in boundary_v:
            V[v] /= np.hypot(*V[v])
    cells = []
    for i in range(m):
        reg = vor.regions[region_of[i]]
        if -1 in reg or len(reg) < 3:
            raise MeshError("unbounded Voronoi region for an interior seed")
        xy = V[reg]
        if polygon_area(xy) < 0:
            reg = reg[::-1]
        cells.append(list(reg))
    return V, cells


def _compact(V, cells, merge_tol):
    """Merge vertices closer than ``merge_tol`` and drop unused ones."""
    tree = cKDTree(V)
    parent = np.arange(len(V))
    for i, j in sorted(tree.query_pairs(merge_tol)):
        ri, rj = parent[i], parent[j]
        while parent[ri] != ri:
            ri = parent[ri]
        while parent[rj] != rj:
            rj = parent[rj]
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    root = parent.copy()
    for i in range(len(root)):
        r = i
        while parent[r] != r:
            r = parent[r]
        root[i] = r
    out = []
    for c in cells:
        loop = []
        for v in c:
            r = int(root[v])
            if not loop or loop[-1] != r:
                loop.append(r)
        while len(loop) > 1 and loop[0] == loop[-1]:
            loop.pop()
        out.append(loop)
    used = sorted({v for c in out for v in c})
    remap = -np.ones(len(V), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return V[used], [[int(remap[v]) for v in c] for c in out]


def _initial_seeds(n_seeds, domain, rng, jitter=0.3):
    """Jittered lattice seeds.

    On the square this needs a perfect-square count (otherwise uniform random);
    on the disk the ``n_seeds`` lattice points nearest the origin are used.
    """
    m = int(round(np.sqrt(n_seeds)))
    if domain == "square":
        if m * m == n_seeds:
            i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
            base = (np.column_stack([i.ravel(), j.ravel()]) + 0.5) / m
            return base + rng.uniform(-jitter, jitter, size=base.shape) / m
        return rng.uniform(0.0, 1.0, size=(n_seeds, 2))
    a = np.sqrt(np.pi / n_seeds)
    g = np.arange(-np.ceil(1.5 / a), np.ceil(1.5 / a) + 1) * a
    x, y = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([x.ravel(), y.ravel()]) + 0.5 * a
    pts = pts[np.argsort(np.hypot(pts[:, 0], pts[:, 1]), kind="stable")[:n_seeds]]
    pts = pts + rng.uniform(-jitter, jitter, size=pts.shape) * a
    r = np.hypot(pts[:, 0], pts[:, 1])
    over = r > 0.98
    pts[over] *= (0.98 / r[over])[:, None]
    return pts


def generate_voronoi(n_seeds, domain="square", lloyd_iters=3, seed=0):
    """Clipped (centroidal) Voronoi mesh of the unit square or unit disk."""
    if n_seeds < 4:
        raise ValueError("n_seeds must be >= 4")
    if domain not in ("square", "disk"):
        raise ValueError(f"unknown domain {domain!r}")
    rng = np.random.default_rng(seed)
    seeds = _initial_seeds(n_seeds, domain, rng)
    area = 1.0 if domain == "square" else np.pi
    spacing = np.sqrt(area / n_seeds)
    for attempt in range(20):
        if len(np.unique(np.round(seeds, 14), axis=0)) == n_seeds:
            break
        log.warning("duplicate Voronoi seeds; jittering (attempt %d)", attempt)
        seeds = seeds + rng.normal(scale=1e-3 * spacing, size=seeds.shape)
    else:
        raise MeshError("could not separate duplicate seeds")
    for _ in range(lloyd_iters):
        V, cells = _voronoi_cells(seeds, domain)
        seeds = np.array([polygon_centroid(V[c]) for c in cells])
    V, cells = _voronoi_cells(seeds, domain)
    V, cells = _compact(V, cells, 1e-3 * spacing)
    family = "voronoi" if domain == "square" else "disk"
    return make_mesh(V, cells, family=family, domain=domain,
                     meta={"n_seeds": n_seeds, "lloyd_iters": lloyd_iters, "seed": seed,
                           "h_nominal": float(spacing)})


def generate(family, n, seed=0, lloyd_iters=None):
    """Mesh for a named family; ``n`` is the family's resolution parameter.

    nonconvex/mixed: sub-quad count per side. voronoi/disk: number of seeds.
    """
    if family == "nonconvex":
        return generate_structured_nonconvex(n)
    if family == "mixed":
        return generate_mixed(n)
    if family == "quad":
        return generate_quad_grid(n)
    if family in ("voronoi", "disk"):
        domain = "square" if family == "voronoi" else "disk"
        return generate_voronoi(n, domain, 3 if lloyd_iters is None else lloyd_iters, seed)
    raise ValueError(f"unknown mesh family {family!r}")


def family_for_h(family, h, seed=0, lloyd_iters=20):
    """Mesh of a family at nominal size ``h`` (h = 1/2, 1/4, ...)."""
    inv = int(round(1.0 / h))
    if family in ("nonconvex", "mixed"):
        n = 2 * inv
        if family == "mixed" and n % 4:
            n *= 2
        return generate(family, n)
    if family == "quad":
        return generate_quad_grid(inv)
    if family == "voronoi":
        return generate_voronoi(max(4, inv * inv), "square", lloyd_iters, seed)
    if family == "disk":
        return generate_voronoi(max(4, int(round(np.pi * inv * inv))), "disk", lloyd_iters, seed)
    raise ValueError(f"unknown mesh family {family!r}")
