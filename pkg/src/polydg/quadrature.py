"""Quadrature on simple polygons (via ear clipping) and on straight edges."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def measure(self):
        return float(self.weights.sum())


def polygon_area(xy):
    """Signed shoelace area; positive for counter-clockwise loops."""
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(xy):
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def drop_collinear(xy, rtol=1e-12):
    """Remove vertices that lie on the straight line through their neighbours."""
    scale = np.ptp(xy, axis=0).max() ** 2
    keep = []
    n = len(xy)
    for i in range(n):
        if abs(_cross(xy[i - 1], xy[i], xy[(i + 1) % n])) > rtol * scale:
            keep.append(i)
    return xy[keep]


def _segments_cross(p1, p2, q1, q2):
    d1, d2 = _cross(q1, q2, p1), _cross(q1, q2, p2)
    d3, d4 = _cross(p1, p2, q1), _cross(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def is_simple(xy):
    n = len(xy)
    for i in range(n):
        a, b = xy[i], xy[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a, b, xy[j], xy[(j + 1) % n]):
                return False
    return True


def triangulate_polygon(xy):
    """Ear-clipping triangulation of a CCW simple polygon.

    Collinear vertices are dropped first so that no zero-area triangles are
    produced. Returns an array of shape (n_tri, 3, 2).
    """
    xy = np.asarray(xy, dtype=float)
    xy = drop_collinear(xy)
    if len(xy) < 3:
        raise GeometryError("degenerate polygon")
    if polygon_area(xy) <= 0:
        raise GeometryError("polygon must be counter-clockwise with positive area")
    if not is_simple(xy):
        raise GeometryError("self-intersecting polygon")

    scale = np.ptp(xy, axis=0).max() ** 2
    idx = list(range(len(xy)))
    tris = []
    while len(idx) > 3:
        m = len(idx)
        for t in range(m):
            i0, i1, i2 = idx[t - 1], idx[t], idx[(t + 1) % m]
            a, b, c = xy[i0], xy[i1], xy[i2]
            if _cross(a, b, c) <= 1e-14 * scale:
                continue
            # an ear contains no other remaining vertex
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = xy[j]
                if (_cross(a, b, p) >= 0 and _cross(b, c, p) >= 0
                        and _cross(c, a, p) >= 0):
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                del idx[t]
                break
        else:
            raise GeometryError("no ear found; polygon is not simple")
    tris.append(tuple(idx))
    return xy[np.array(tris)]


@lru_cache(maxsize=None)
def _reference_triangle(degree):
    """Collapsed Gauss rule on the unit triangle (0,0),(1,0),(0,1)."""
    n = max(1, (degree + 2) // 2)
    xg, wg = np.polynomial.legendre.leggauss(n)
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    # Duffy map: s in [0,1] along the Gauss-Jacobi direction carries the (1-s) Jacobian
    s = (xj + 1) / 2
    ws = wj / 4
    r = (xg + 1) / 2
    wr = wg / 2
    S, R = np.meshgrid(s, r, indexing="ij")
    pts = np.column_stack([(R * (1 - S)).ravel(), S.ravel()])
    w = np.outer(ws, wr).ravel()
    return pts, w, 2 * n - 1


def triangle_rule(tri, degree):
    ref, w, exact = _reference_triangle(degree)
    a, b, c = tri
    jac = np.column_stack([b - a, c - a])
    det = abs(np.linalg.det(jac))
    return a + ref @ jac.T, w * det, exact


def volume_rule(polygon, degree):
    """Composite rule over the ear-clipping triangles of ``polygon``."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    pts, wts = [], []
    exact = degree
    for tri in triangulate_polygon(polygon):
        p, w, exact = triangle_rule(tri, degree)
        pts.append(p)
        wts.append(w)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), exact)


@lru_cache(maxsize=None)
def _gauss01(degree):
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2, 2 * n - 1


def edge_rule(a, b, degree):
    """Gauss-Legendre rule on the segment [a, b]; exact to ``degree``."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s, w, exact = _gauss01(degree)
    length = float(np.hypot(*(b - a)))
    return QuadratureRule(a + np.outer(s, b - a), w * length, exact)
