"""Per-triangle quadrature.

A 7-point symmetric rule exact for degree-5 polynomials is used on every
triangle.  Triangles whose closure contains the singular point are split
recursively (``levels`` times, four children per split, recursing only into
children that still contain the point) so the rule never sees the singularity
at full triangle scale and never places a node on it.
"""
from dataclasses import dataclass

import numpy as np

_S15 = np.sqrt(15.0)
_A1 = (6.0 - _S15) / 21.0
_A2 = (6.0 + _S15) / 21.0
_W1 = (155.0 - _S15) / 1200.0
_W2 = (155.0 + _S15) / 1200.0

# barycentric nodes and weights (weights sum to 1)
RULE7_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _A1, 1 - 2 * _A1], [_A1, 1 - 2 * _A1, _A1], [1 - 2 * _A1, _A1, _A1],
    [_A2, _A2, 1 - 2 * _A2], [_A2, 1 - 2 * _A2, _A2], [1 - 2 * _A2, _A2, _A2],
])
RULE7_WEIGHTS = np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2])


@dataclass(frozen=True)
class TriangleQuadrature:
    tri: np.ndarray      # (Q,) owning triangle
    bary: np.ndarray     # (Q, 3) barycentric coordinates in the owning triangle
    weights: np.ndarray  # (Q,) physical weights (area included)
    points: np.ndarray   # (Q, 2)

    def integrate(self, values, nt):
        """Per-triangle integrals of samples given at the quadrature points."""
        return np.bincount(self.tri, weights=self.weights * values, minlength=nt)

    def interpolate(self, triangles, field):
        """Values of the P1 interpolant of a vertex field at the nodes."""
        return np.einsum("qk,qk->q", self.bary, np.asarray(field)[triangles[self.tri]])


def _touching(mesh, point, tol=1e-12):
    v = mesh.vertices[mesh.triangles]
    scale = np.sqrt(np.abs(mesh.areas))
    inside = np.ones(mesh.nt, dtype=bool)
    for k in range(3):
        a, b = v[:, k], v[:, (k + 1) % 3]
        cross = (b[:, 0] - a[:, 0]) * (point[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (point[0] - a[:, 0])
        inside &= cross >= -tol * scale * np.linalg.norm(b - a, axis=1)
    return np.flatnonzero(inside)


def _split_bary(tri_bary, point_bary, levels):
    """Recursive 4-way split of a barycentric sub-triangle toward a point."""
    if levels == 0:
        return [tri_bary]
    a, b, c = tri_bary
    mab, mbc, mca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    out = []
    for child in ((a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)):
        child = np.array(child)
        lam = np.linalg.solve(child.T, point_bary)
        if np.all(lam >= -1e-12):
            out += _split_bary(child, point_bary, levels - 1)
        else:
            out.append(child)
    return out


def build_quadrature(mesh, singular_point=None, levels=3):
    nt = mesh.nt
    special = np.array([], dtype=np.int64)
    if singular_point is not None and levels > 0:
        special = _touching(mesh, np.asarray(singular_point, dtype=float))
    regular = np.setdiff1d(np.arange(nt), special)

    tri = [np.repeat(regular, 7)]
    bary = [np.tile(RULE7_BARY, (len(regular), 1))]
    wts = [np.outer(mesh.areas[regular], RULE7_WEIGHTS).ravel()]
    for t in special:
        corners = mesh.vertices[mesh.triangles[t]]
        p_bary = np.linalg.solve(np.vstack([corners.T, np.ones(3)]),
                                 np.append(singular_point, 1.0))
        for sub in _split_bary(np.eye(3), p_bary, levels):
            # sub rows are barycentric corners of the piece; its area fraction is |det|
            frac = abs(np.linalg.det(sub))
            tri.append(np.full(7, t))
            bary.append(RULE7_BARY @ sub)
            wts.append(mesh.areas[t] * frac * RULE7_WEIGHTS)
    tri = np.concatenate(tri)
    bary = np.concatenate(bary)
    wts = np.concatenate(wts)
    points = np.einsum("qk,qkd->qd", bary, mesh.vertices[mesh.triangles[tri]])
    return TriangleQuadrature(tri, bary, wts, points)


def p1_gradients(mesh):
    """(nt, 3, 2) constant gradients of the three hat functions on each triangle."""
    v = mesh.vertices[mesh.triangles]
    e0 = v[:, 2] - v[:, 1]
    e1 = v[:, 0] - v[:, 2]
    e2 = v[:, 1] - v[:, 0]
    # grad(phi_k) is the inward normal of the opposite edge over twice the area
    rot = np.stack([np.column_stack([-e[:, 1], e[:, 0]]) for e in (e0, e1, e2)], axis=1)
    return rot / (2.0 * mesh.areas)[:, None, None]
