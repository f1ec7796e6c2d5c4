"""Conforming P1 triangulations of rectilinear 2-D domains.

Meshes are immutable: every operation returns a new :class:`Mesh`.  Boundary
flags are always recomputed topologically (a vertex is on the boundary iff it
touches an edge owned by exactly one triangle), which is what submeshes of
nodal domains need.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgument, InvalidMesh, PreconditionViolation

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray        # (nv, 2) float
    triangles: np.ndarray       # (nt, 3) int, counter-clockwise
    boundary_flags: np.ndarray  # (nv,) bool

    @classmethod
    def from_arrays(cls, vertices, triangles):
        """Validate, orient counter-clockwise and flag the boundary."""
        v = np.array(vertices, dtype=float).reshape(-1, 2)
        t = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) == 0:
            raise InvalidMesh("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise InvalidMesh("triangle references a missing vertex")
        area = _signed_areas(v, t)
        mean = np.abs(area).mean()
        if np.any(np.abs(area) <= 1e-14 * mean):
            raise InvalidMesh("degenerate triangle (area below 1e-14 of mean)")
        flip = area < 0
        if flip.any():
            t = t.copy()
            t[flip] = t[flip][:, [0, 2, 1]]
        edges, counts, _ = _edge_table(t)
        if counts.max() > 2:
            raise InvalidMesh("edge shared by more than two triangles")
        flags = np.zeros(len(v), dtype=bool)
        flags[edges[counts == 1].ravel()] = True
        return cls(_readonly(v), _readonly(t), _readonly(flags))

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nt(self):
        return len(self.triangles)

    @cached_property
    def areas(self):
        return _readonly(_signed_areas(self.vertices, self.triangles))

    @cached_property
    def _edges(self):
        return _edge_table(self.triangles)

    @property
    def edges(self):
        """Unique undirected edges as sorted vertex pairs."""
        return self._edges[0]

    @property
    def triangle_edges(self):
        """(nt, 3) edge ids, local edge k joins local vertices k and k+1."""
        return self._edges[2]

    @cached_property
    def adjacency(self):
        """(m, 2) pairs of triangles sharing an edge."""
        te = self.triangle_edges.ravel()
        tri = np.repeat(np.arange(self.nt), 3)
        order = np.argsort(te, kind="stable")
        te, tri = te[order], tri[order]
        same = te[1:] == te[:-1]
        return _readonly(np.column_stack([tri[:-1][same], tri[1:][same]]))

    @property
    def interior_vertices(self):
        return np.flatnonzero(~self.boundary_flags)

    def euler_characteristic(self):
        return self.nv - len(self.edges) + self.nt

    def total_area(self):
        return float(self.areas.sum())

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)


def _signed_areas(v, t):
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _edge_table(t):
    local = np.concatenate([t[:, [a, b]] for a, b in _LOCAL_EDGES])
    local.sort(axis=1)
    edges, inverse, counts = np.unique(local, axis=0, return_inverse=True,
                                       return_counts=True)
    tri_edges = inverse.reshape(3, -1).T
    return _readonly(edges), counts, _readonly(tri_edges)


def build_rectangle_mesh(nx, ny, xmin=0.0, xmax=1.0, ymin=0.0, ymax=1.0, pattern="unionjack"):
    """Structured mesh of a rectangle, two triangles per cell.

    ``pattern="diagonal"`` cuts every cell along its lower-left to upper-right
    diagonal.  ``pattern="unionjack"`` alternates that with the other diagonal
    by cell parity; for even cell counts the result carries every reflection
    symmetry of the rectangle (the full dihedral group for a square).
    """
    if nx < 1 or ny < 1:
        raise InvalidArgument("need at least one cell per direction")
    if pattern not in ("diagonal", "unionjack"):
        raise InvalidArgument(f"unknown mesh pattern {pattern!r}")
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (j * (nx + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
    slash = np.ones_like(v00, dtype=bool) if pattern == "diagonal" else ((i + j).ravel() % 2 == 0)
    first = np.where(slash[:, None], np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01]))
    second = np.where(slash[:, None], np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01]))
    return Mesh.from_arrays(verts, np.concatenate([first, second]))


def build_unit_square_mesh(n, pattern="unionjack"):
    """(n+1)^2 vertices and 2n^2 triangles on [0,1]^2.

    The default pattern is symmetric under (x,y) -> (y,x) for every n and under
    all eight symmetries of the square for even n, so degenerate continuum
    eigenvalues stay exactly degenerate.
    """
    if int(n) != n or n < 2:
        raise InvalidArgument(f"square mesh needs n >= 2 subdivisions, got {n}")
    return build_rectangle_mesh(int(n), int(n), pattern=pattern)


def refine_uniform(mesh):
    """Split every triangle into four through its edge midpoints."""
    edges, te = mesh.edges, mesh.triangle_edges
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    verts = np.vstack([mesh.vertices, mids])
    a, b, c = mesh.triangles.T
    m_ab, m_bc, m_ca = (te[:, k] + mesh.nv for k in range(3))
    tris = np.concatenate([
        np.column_stack([a, m_ab, m_ca]),
        np.column_stack([m_ab, b, m_bc]),
        np.column_stack([m_ca, m_bc, c]),
        np.column_stack([m_ab, m_bc, m_ca]),
    ])
    return Mesh.from_arrays(verts, tris)


def refine_graded(mesh, x0, depth, factor=0.5):
    """Local red-green refinement toward the point ``x0``.

    Level ``l`` (1-based) red-refines every triangle with a vertex within
    ``factor**l`` times the mesh diameter of ``x0`` (or containing it), then
    closes hanging nodes: triangles with two or more split edges become red,
    triangles with one become green bisections.
    """
    if depth < 0:
        raise InvalidArgument("depth must be non-negative")
    if not 0.0 < factor < 1.0:
        raise InvalidArgument("grading factor must lie in (0, 1)")
    x0 = np.asarray(x0, dtype=float)
    diam = np.ptp(mesh.vertices, axis=0).max()
    for level in range(1, depth + 1):
        radius = diam * factor ** level
        dist = np.linalg.norm(mesh.vertices - x0, axis=1)
        near = (dist[mesh.triangles] <= radius).any(axis=1)
        near |= _contains_point(mesh, x0)
        mesh = _red_green(mesh, near)
    return mesh


def _contains_point(mesh, p):
    v = mesh.vertices[mesh.triangles]
    out = np.zeros(mesh.nt, dtype=bool)
    for k in range(3):
        a, b = v[:, k], v[:, (k + 1) % 3]
        cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
        out |= cross < -1e-14
    return ~out


def _red_green(mesh, red):
    te = mesh.triangle_edges
    red = red.copy()
    split = np.zeros(len(mesh.edges), dtype=bool)
    while True:
        split[te[red].ravel()] = True
        promote = ~red & (split[te].sum(axis=1) >= 2)
        if not promote.any():
            break
        red |= promote
    mid_index = np.full(len(mesh.edges), -1)
    mid_index[split] = mesh.nv + np.arange(split.sum())
    e = mesh.edges[split]
    verts = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])])
    tris = []
    for t, tri in enumerate(mesh.triangles):
        a, b, c = tri
        mab, mbc, mca = mid_index[te[t]]
        if red[t]:
            tris += [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        elif mab >= 0:
            tris += [(a, mab, c), (mab, b, c)]
        elif mbc >= 0:
            tris += [(b, mbc, a), (mbc, c, a)]
        elif mca >= 0:
            tris += [(c, mca, b), (mca, a, b)]
        else:
            tris.append((a, b, c))
    return Mesh.from_arrays(verts, tris)


@dataclass(frozen=True, eq=False)
class SubmeshMap:
    child: Mesh
    parent_vertex_of: np.ndarray    # child vertex -> parent vertex
    parent_triangle_of: np.ndarray  # child triangle -> parent triangle

    def restrict(self, parent_field):
        return np.asarray(parent_field)[self.parent_vertex_of]


def extract_submesh(mesh, triangle_subset):
    """Mesh made of the selected triangles, with its own topological boundary."""
    idx = np.unique(np.asarray(list(triangle_subset) if isinstance(triangle_subset, (set, frozenset))
                               else triangle_subset, dtype=np.int64).ravel())
    if idx.size == 0:
        raise InvalidArgument("triangle subset is empty")
    if idx[0] < 0 or idx[-1] >= mesh.nt:
        raise InvalidArgument("triangle index out of range")
    tris = mesh.triangles[idx]
    parent_vertex_of, local = np.unique(tris, return_inverse=True)
    child = Mesh.from_arrays(mesh.vertices[parent_vertex_of], local.reshape(-1, 3))
    return SubmeshMap(child, _readonly(parent_vertex_of), _readonly(idx))


def extend_by_zero(sub_field, smap, parent, tol=1e-10):
    """Zero extension of a child field onto the parent mesh.

    The field must vanish (relative to ``tol`` times its max magnitude) on the
    child's boundary vertices.
    """
    f = np.asarray(sub_field, dtype=float)
    if f.shape != (smap.child.nv,):
        raise InvalidArgument("field length does not match the child mesh")
    scale = np.abs(f).max(initial=0.0)
    rim = np.abs(f[smap.child.boundary_flags]).max(initial=0.0)
    if rim > tol * scale:
        raise PreconditionViolation(f"field is {rim:.3g} on the child boundary")
    out = np.zeros(parent.nv)
    out[smap.parent_vertex_of] = f
    return out


def triangle_components(mesh, mask=None):
    """Edge-connected components of the triangles selected by ``mask``.

    Returns an (nt,) label array, -1 for unselected triangles, and the count.
    """
    mask = np.ones(mesh.nt, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    adj = mesh.adjacency
    keep = mask[adj[:, 0]] & mask[adj[:, 1]]
    a, b = adj[keep].T
    graph = coo_matrix((np.ones(len(a)), (a, b)), shape=(mesh.nt, mesh.nt))
    _, labels = connected_components(graph, directed=False)
    labels = np.where(mask, labels, -1)
    # relabel selected components densely in order of first appearance
    sel = labels[mask]
    _, first, dense = np.unique(sel, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    labels[mask] = rank[dense]
    return labels, len(first)


def triangles_in_box(mesh, xmin, xmax, ymin, ymax):
    """Indices of triangles whose centroid lies in the closed box."""
    c = mesh.centroids()
    sel = (c[:, 0] >= xmin) & (c[:, 0] <= xmax) & (c[:, 1] >= ymin) & (c[:, 1] <= ymax)
    return np.flatnonzero(sel)
