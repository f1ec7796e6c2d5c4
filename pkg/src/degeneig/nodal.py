"""Nodal domains of discrete eigenfunctions.

A triangle gets the sign of the mean of its three vertex values when that
mean exceeds ``tol * max|field|`` in magnitude and is otherwise put in the
zero class.  Nodal domains are the edge-connected components of equally
signed triangles.  Components smaller than ``micro_factor`` median triangle
areas are tolerance artefacts along nodal lines; they are reported but not
counted in the filtered count.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_system
from .errors import DomainTooCoarse, InvalidArgument, InvalidSubdomain, NoDomains
from .mesh import extend_by_zero, extract_submesh, triangle_components

DEFAULT_NODAL_TOL = 1e-8
MICRO_FACTOR = 3.0
MIN_DOMAIN_TRIANGLES = 8


@dataclass
class NodalDomain:
    sign: int
    triangles: np.ndarray
    area: float
    micro: bool = False


@dataclass
class NodalDecomposition:
    eigen_index: int | None
    domains: list
    zero_triangles: np.ndarray
    tol_used: float
    labels: np.ndarray = field(repr=False)  # per-triangle domain id, -1 for the zero class

    @property
    def count(self):
        return len(self.domains)

    @property
    def filtered_count(self):
        return sum(not d.micro for d in self.domains)

    @property
    def micro_count(self):
        return sum(d.micro for d in self.domains)

    def mask(self, nt=None):
        """Per-triangle sign mask in {-1, 0, +1}."""
        out = np.zeros(len(self.labels), dtype=int)
        for d in self.domains:
            out[d.triangles] = d.sign
        return out


def nodal_decomposition(mesh, field, tol=DEFAULT_NODAL_TOL, eigen_index=None,
                        micro_factor=MICRO_FACTOR):
    if not tol > 0:
        raise InvalidArgument("nodal tolerance must be positive")
    f = np.asarray(field, dtype=float)
    if f.shape != (mesh.nv,):
        raise InvalidArgument("field must hold one value per mesh vertex")
    scale = np.abs(f).max(initial=0.0)
    if scale == 0.0:
        raise NoDomains("identically zero field has no nodal domains")
    mean = f[mesh.triangles].mean(axis=1)
    cls = np.where(np.abs(mean) > tol * scale, np.sign(mean), 0).astype(int)
    small = micro_factor * np.median(mesh.areas)
    labels = np.full(mesh.nt, -1)
    domains = []
    for s in (1, -1):
        lab, n = triangle_components(mesh, cls == s)
        for c in range(n):
            tris = np.flatnonzero(lab == c)
            area = float(mesh.areas[tris].sum())
            labels[tris] = len(domains)
            domains.append(NodalDomain(s, tris, area, area < small))
    # order domains by first triangle so ids are stable
    order = np.argsort([d.triangles[0] for d in domains])
    remap = np.empty(len(domains), dtype=int)
    remap[order] = np.arange(len(domains))
    labels = np.where(labels >= 0, remap[labels], -1)
    domains = [domains[i] for i in order]
    return NodalDecomposition(eigen_index, domains, np.flatnonzero(cls == 0), tol, labels)


@dataclass
class CourantEntry:
    index: int  # 1-based
    count: int
    filtered_count: int
    micro_count: int
    areas: list
    bound: int

    @property
    def passed(self):
        return self.filtered_count <= self.bound


def courant_check(decomp, system, tol=DEFAULT_NODAL_TOL):
    """Nodal count of every computed eigenfunction against its index."""
    out = []
    for i in range(decomp.k):
        nd = nodal_decomposition(system.mesh, system.expand(decomp.phis[:, i]), tol, i + 1)
        out.append(CourantEntry(i + 1, nd.count, nd.filtered_count, nd.micro_count,
                                [d.area for d in nd.domains], i + 1))
    return out


@dataclass
class NodalEigenvalueReport:
    index: int
    domain_id: int
    lambda1_sub: float
    lambda_i: float
    rel_gap: float
    n_triangles: int


def nodal_domain_eigenvalue(system, decomp, i, domain_id, tol=DEFAULT_NODAL_TOL, seed=0):
    """First Dirichlet eigenvalue of one nodal domain of phi_i, against lambda_i.

    The domain's triangles are cut out as a submesh whose own rim carries
    the Dirichlet condition.
    """
    mesh = system.mesh
    nd = nodal_decomposition(mesh, system.expand(decomp.phis[:, i - 1]), tol, i)
    if not 0 <= domain_id < nd.count:
        raise InvalidArgument(f"phi_{i} has {nd.count} nodal domains, no id {domain_id}")
    tris = nd.domains[domain_id].triangles
    if len(tris) < MIN_DOMAIN_TRIANGLES:
        raise DomainTooCoarse(f"nodal domain has only {len(tris)} triangles")
    sub = extract_submesh(mesh, tris)
    child = assemble_system(sub.child, system.spec)
    if child.n < 2:
        raise DomainTooCoarse("nodal domain has fewer than two interior vertices")
    lam_sub = float(child.solve(k=1, seed=seed).lambdas[0])
    lam_i = float(decomp.lambdas[i - 1])
    return NodalEigenvalueReport(i, domain_id, lam_sub, lam_i, abs(lam_sub - lam_i) / abs(lam_i), len(tris))


@dataclass
class MonotonicityReport:
    lambda_parent: np.ndarray
    lambda_child: np.ndarray
    extension_rq: float
    extension_rel_error: float
    passed: bool


def domain_monotonicity_check(parent, subset, spec, k=5, seed=0, rel_tol=1e-6,
                              parent_system=None, extension_tol=1e-10):
    """lambda_i(parent) <= lambda_i(child) for i = 1..k, child a proper connected submesh.

    Also checks that the zero extension of the child's first eigenfunction has
    the same Rayleigh quotient on the parent.
    """
    idx = np.unique(np.asarray(subset, dtype=np.int64))
    if idx.size == 0 or idx.size >= parent.nt:
        raise InvalidSubdomain("subset must be a proper nonempty subset of the triangles")
    mask = np.zeros(parent.nt, dtype=bool)
    mask[idx] = True
    _, ncomp = triangle_components(parent, mask)
    if ncomp != 1:
        raise InvalidSubdomain(f"subset induces {ncomp} components")
    psys = parent_system or assemble_system(parent, spec)
    sub = extract_submesh(parent, idx)
    csys = assemble_system(sub.child, spec)
    lp = psys.solve(k=k, seed=seed).lambdas
    cd = csys.solve(k=k, seed=seed)
    lc = cd.lambdas
    ext = psys.reduce(extend_by_zero(csys.expand(cd.phis[:, 0]), sub, parent))
    rq = float(ext @ (psys.K @ ext) / (ext @ (psys.M @ ext)))
    rel = abs(rq - lc[0]) / abs(lc[0])
    ok = bool(np.all(lp <= lc + rel_tol * np.abs(lc))) and rel <= extension_tol
    return MonotonicityReport(lp, lc, rq, rel, ok)
