"""P1 assembly of the weighted stiffness, mass and potential forms.

All matrices are scipy CSR matrices, exactly symmetric.  Dirichlet vertices
are eliminated: the reduced system lives on interior vertices only and
``AssembledSystem.expand`` puts zeros back on the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, SpanInsufficient
from .quadrature import build_quadrature, p1_gradients
from .weights import weight_integrals

_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _scatter(mesh, element_mats):
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    A = sp.coo_matrix((element_mats.ravel(), (rows, cols)), shape=(mesh.nv, mesh.nv)).tocsr()
    A.sum_duplicates()
    A = (A + A.T) * 0.5
    A.sort_indices()
    return A


def _reduce(A, interior):
    return A[interior][:, interior].tocsr() if interior is not None else A


def _interior_or_none(mesh, reduced):
    return mesh.interior_vertices if reduced else None


def assemble_stiffness(mesh, spec, reduced=True, quad=None):
    """Entries sum_T int_T w grad(phi_i) . grad(phi_j)."""
    G = p1_gradients(mesh)
    wT = weight_integrals(mesh, spec, quad)
    Ke = wT[:, None, None] * np.einsum("tid,tjd->tij", G, G)
    return _reduce(_scatter(mesh, Ke), _interior_or_none(mesh, reduced))


def assemble_mass(mesh, reduced=True):
    """Consistent P1 mass matrix."""
    Me = mesh.areas[:, None, None] * _MASS_REF[None]
    return _reduce(_scatter(mesh, Me), _interior_or_none(mesh, reduced))


def _potential_values(mesh, rho):
    r = np.asarray(rho, dtype=float)
    if r.ndim == 0:
        r = np.full(mesh.nv, float(r))
    if r.shape != (mesh.nv,):
        raise InvalidArgument("potential must be a constant or one value per vertex")
    if not np.all(np.isfinite(r)):
        raise InvalidArgument("potential has non-finite values")
    return r


def assemble_potential(mesh, rho, reduced=True):
    """Entries int rho phi_i phi_j with rho the P1 interpolant of vertex values.

    Exact integration: for a triangle of area A,
    int rho phi_i phi_j = A/60 (1 + delta_ij) (sum(rho) + rho_i + rho_j).
    """
    r = _potential_values(mesh, rho)[mesh.triangles]
    s = r.sum(axis=1)
    Pe = (s[:, None, None] + r[:, :, None] + r[:, None, :]) * (1.0 + np.eye(3))[None]
    Pe *= (mesh.areas / 60.0)[:, None, None]
    return _reduce(_scatter(mesh, Pe), _interior_or_none(mesh, reduced))


def weighted_h1_norm(K, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (K.shape[0],):
        raise InvalidArgument("dimension mismatch")
    return float(np.sqrt(max(u @ (K @ u), 0.0)))


def spectral_h2_norm(decomp, M, u, span_tol=1e-6):
    """(sum_i c_i^2 lambda_i^2)^(1/2) with c_i = u^T M phi_i, truncated to the computed span."""
    u = np.asarray(u, dtype=float)
    c = decomp.coefficients(M, u)
    rest = u - decomp.phis @ c
    norm_u = np.sqrt(max(u @ (M @ u), 0.0))
    if np.sqrt(max(rest @ (M @ rest), 0.0)) > span_tol * norm_u:
        raise SpanInsufficient("vector has components outside the computed eigenbasis")
    return float(np.sqrt(np.sum((c * decomp.lambdas) ** 2)))


@dataclass(eq=False)
class AssembledSystem:
    """Reduced weighted stiffness and mass matrices of one (mesh, weight) pair.

    Also serves as the system factory of the perturbation routines: it builds
    potential matrices for arbitrary vertex potentials and solves the pencil
    (K + M_rho) u = lambda M u.
    """
    mesh: object
    spec: object
    K: sp.csr_matrix
    M: sp.csr_matrix
    interior: np.ndarray
    _probe: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.interior)

    def reduce(self, full):
        return np.asarray(full, dtype=float)[self.interior]

    def expand(self, reduced):
        out = np.zeros(self.mesh.nv)
        out[self.interior] = reduced
        return out

    def potential(self, rho):
        return assemble_potential(self.mesh, rho)

    def gauge_probe(self):
        """Potential matrix of x^2; fixes a canonical basis inside exact degeneracies."""
        if self._probe is None:
            self._probe = assemble_potential(self.mesh, self.mesh.vertices[:, 0] ** 2)
        return self._probe

    def sign_reference(self):
        """Smooth field exp(x + sqrt(2) y); overlaps every separable sine mode."""
        v = self.mesh.vertices[self.interior]
        return np.exp(v[:, 0] + np.sqrt(2.0) * v[:, 1])

    def solve(self, rho=None, k=6, tol=1e-8, seed=0, rho_tag=None):
        from .eigen import solve_eigs
        if rho is None:
            M_rho, lower, tag = None, 0.0, rho_tag or "none"
        else:
            r = _potential_values(self.mesh, rho)
            M_rho, lower = self.potential(r), float(r.min())
            tag = rho_tag or "field"
        d = solve_eigs(self.K, self.M, M_rho, k=k, tol=tol, seed=seed,
                       lower_bound=lower, probe=self.gauge_probe(), rho_tag=tag,
                       sign_ref=self.sign_reference())
        d.rho = None if rho is None else r
        return d

    def effective_stiffness(self, rho=None):
        return self.K if rho is None else (self.K + self.potential(rho)).tocsr()


def assemble_system(mesh, spec):
    quad = build_quadrature(mesh, spec.singular_point)
    return AssembledSystem(mesh, spec, assemble_stiffness(mesh, spec, quad=quad),
                           assemble_mass(mesh), mesh.interior_vertices)
