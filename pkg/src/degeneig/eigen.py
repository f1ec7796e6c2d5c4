"""Generalized symmetric eigenproblem (K + M_rho) u = lambda M u.

The lowest part of the spectrum is found by shift-invert Lanczos (ARPACK via
scipy) around a shift placed below the spectrum, followed by a Rayleigh-Ritz
clean-up so that the returned vectors are M-orthonormal to rounding.  Inside
groups of exactly degenerate eigenvalues the basis is fixed by diagonalising a
probe form, which makes the basis independent of the random start and of the
mesh resolution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu, spsolve

from .errors import ConvergenceFailure, InvalidArgument, SpanInsufficient, UndefinedRatio

DEFAULT_CLUSTER_TOL = 1e-6
GAUGE_TOL = 1e-9


@dataclass(eq=False)
class EigenDecomposition:
    lambdas: np.ndarray    # (k,) non-decreasing
    phis: np.ndarray       # (n, k) M-orthonormal columns, reduced vectors
    residuals: np.ndarray  # (k,) ||(K+M_rho) phi - lambda M phi||_2 / ||phi||_2
    rho_tag: str = "none"
    rho: np.ndarray | None = field(default=None, repr=False)
    shift: float = 0.0

    @property
    def k(self):
        return len(self.lambdas)

    @property
    def pairs(self):
        return [(float(l), self.phis[:, i]) for i, l in enumerate(self.lambdas)]

    def coefficients(self, M, u):
        return self.phis.T @ (M @ np.asarray(u, dtype=float))

    def truncated(self, k):
        return EigenDecomposition(self.lambdas[:k].copy(), self.phis[:, :k].copy(),
                                  self.residuals[:k].copy(), self.rho_tag, self.rho, self.shift)


@dataclass(frozen=True)
class SpectralCluster:
    start: int  # 0-based, inclusive
    stop: int   # exclusive
    lambda_ref: float

    @property
    def h(self):
        return self.stop - self.start

    @property
    def indices(self):
        return range(self.start, self.stop)


def _gershgorin_bound(M_rho, M):
    """Lower bound on the spectrum of (M_rho, M) for a P1 consistent mass.

    Uses |x^T M_rho x| <= G |x|^2 with G the Gershgorin radius of M_rho, and
    x^T M x >= min(diag M)/2 |x|^2 (each element mass matrix has smallest
    eigenvalue area/12, a third of its diagonal entries).
    """
    G = abs(M_rho).sum(axis=1).max()
    return -2.0 * float(G) / float(M.diagonal().min())


def _factorize(A, M, shift, attempts=6):
    for _ in range(attempts):
        try:
            lu = splu((A - shift * M).tocsc())
            return lu, shift
        except RuntimeError:
            shift -= max(1.0, abs(shift))
    raise ConvergenceFailure(f"shifted matrix stayed singular down to shift {shift:g}")


def _degenerate_groups(lams, tol):
    groups, start = [], 0
    for i in range(1, len(lams) + 1):
        if i == len(lams) or lams[i] - lams[i - 1] > tol * max(1.0, abs(lams[i - 1])):
            if i - start > 1:
                groups.append((start, i))
            start = i
    return groups


def _fix_signs(V, ref=None):
    """Make each column pair positively with ``ref`` (largest entry positive without one)."""
    if ref is not None:
        s = np.sign(ref @ V)
    else:
        s = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def solve_eigs(K, M, M_rho=None, k=6, tol=1e-8, seed=0, lower_bound=None, probe=None,
               rho_tag="none", guard=3, maxiter=None, sign_ref=None):
    """k algebraically smallest eigenpairs of (K + M_rho, M).

    ``tol`` bounds each residual relative to max(1, |lambda|).  ``guard``
    extra pairs are iterated alongside so clusters straddling index k converge
    together.  ``lower_bound`` is a known bound below the spectrum; when
    missing it is derived from a Gershgorin estimate.  ``probe`` (a symmetric
    matrix) fixes the basis inside degenerate groups and ``sign_ref`` (a
    vector) fixes signs.
    """
    A = K if M_rho is None else (K + M_rho).tocsr()
    n = A.shape[0]
    if M.shape != A.shape:
        raise InvalidArgument("K and M dimensions differ")
    if not 1 <= k < n:
        raise InvalidArgument(f"need 1 <= k < {n}, got {k}")
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    nev = min(k + guard, n - 1)
    if lower_bound is None:
        lower_bound = 0.0 if M_rho is None else _gershgorin_bound(M_rho, M)
    shift = lower_bound - max(1.0, 0.05 * abs(lower_bound))
    lu, shift = _factorize(A, M, shift)
    op = LinearOperator((n, n), matvec=lu.solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    ncv = min(n, max(2 * nev + 1, nev + 20))
    try:
        _, V = eigsh(A, k=nev, M=M, sigma=shift, which="LM", OPinv=op, v0=v0,
                     ncv=ncv, tol=0, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        V = exc.eigenvectors
        if V is None or V.shape[1] < k:
            raise ConvergenceFailure("ARPACK did not converge", residuals=None) from exc

    # Rayleigh-Ritz on the converged subspace
    Ah = V.T @ (A @ V)
    Mh = V.T @ (M @ V)
    lams, C = sla.eigh((Ah + Ah.T) / 2, (Mh + Mh.T) / 2)
    V = V @ C

    if probe is not None:
        for a, b in _degenerate_groups(lams, GAUGE_TOL):
            Vg = V[:, a:b]
            P = Vg.T @ (probe @ Vg)
            _, Q = np.linalg.eigh((P + P.T) / 2)
            V[:, a:b] = Vg @ Q

    V = _fix_signs(V[:, :k], None if sign_ref is None else M @ sign_ref)
    lams = lams[:k]
    R = A @ V - (M @ V) * lams
    res = np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)
    if np.any(res > tol * np.maximum(1.0, np.abs(lams))):
        raise ConvergenceFailure(f"residuals above tolerance: max {res.max():.3g}", residuals=res)
    return EigenDecomposition(lams, V, res, rho_tag, None, shift)


def rayleigh_quotient(K_eff, M, u):
    u = np.asarray(u, dtype=float)
    den = u @ (M @ u)
    if den <= 0.0:
        raise UndefinedRatio("zero vector has no Rayleigh quotient")
    return float(u @ (K_eff @ u) / den)


def projected_max(K_eff, M, V):
    """Largest Rayleigh quotient over span(V): top eigenvalue of the projected pencil."""
    Kh = V.T @ (K_eff @ V)
    Mh = V.T @ (M @ V)
    return float(sla.eigh((Kh + Kh.T) / 2, (Mh + Mh.T) / 2, eigvals_only=True)[-1])


@dataclass
class MinMaxReport:
    i: int
    lambda_i: float
    achieved: float
    achieved_ok: bool
    min_trial: float
    all_trials_ge: bool
    failures: list


def verify_minmax(decomp, K_eff, M, i, trials=200, seed=0, rel_tol=1e-6, span_tol=1e-8):
    """Min-max check for the i-th eigenvalue (1-based).

    Every random i-dimensional subspace must have max Rayleigh quotient
    >= lambda_i (1 - rel_tol), and span(phi_1..phi_i) must attain lambda_i to
    ``span_tol`` relative.  Subspaces are drawn from three families: fully
    random, random mixtures of the first i+2 eigenvectors plus noise, and
    small perturbations of the optimal span.
    """
    if not 1 <= i <= decomp.k - 1:
        raise InvalidArgument(f"need 1 <= i <= k-1 = {decomp.k - 1}")
    lam = float(decomp.lambdas[i - 1])
    achieved = projected_max(K_eff, M, decomp.phis[:, :i])
    rng = np.random.default_rng(seed)
    n = decomp.phis.shape[0]
    m = min(i + 2, decomp.k)
    values, failures = [], []
    for t in range(trials):
        family = t % 3
        if family == 0:
            V = rng.standard_normal((n, i))
        elif family == 1:
            V = decomp.phis[:, :m] @ rng.standard_normal((m, i))
            V += 10 ** rng.uniform(-6, 0) * rng.standard_normal((n, i)) / np.sqrt(n)
        else:
            V = decomp.phis[:, :i] + 10 ** rng.uniform(-5, -1) * rng.standard_normal((n, i)) / np.sqrt(n)
        q = projected_max(K_eff, M, V)
        values.append(q)
        if q < lam * (1.0 - rel_tol):
            failures.append({"trial": t, "value": q})
    return MinMaxReport(i, lam, achieved, abs(achieved - lam) <= span_tol * abs(lam),
                        float(min(values)) if values else np.inf, not failures, failures)


def cluster_eigenvalues(decomp, rel_tol=DEFAULT_CLUSTER_TOL):
    """Greedy contiguous grouping of numerically coincident eigenvalues."""
    if not 0.0 < rel_tol <= 1e-2:
        raise InvalidArgument("rel_tol must lie in (0, 1e-2]")
    lams = np.asarray(getattr(decomp, "lambdas", decomp), dtype=float)
    clusters, start = [], 0
    for j in range(1, len(lams) + 1):
        if j == len(lams) or abs(lams[j] - lams[j - 1]) > rel_tol * max(1.0, abs(lams[j - 1])):
            clusters.append(SpectralCluster(start, j, float(lams[start:j].mean())))
            start = j
    return clusters


def cluster_ids(decomp, rel_tol=DEFAULT_CLUSTER_TOL):
    ids = np.empty(decomp.k if hasattr(decomp, "k") else len(decomp), dtype=int)
    for c_id, c in enumerate(cluster_eigenvalues(decomp, rel_tol)):
        ids[c.start:c.stop] = c_id
    return ids


def _check_span(decomp, M, f, c, span_tol):
    rest = f - decomp.phis @ c
    norm_f = np.sqrt(max(f @ (M @ f), 0.0))
    if np.sqrt(max(rest @ (M @ rest), 0.0)) > span_tol * norm_f:
        raise SpanInsufficient("vector has components outside the computed eigenbasis")


def projector_apply(decomp, cluster, M, f):
    """M-orthogonal projection onto the cluster eigenspace."""
    P = decomp.phis[:, cluster.start:cluster.stop]
    return P @ (P.T @ (M @ np.asarray(f, dtype=float)))


def pseudo_inverse_apply(decomp, cluster, M, f, span_tol=1e-6):
    """-sum over i outside the cluster of (lambda_i - lambda_ref)^-1 (f, phi_i)_M phi_i.

    Only defined on the computed span; the operator inverts the shifted
    operator off the cluster eigenspace and annihilates the eigenspace.
    """
    f = np.asarray(f, dtype=float)
    c = decomp.phis.T @ (M @ f)
    _check_span(decomp, M, f, c, span_tol)
    outside = np.ones(decomp.k, dtype=bool)
    outside[cluster.start:cluster.stop] = False
    coef = np.zeros(decomp.k)
    coef[outside] = -c[outside] / (decomp.lambdas[outside] - cluster.lambda_ref)
    return decomp.phis @ coef


def shifted_operator_apply(K_eff, M, lambda_ref, f):
    """(A + lambda_ref) f with A = -M^-1 K_eff, the discrete counterpart of div(w grad) - rho.

    With this sign the pseudo-inverse satisfies Q (A + lambda_ref) = id - projector.
    """
    f = np.asarray(f, dtype=float)
    rhs = lambda_ref * (M @ f) - K_eff @ f
    return spsolve(sp.csc_matrix(M), rhs)
