"""Eigenvalues as functions of the potential.

Convention throughout: (K + M_rho) u = lambda M u.  Under it the first-order
slopes of a cluster perturbed by rho + tau*sigma are the eigenvalues of
S = [int sigma u_j u_k] over an M-orthonormal cluster basis.

The routines take an :class:`~degeneig.assembly.AssembledSystem`, which
builds potential matrices and solves the pencil for any vertex potential.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .eigen import DEFAULT_CLUSTER_TOL, SpectralCluster, cluster_eigenvalues
from .errors import (ClusterTrackingFailure, InvalidArgument, PreconditionViolation,
                     SimplificationFailure, SplittingFailure)

GUARD = 3
MAX_HALVINGS = 20


@dataclass(frozen=True)
class PotentialField:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise InvalidArgument("potential values must be a vertex array")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("potential has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def sup_norm(self):
        return float(np.abs(self.values).max(initial=0.0))

    @classmethod
    def constant(cls, mesh, c):
        return cls(np.full(mesh.nv, float(c)))

    @classmethod
    def zero(cls, mesh):
        return cls(np.zeros(mesh.nv))

    def __add__(self, other):
        return PotentialField(self.values + _values(other, len(self.values)))

    def __sub__(self, other):
        return PotentialField(self.values - _values(other, len(self.values)))

    def scaled(self, t):
        return PotentialField(t * self.values)


def _values(rho, nv):
    if isinstance(rho, PotentialField):
        v = rho.values
    else:
        v = np.asarray(rho if rho is not None else 0.0, dtype=float)
        if v.ndim == 0:
            v = np.full(nv, float(v))
    if v.shape != (nv,):
        raise InvalidArgument("potential must hold one value per mesh vertex")
    return v


def as_potential(system, rho):
    return rho if isinstance(rho, PotentialField) else PotentialField(_values(rho, system.mesh.nv))


def _rel(lam):
    return max(1.0, abs(lam))


# ---------------------------------------------------------------- Lipschitz

@dataclass
class LipschitzReport:
    n: int
    lambdas1: np.ndarray
    lambdas2: np.ndarray
    sup_diff: float
    max_violation: float  # max_i |dlambda_i| - bound, <= 0 on pass
    passed: bool


def lipschitz_check(system, rho1, rho2, n, seed=0, tol=1e-10):
    """Compare the first n eigenvalues of two potentials against their sup distance."""
    r1, r2 = as_potential(system, rho1), as_potential(system, rho2)
    l1 = system.solve(r1.values, k=n, tol=tol, seed=seed).lambdas
    l2 = system.solve(r2.values, k=n, tol=tol, seed=seed).lambdas
    d = (r1 - r2).sup_norm
    bound = d + 1e-8 * (1.0 + d)
    viol = float(np.max(np.abs(l1 - l2)) - bound)
    return LipschitzReport(n, l1, l2, d, viol, viol <= 0.0)


def random_potential_pairs(mesh, count, rng, max_diff=10.0):
    """Seeded pairs (rho1, rho2) with ||rho1 - rho2||_inf <= max_diff.

    Mixes rough vertex noise with smooth low modes.
    """
    v = mesh.vertices
    lo, span = v.min(axis=0), np.ptp(v, axis=0)
    s = (v - lo) / span
    out = []
    for i in range(count):
        pair = []
        for _ in range(2):
            if i % 2 == 0:
                f = rng.uniform(-1.0, 1.0, mesh.nv)
            else:
                p, q = rng.integers(0, 4, 2)
                f = np.cos(p * np.pi * s[:, 0] + rng.uniform(0, np.pi)) * np.cos(q * np.pi * s[:, 1])
            pair.append(0.5 * max_diff * f + rng.uniform(-20, 20))
        # keep the difference inside the budget, the common offset is free
        diff = pair[1] - pair[0]
        excess = np.abs(diff).max() / max_diff
        if excess > 1.0:
            pair[1] = pair[0] + diff / excess
        out.append((PotentialField(pair[0]), PotentialField(pair[1])))
    return out


# ------------------------------------------------------- interaction matrix

def interaction_matrix(system, decomp, cluster, sigma):
    """S[j, k] = phi_j^T M_sigma phi_k over the cluster basis."""
    if cluster.stop > decomp.k or cluster.h < 1:
        raise InvalidArgument("cluster does not fit the decomposition")
    if decomp.phis.shape[0] != system.n:
        raise InvalidArgument("decomposition and system dimensions differ")
    P = decomp.phis[:, cluster.start:cluster.stop]
    Ms = system.potential(_values(sigma, system.mesh.nv))
    S = P.T @ (Ms @ P)
    return 0.5 * (S + S.T)


def product_potential(system, decomp, j, k):
    """Vertexwise u_j * u_k of two computed eigenvectors (0-based indices)."""
    return PotentialField(system.expand(decomp.phis[:, j]) * system.expand(decomp.phis[:, k]))


# ------------------------------------------------------------ cluster window

def isolation_interval(lambdas, cluster, clusters):
    """Interval around a cluster bounded by midpoints to its neighbour clusters."""
    pos = [c.start for c in clusters].index(cluster.start)
    lo = -np.inf
    if pos > 0:
        lo = 0.5 * (lambdas[clusters[pos - 1].stop - 1] + lambdas[cluster.start])
    if pos + 1 >= len(clusters):
        raise ClusterTrackingFailure("no eigenvalue above the cluster; solve more pairs")
    hi = 0.5 * (lambdas[cluster.stop - 1] + lambdas[clusters[pos + 1].start])
    return lo, hi


def _base(system, rho, cluster, seed, tol, cluster_tol, base=None):
    """Decomposition at rho covering the cluster and its upper neighbour."""
    k = cluster.stop + GUARD
    if base is None or base.k < k:
        base = system.solve(rho.values, k=min(k, system.n - 1), tol=tol, seed=seed)
    clusters = cluster_eigenvalues(base, cluster_tol)
    match = [c for c in clusters if c.start == cluster.start]
    if not match or match[0].stop != cluster.stop:
        raise InvalidArgument("cluster does not match the spectrum at this potential")
    return base, clusters, match[0]


def _window_solve(system, rho_vals, window, k, seed, tol):
    d = system.solve(rho_vals, k=k, tol=tol, seed=seed)
    inside = np.flatnonzero((d.lambdas > window[0]) & (d.lambdas < window[1]))
    return d, inside


@dataclass
class RatesReport:
    taus: np.ndarray
    slopes_at_tau: np.ndarray  # (len(taus), h)
    predicted: np.ndarray      # sorted eigenvalues of S
    errors: np.ndarray         # max_j |slope_j - predicted_j| per tau
    orders: np.ndarray         # consecutive log-ratio estimates
    order_estimate: float      # median of ``orders``; nan when errors are at rounding level
    exact: bool
    S: np.ndarray = field(repr=False)


def first_order_rates(system, rho, cluster, sigma, taus, seed=0, tol=1e-11,
                      cluster_tol=DEFAULT_CLUSTER_TOL, base=None):
    """Finite-difference slopes of the cluster branches against the eigenvalues of S."""
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) < 1 or np.any(np.diff(taus) >= 0) or taus[-1] < 1e-6:
        raise InvalidArgument("taus must be strictly decreasing and >= 1e-6")
    rho = as_potential(system, rho)
    sig = as_potential(system, sigma)
    base, clusters, cluster = _base(system, rho, cluster, seed, tol, cluster_tol, base)
    window = isolation_interval(base.lambdas, cluster, clusters)
    S = interaction_matrix(system, base, cluster, sig)
    mu, W = np.linalg.eigh(S)
    targets = base.phis[:, cluster.start:cluster.stop] @ W  # limiting branch directions
    lam0 = cluster.lambda_ref
    h = cluster.h
    slopes = np.empty((len(taus), h))
    for t, tau in enumerate(taus):
        d, inside = _window_solve(system, rho.values + tau * sig.values, window, base.k, seed, tol)
        if len(inside) != h:
            raise ClusterTrackingFailure(
                f"{len(inside)} eigenvalues in the isolation interval at tau={tau:g}, expected {h}")
        overlap = np.abs(targets.T @ (system.M @ d.phis[:, inside]))
        rows, cols = linear_sum_assignment(-overlap)
        if np.all(overlap[rows, cols] > 0.5):
            lam = d.lambdas[inside][cols[np.argsort(rows)]]
        else:
            lam = d.lambdas[inside]  # ambiguous pairing: sorted order
        slopes[t] = (lam - lam0) / tau
    errors = np.max(np.abs(slopes - mu[None, :]), axis=1)
    floor = 1e-9 * _rel(lam0) / taus
    exact = bool(np.all(errors <= floor))
    orders = np.array([np.log(errors[i] / errors[i + 1]) / np.log(taus[i] / taus[i + 1])
                       for i in range(len(taus) - 1)
                       if errors[i + 1] > floor[i + 1] and errors[i] > floor[i]])
    est = float(np.median(orders)) if len(orders) else float("nan")
    return RatesReport(taus, slopes, mu, errors, orders, est, exact, S)


# ---------------------------------------------------------------- splitting

@dataclass
class SplittingReport:
    cluster: SpectralCluster
    sigma: PotentialField
    S_matrix: np.ndarray
    predicted_slopes: np.ndarray
    tau: float
    lambdas_before: np.ndarray
    lambdas_after: np.ndarray
    gap_after: float  # min within-cluster gap after the step
    eps_budget: float
    perturbation_norm: float  # ||tau sigma||_inf
    rho_after: PotentialField | None = field(default=None, repr=False)
    halvings: int = 0
    count_in_window: int = 0

    def to_dict(self):
        return {
            "cluster": [self.cluster.start + 1, self.cluster.stop],
            "h": self.cluster.h,
            "tau": self.tau,
            "sigma_sup_norm": self.sigma.sup_norm,
            "S_matrix": self.S_matrix.tolist(),
            "predicted_slopes": self.predicted_slopes.tolist(),
            "lambdas_before": self.lambdas_before.tolist(),
            "lambdas_after": self.lambdas_after.tolist(),
            "gap_after": self.gap_after,
            "eps_budget": self.eps_budget,
            "perturbation_norm": self.perturbation_norm,
            "halvings": self.halvings,
            "count_in_window": self.count_in_window,
        }


def split_cluster(system, rho, cluster, eps, seed=0, tol=1e-10,
                  cluster_tol=DEFAULT_CLUSTER_TOL, base=None):
    """Perturb rho by tau * u_a u_b so that a multiple cluster separates.

    u_a, u_b are the first two cluster members.  tau starts at
    eps / (2 ||u_a u_b||_inf) and is halved until the isolation interval holds
    exactly h eigenvalues and at least two of them are apart by more than the
    cluster tolerance.
    """
    if cluster.h < 2:
        raise PreconditionViolation("cluster is simple; nothing to split")
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    rho = as_potential(system, rho)
    base, clusters, cluster = _base(system, rho, cluster, seed, tol, cluster_tol, base)
    window = isolation_interval(base.lambdas, cluster, clusters)
    sigma = product_potential(system, base, cluster.start, cluster.start + 1)
    snorm = sigma.sup_norm
    if snorm == 0.0:
        raise SplittingFailure("u_a u_b vanishes identically", None)
    S = interaction_matrix(system, base, cluster, sigma)
    before = base.lambdas[cluster.start:cluster.stop].copy()
    tau = 0.5 * eps / snorm
    report = None
    for halving in range(MAX_HALVINGS + 1):
        d, inside = _window_solve(system, rho.values + tau * sigma.values, window, base.k, seed, tol)
        after = d.lambdas[inside]
        gaps = np.diff(after)
        report = SplittingReport(cluster, sigma, S, np.linalg.eigvalsh(S), tau, before, after,
                                 float(gaps.min()) if len(gaps) else 0.0, eps, tau * snorm,
                                 PotentialField(rho.values + tau * sigma.values), halving, len(inside))
        if len(inside) == cluster.h and np.any(gaps > cluster_tol * _rel(cluster.lambda_ref)):
            return report
        tau *= 0.5
    raise SplittingFailure("no admissible tau found", report)


@dataclass
class SimplificationTrace:
    steps: list
    rho_initial: PotentialField
    rho_final: PotentialField
    n: int
    eps: float
    min_gap_final: float
    lambdas_final: np.ndarray

    @property
    def total_perturbation(self):
        return float(sum(s.perturbation_norm for s in self.steps))

    def to_dict(self):
        return {
            "n": self.n,
            "eps": self.eps,
            "steps": [s.to_dict() for s in self.steps],
            "total_perturbation": self.total_perturbation,
            "rho_final_distance": (self.rho_final - self.rho_initial).sup_norm,
            "min_gap_final": self.min_gap_final,
            "lambdas_final": self.lambdas_final.tolist(),
        }


def _leading_clusters(system, rho_vals, n, seed, tol, cluster_tol):
    """Decomposition whose last cluster lies beyond index n, with its clusters."""
    k = n + GUARD
    while True:
        k = min(k, system.n - 1)
        d = system.solve(rho_vals, k=k, tol=tol, seed=seed)
        clusters = cluster_eigenvalues(d, cluster_tol)
        if clusters[-1].start > n or k == system.n - 1:
            return d, [c for c in clusters if c.start < n]
        k += 2 * GUARD


def simplify_spectrum(system, rho, n, eps, seed=0, tol=1e-10, cluster_tol=DEFAULT_CLUSTER_TOL):
    """Split every multiple cluster touching the first n eigenvalues.

    Clusters straddling index n count too, so on exit lambda_1 < ... < lambda_n
    < lambda_(n+1), all gaps above the cluster tolerance.  Each step may spend
    eps / h_total with h_total the initial excess multiplicity.
    """
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    rho0 = as_potential(system, rho)
    cur = rho0
    d, clusters = _leading_clusters(system, cur.values, n, seed, tol, cluster_tol)
    h_total = sum(c.h - 1 for c in clusters)
    steps = []
    while True:
        multiple = [c for c in clusters if c.h > 1]
        if not multiple:
            break
        if len(steps) >= h_total:
            raise SimplificationFailure(f"still multiple after {h_total} steps",
                                        SimplificationTrace(steps, rho0, cur, n, eps, 0.0, d.lambdas))
        rep = split_cluster(system, cur, multiple[0], eps / h_total, seed=seed, tol=tol,
                            cluster_tol=cluster_tol, base=d)
        steps.append(rep)
        cur = rep.rho_after
        d, clusters = _leading_clusters(system, cur.values, n, seed, tol, cluster_tol)
    lam = d.lambdas[:n + 1]
    gap = float(np.diff(lam).min()) if len(lam) > 1 else float("inf")
    return SimplificationTrace(steps, rho0, cur, n, eps, gap, lam.copy())


# ----------------------------------------------------------------- openness

def openness_radius(decomp, n, cluster_tol=DEFAULT_CLUSTER_TOL):
    """Half the smallest gap among lambda_1 .. lambda_(n+1)."""
    if n < 1 or decomp.k < n + 1:
        raise InvalidArgument("need at least n+1 computed eigenvalues")
    lam = decomp.lambdas[:n + 1]
    gaps = np.diff(lam)
    if np.any(gaps <= cluster_tol * np.maximum(1.0, np.abs(lam[:-1]))):
        raise PreconditionViolation("first n eigenvalues are not simple")
    return 0.5 * float(gaps.min())


@dataclass
class OpennessReport:
    radius: float
    samples: int
    sup_norms: list
    min_gaps: list
    violations: int
    lipschitz_ok: bool

    @property
    def passed(self):
        return self.violations == 0 and self.lipschitz_ok


def validate_openness(system, rho, n, samples=10, seed=0, radius=None, tol=1e-10,
                      cluster_tol=DEFAULT_CLUSTER_TOL, shrink=0.999):
    """Draw potentials strictly inside the radius ball and recheck simplicity."""
    rho = as_potential(system, rho)
    base = system.solve(rho.values, k=n + 1, tol=tol, seed=seed)
    r = openness_radius(base, n, cluster_tol) if radius is None else float(radius)
    rng = np.random.default_rng(seed)
    norms, gaps, bad, lip_ok = [], [], 0, True
    for i in range(samples):
        f = rng.uniform(-1.0, 1.0, system.mesh.nv)
        if i % 2:
            f = np.sign(f)  # extreme corners of the ball
        pert = shrink * r * f / np.abs(f).max()
        other = PotentialField(rho.values + pert)
        d = system.solve(other.values, k=n + 1, tol=tol, seed=seed)
        lam = d.lambdas
        g = np.diff(lam)
        norms.append(float(np.abs(pert).max()))
        gaps.append(float(g.min()))
        if np.any(g <= cluster_tol * np.maximum(1.0, np.abs(lam[:-1]))):
            bad += 1
        dist = norms[-1]
        if np.max(np.abs(lam - base.lambdas)) > dist + 1e-8 * (1 + dist):
            lip_ok = False
    return OpennessReport(r, samples, norms, gaps, bad, lip_ok)
