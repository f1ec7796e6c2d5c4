"""Weight functions and weighted inequality diagnostics.

Two weight kinds are supported: a positive constant, and the point-degenerate
power weight ``|x - x0|**alpha`` with ``0 < alpha < 2`` and ``x0`` on the
boundary.  The second one is an A2 weight; :func:`estimate_a2_constant` gives
numerical evidence of that by a dyadic scan.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, PreconditionViolation, UndefinedRatio
from .quadrature import build_quadrature, p1_gradients

CONSTANT = "constant"
POINT = "point-degenerate"


@dataclass(frozen=True)
class WeightSpec:
    kind: str = CONSTANT
    alpha: float | None = None
    x0: tuple | None = None
    c0: float | None = 1.0

    def __post_init__(self):
        if self.kind == CONSTANT:
            if self.c0 is None or not self.c0 > 0 or not np.isfinite(self.c0):
                raise InvalidArgument("constant weight needs c0 > 0")
        elif self.kind == POINT:
            if self.alpha is None or not 0.0 < self.alpha < 2.0:
                raise InvalidArgument("point-degenerate weight needs 0 < alpha < 2")
            if self.x0 is None or len(self.x0) != 2:
                raise InvalidArgument("point-degenerate weight needs a 2-D x0")
            object.__setattr__(self, "x0", (float(self.x0[0]), float(self.x0[1])))
        else:
            raise InvalidArgument(f"unknown weight kind {self.kind!r}")

    @classmethod
    def constant(cls, c0=1.0):
        return cls(CONSTANT, c0=float(c0))

    @classmethod
    def point(cls, alpha, x0=(0.0, 0.0)):
        return cls(POINT, alpha=float(alpha), x0=tuple(x0), c0=None)

    @classmethod
    def from_alpha(cls, alpha, x0=(0.0, 0.0)):
        """alpha == 0 means the unit constant weight."""
        return cls.constant(1.0) if alpha == 0 else cls.point(alpha, x0)

    @property
    def singular_point(self):
        return self.x0 if self.kind == POINT else None

    @property
    def exponent(self):
        return self.alpha if self.kind == POINT else 0.0

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if self.kind == CONSTANT:
            return np.full(points.shape[:-1], self.c0)
        r = np.linalg.norm(points - np.asarray(self.x0), axis=-1)
        return r ** self.alpha


def eval_weight(spec, point):
    return float(spec(np.asarray(point, dtype=float)))


def hardy_constant(alpha):
    """(2/alpha)^2, infinite for alpha == 0."""
    return np.inf if alpha == 0 else (2.0 / alpha) ** 2


@dataclass(frozen=True)
class WeightDiagnostics:
    a2_estimate: float  # lower bound only
    hardy_constant_bound: float
    poincare_ratio_max: float


def estimate_a2_constant(spec, bbox=(0.0, 1.0, 0.0, 1.0), depth=6, quad_order=8):
    """Lower bound on the A2 constant from all dyadic subsquares of ``bbox``.

    Each average is a tensor Gauss-Legendre rule with ``quad_order`` nodes per
    axis; the result is the max over levels 0..depth of avg(w) * avg(1/w).
    """
    return float(max(a2_profile(spec, bbox, depth, quad_order)))


def a2_profile(spec, bbox=(0.0, 1.0, 0.0, 1.0), depth=6, quad_order=8):
    """Per-level maxima of avg(w) * avg(1/w) over dyadic subsquares."""
    if depth < 1:
        raise InvalidArgument("depth must be >= 1")
    xmin, xmax, ymin, ymax = map(float, bbox)
    nodes, gw = np.polynomial.legendre.leggauss(int(quad_order))
    nodes = 0.5 * (nodes + 1.0)
    gw = 0.5 * gw
    W = np.outer(gw, gw).ravel()
    out = []
    for level in range(depth + 1):
        m = 2 ** level
        hx, hy = (xmax - xmin) / m, (ymax - ymin) / m
        cx = xmin + hx * np.arange(m)
        cy = ymin + hy * np.arange(m)
        X = cx[:, None, None, None] + hx * nodes[None, None, :, None]
        Y = cy[None, :, None, None] + hy * nodes[None, None, None, :]
        X, Y = np.broadcast_arrays(X, Y)
        pts = np.stack([X, Y], axis=-1).reshape(m * m, -1, 2)
        w = spec(pts)
        if np.any(w <= 0):
            # a node landed exactly on x0; nudge it toward its cell centre
            centre = np.stack(np.broadcast_arrays(cx[:, None] + hx / 2, cy[None, :] + hy / 2),
                              axis=-1).reshape(m * m, 1, 2)
            bad = w <= 0
            pts = np.where(bad[..., None], pts + 1e-9 * (centre - pts), pts)
            w = spec(pts)
        ratio = (w @ W) * ((1.0 / w) @ W)
        out.append(ratio.max())
    return np.array(out)


def weight_integrals(mesh, spec, quad=None):
    """Per-triangle integral of the weight."""
    if spec.kind == CONSTANT:
        return spec.c0 * mesh.areas
    quad = quad or build_quadrature(mesh, spec.singular_point)
    return quad.integrate(spec(quad.points), mesh.nt)


def _check_vanishing(mesh, field, tol=1e-12):
    f = np.asarray(field, dtype=float)
    if f.shape != (mesh.nv,):
        raise InvalidArgument("field must hold one value per mesh vertex")
    scale = np.abs(f).max(initial=0.0)
    if np.abs(f[mesh.boundary_flags]).max(initial=0.0) > tol * max(scale, 1e-300):
        raise PreconditionViolation("field does not vanish on the boundary")
    return f


def weighted_dirichlet_energy(mesh, spec, field, quad=None):
    """Integral of w |grad u|^2 for the P1 interpolant of ``field``."""
    grads = np.einsum("tkd,tk->td", p1_gradients(mesh), np.asarray(field)[mesh.triangles])
    return float(np.sum(weight_integrals(mesh, spec, quad) * np.sum(grads ** 2, axis=1)))


def l2_norm_squared(mesh, field):
    u = np.asarray(field)[mesh.triangles]
    return float(np.sum(mesh.areas / 12.0 * (np.sum(u ** 2, axis=1) + u.sum(axis=1) ** 2)))


def hardy_ratio(mesh, spec, field, quad=None):
    """int |x-x0|^(alpha-2) u^2  /  int |x-x0|^alpha |grad u|^2.

    Compare the result against ``hardy_constant(spec.alpha)``.
    """
    if spec.kind != POINT:
        raise InvalidArgument("hardy_ratio needs a point-degenerate weight")
    f = _check_vanishing(mesh, field)
    quad = quad or build_quadrature(mesh, spec.singular_point)
    den = weighted_dirichlet_energy(mesh, spec, f, quad)
    if den <= 0.0:
        raise UndefinedRatio("weighted Dirichlet energy is zero")
    r = np.linalg.norm(quad.points - np.asarray(spec.x0), axis=1)
    u = quad.interpolate(mesh.triangles, f)
    num = float(np.sum(quad.weights * r ** (spec.alpha - 2.0) * u ** 2))
    return num / den


def poincare_ratio(mesh, spec, field, quad=None):
    """int u^2 / int w |grad u|^2; bounded by 1/lambda_1."""
    f = _check_vanishing(mesh, field)
    den = weighted_dirichlet_energy(mesh, spec, f, quad)
    if den <= 0.0:
        raise UndefinedRatio("weighted Dirichlet energy is zero")
    return l2_norm_squared(mesh, f) / den


def random_boundary_vanishing_fields(mesh, count, rng, focus=None):
    """Seeded battery of admissible test fields (zero on boundary vertices).

    Cycles through four families: raw vertex noise, graph-smoothed noise,
    Gaussian bumps centred near ``focus`` (defaults to the mesh centroid) and
    random low sine modes over the bounding box.
    """
    v = mesh.vertices
    interior = ~mesh.boundary_flags
    lo, hi = v.min(axis=0), v.max(axis=0)
    span = hi - lo
    focus = v.mean(axis=0) if focus is None else np.asarray(focus, dtype=float)
    e = mesh.edges
    deg = np.bincount(e.ravel(), minlength=mesh.nv)
    fields = []
    for i in range(count):
        kind = i % 4
        if kind == 0:
            f = rng.standard_normal(mesh.nv)
        elif kind == 1:
            f = rng.standard_normal(mesh.nv)
            for _ in range(int(rng.integers(2, 30))):
                s = np.bincount(e[:, 0], weights=f[e[:, 1]], minlength=mesh.nv)
                s += np.bincount(e[:, 1], weights=f[e[:, 0]], minlength=mesh.nv)
                f = 0.5 * f + 0.5 * s / deg
                f[~interior] = 0.0
        elif kind == 2:
            centre = focus + 0.1 * span * rng.uniform(-1, 1, 2)
            width = span.max() * 10 ** rng.uniform(-1.5, -0.2)
            f = np.exp(-np.sum((v - centre) ** 2, axis=1) / width ** 2)
        else:
            f = np.zeros(mesh.nv)
            s = (v - lo) / span
            for _ in range(3):
                p, q = rng.integers(1, 5, 2)
                f += rng.standard_normal() * np.sin(p * np.pi * s[:, 0]) * np.sin(q * np.pi * s[:, 1])
        f = np.where(interior, f, 0.0)
        if not np.any(f):
            f = np.where(interior, 1.0, 0.0)
        fields.append(f)
    return fields
