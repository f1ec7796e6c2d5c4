"""Check drivers for ``degeneig verify``.

Each driver takes a :class:`RunContext` and returns ``(passed, details)``
with JSON-friendly details.
"""
from __future__ import annotations

import numpy as np

from . import nodal, perturbation as pert
from .assembly import assemble_system
from .eigen import cluster_eigenvalues, verify_minmax
from .errors import ClusterTrackingFailure, DomainTooCoarse, SplittingFailure
from .io import read_field, read_mesh
from .mesh import (build_unit_square_mesh, extract_submesh, refine_graded, refine_uniform,
                   triangles_in_box)
from .weights import (a2_profile, hardy_constant, hardy_ratio, poincare_ratio,
                      random_boundary_vanishing_fields)

ANCHORS = {
    "hardy": "hardy-inequality",
    "poincare": "variational-poincare-bound",
    "a2": "a2-weight-condition",
    "minmax": "min-max-characterisation",
    "courant": "courant-nodal-bound",
    "nodal_eig": "nodal-domain-eigenvalue-identity",
    "monotone": "domain-monotonicity",
    "lipschitz": "lipschitz-in-potential",
    "rates": "first-order-perturbation",
    "split": "cluster-splitting",
    "simplify": "generic-simplicity",
    "openness": "openness-of-simple-spectrum",
}


def build_mesh(cfg):
    if cfg["mesh.file"] is not None:
        mesh = read_mesh(cfg.resolve(cfg["mesh.file"]))
    else:
        mesh = build_unit_square_mesh(cfg["mesh.square_n"], cfg["mesh.pattern"])
    for _ in range(cfg["mesh.refine"]):
        mesh = refine_uniform(mesh)
    if cfg["mesh.grading_depth"] > 0:
        mesh = refine_graded(mesh, cfg["weight.x0"], cfg["mesh.grading_depth"])
    return mesh


class RunContext:
    def __init__(self, cfg):
        self.cfg = cfg
        self.seed = cfg.seed
        self.spec = cfg.weight_spec()
        self.mesh = build_mesh(cfg)
        self.system = assemble_system(self.mesh, self.spec)
        kind = cfg["potential.kind"]
        if kind == "constant":
            self.rho = np.full(self.mesh.nv, cfg["potential.value"])
        elif kind == "field":
            self.rho = read_field(cfg.resolve(cfg["potential.file"]), self.mesh.nv)
        else:
            self.rho = None
        self._cache = {}

    @property
    def rho_field(self):
        return pert.PotentialField(np.zeros(self.mesh.nv) if self.rho is None else self.rho)

    def decomp(self, k=None, with_potential=True):
        k = k or self.cfg["solver.k"]
        key = (k, with_potential)
        if key not in self._cache:
            rho = self.rho if with_potential else None
            self._cache[key] = self.system.solve(rho, k=k, tol=self.cfg["solver.tol"], seed=self.seed)
        return self._cache[key]

    def rng(self, salt):
        return np.random.default_rng([self.seed, salt])


def _battery(ctx):
    mesh = ctx.mesh
    fields = random_boundary_vanishing_fields(mesh, ctx.cfg["check.fields"], ctx.rng(1),
                                              focus=ctx.cfg["weight.x0"])
    d = ctx.decomp(min(5, ctx.system.n - 1), with_potential=False)
    return fields + [ctx.system.expand(d.phis[:, i]) for i in range(d.k)], d


def check_hardy(ctx):
    fields, _ = _battery(ctx)
    bound = hardy_constant(ctx.spec.alpha)
    ratios = np.array([hardy_ratio(ctx.mesh, ctx.spec, f) for f in fields])
    bad = int(np.sum(ratios > bound))
    return bad == 0, {"bound": bound, "max_ratio": float(ratios.max()), "fields": len(fields),
                      "violations": bad}


def check_poincare(ctx):
    fields, d = _battery(ctx)
    bound = 1.0 / d.lambdas[0] + 1e-8
    ratios = np.array([poincare_ratio(ctx.mesh, ctx.spec, f) for f in fields])
    bad = int(np.sum(ratios > bound))
    return bad == 0, {"bound": float(bound), "max_ratio": float(ratios.max()), "fields": len(fields),
                      "violations": bad}


def check_a2(ctx):
    v = ctx.mesh.vertices
    bbox = (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())
    prof = a2_profile(ctx.spec, bbox, ctx.cfg["check.a2_depth"], ctx.cfg["check.a2_order"])
    est = float(prof.max())
    # finite and saturating: the finest level adds nothing beyond the coarser ones
    ok = bool(np.isfinite(est) and prof[-1] <= prof[:-1].max() * (1 + 1e-3))
    return ok, {"a2_lower_bound": est, "profile": prof.tolist()}


def check_minmax(ctx):
    k = ctx.cfg["solver.k"]
    d = ctx.decomp()
    K_eff = ctx.system.effective_stiffness(ctx.rho)
    out, ok = [], True
    for i in range(1, min(ctx.cfg["check.minmax_i"], k - 1) + 1):
        r = verify_minmax(d, K_eff, ctx.system.M, i, trials=ctx.cfg["check.trials"], seed=ctx.seed + i)
        ok &= r.achieved_ok and r.all_trials_ge
        out.append({"i": i, "lambda": r.lambda_i, "achieved": r.achieved, "min_trial": r.min_trial,
                    "failures": len(r.failures)})
    return bool(ok), {"per_index": out}


def check_courant(ctx):
    d = ctx.decomp()
    entries = nodal.courant_check(d, ctx.system, ctx.cfg["check.nodal_tol"])
    ok = all(e.passed and e.micro_count <= 2 for e in entries)
    ok &= entries[0].filtered_count == 1
    if len(entries) > 1:
        ok &= entries[1].filtered_count == 2
    return bool(ok), {"per_index": [
        {"index": e.index, "count": e.count, "filtered_count": e.filtered_count,
         "micro": e.micro_count, "areas": e.areas, "pass": e.passed} for e in entries]}


def check_nodal_eig(ctx):
    d = ctx.decomp()
    nd = nodal.nodal_decomposition(ctx.mesh, ctx.system.expand(d.phis[:, 1]), ctx.cfg["check.nodal_tol"], 2)
    out, ok = [], True
    for j, dom in enumerate(nd.domains):
        if dom.micro:
            continue
        try:
            r = nodal.nodal_domain_eigenvalue(ctx.system, d, 2, j, ctx.cfg["check.nodal_tol"], ctx.seed)
        except DomainTooCoarse as exc:
            out.append({"domain": j, "error": str(exc)})
            ok = False
            continue
        ok &= r.rel_gap <= ctx.cfg["check.nodal_gap"]
        out.append({"domain": j, "lambda1_sub": r.lambda1_sub, "lambda_2": r.lambda_i,
                    "rel_gap": r.rel_gap, "triangles": r.n_triangles})
    return bool(ok and out), {"domains": out}


def nested_boxes(mesh):
    """Three nested boxes (relative to the bounding box) used as subdomains."""
    v = mesh.vertices
    x0, y0 = v.min(axis=0)
    w, h = np.ptp(v, axis=0)
    return [(x0, x0 + 0.75 * w, y0, y0 + h),
            (x0, x0 + 0.5 * w, y0, y0 + h),
            (x0, x0 + 0.5 * w, y0, y0 + 0.75 * h)]


def check_monotone(ctx):
    k = ctx.cfg["check.monotone_k"]
    parent, psys, out, ok = ctx.mesh, ctx.system, [], True
    for box in nested_boxes(ctx.mesh):
        subset = triangles_in_box(parent, *box)
        r = nodal.domain_monotonicity_check(parent, subset, ctx.spec, k, ctx.seed, parent_system=psys)
        ok &= r.passed
        out.append({"box": list(map(float, box)), "lambda_parent": r.lambda_parent.tolist(),
                    "lambda_child": r.lambda_child.tolist(), "extension_rel_error": r.extension_rel_error,
                    "pass": r.passed})
        parent = extract_submesh(parent, subset).child
        psys = assemble_system(parent, ctx.spec)
    return bool(ok), {"chain": out}


def check_lipschitz(ctx):
    n = ctx.cfg["check.lipschitz_n"]
    bound = ctx.cfg["check.rho_bound"]
    base = ctx.rho_field
    if bound == 0:
        pairs = [(base, base)]
    else:
        pairs = pert.random_potential_pairs(ctx.mesh, ctx.cfg["check.pairs"], ctx.rng(2), bound)
    worst, ok = -np.inf, True
    for r1, r2 in pairs:
        rep = pert.lipschitz_check(ctx.system, r1, r2, n, ctx.seed)
        worst = max(worst, rep.max_violation)
        ok &= rep.passed
    return bool(ok), {"pairs": len(pairs), "max_violation": float(worst), "n": n}


def _cluster(ctx):
    a, b = ctx.cfg["check.cluster"]
    d = ctx.decomp()
    clusters = cluster_eigenvalues(d, ctx.cfg["check.cluster_tol"])
    for c in clusters:
        if c.start == a - 1 and c.stop == b:
            return d, c
    return d, None


def _no_cluster(ctx, d):
    a, b = ctx.cfg["check.cluster"]
    return False, {"error": f"eigenvalues {a}..{b} do not form a cluster",
                   "lambdas": d.lambdas.tolist()}


def check_rates(ctx):
    d, c = _cluster(ctx)
    if c is None:
        return _no_cluster(ctx, d)
    sigma = pert.product_potential(ctx.system, d, c.start, c.start + 1)
    try:
        r = pert.first_order_rates(ctx.system, ctx.rho_field, c, sigma, ctx.cfg["check.taus"], ctx.seed,
                                   cluster_tol=ctx.cfg["check.cluster_tol"])
    except ClusterTrackingFailure as exc:
        return False, {"error": str(exc)}
    ok = r.exact or 0.8 <= r.order_estimate <= 1.2
    return bool(ok), {"predicted": r.predicted.tolist(), "slopes": r.slopes_at_tau.tolist(),
                      "errors": r.errors.tolist(), "order_estimate": r.order_estimate, "exact": r.exact}


def check_split(ctx):
    d, c = _cluster(ctx)
    if c is None:
        return _no_cluster(ctx, d)
    eps = ctx.cfg["check.eps"]
    try:
        r = pert.split_cluster(ctx.system, ctx.rho_field, c, eps, ctx.seed,
                               cluster_tol=ctx.cfg["check.cluster_tol"])
    except SplittingFailure as exc:
        return False, {"error": str(exc), "report": exc.report.to_dict() if exc.report else None}
    ok = r.perturbation_norm < eps and r.gap_after > ctx.cfg["check.cluster_tol"] * max(1.0, abs(c.lambda_ref))
    return bool(ok), r.to_dict()


def _simplify(ctx):
    if "simplify" not in ctx._cache:
        ctx._cache["simplify"] = pert.simplify_spectrum(
            ctx.system, ctx.rho_field, ctx.cfg["check.n"], ctx.cfg["check.eps"], ctx.seed,
            cluster_tol=ctx.cfg["check.cluster_tol"])
    return ctx._cache["simplify"]


def check_simplify(ctx):
    t = _simplify(ctx)
    tol = ctx.cfg["check.cluster_tol"]
    lam = t.lambdas_final
    ok = bool(np.all(np.diff(lam) > tol * np.maximum(1.0, np.abs(lam[:-1]))) and t.total_perturbation < t.eps)
    return ok, t.to_dict()


def check_openness(ctx):
    t = _simplify(ctx)
    r = pert.validate_openness(ctx.system, t.rho_final, ctx.cfg["check.n"], ctx.cfg["check.samples"],
                               ctx.seed, cluster_tol=ctx.cfg["check.cluster_tol"])
    return r.passed, {"radius": r.radius, "samples": r.samples, "sup_norms": r.sup_norms,
                      "min_gaps": r.min_gaps, "violations": r.violations, "lipschitz_ok": r.lipschitz_ok}


DRIVERS = {
    "hardy": check_hardy,
    "poincare": check_poincare,
    "a2": check_a2,
    "minmax": check_minmax,
    "courant": check_courant,
    "nodal_eig": check_nodal_eig,
    "monotone": check_monotone,
    "lipschitz": check_lipschitz,
    "rates": check_rates,
    "split": check_split,
    "simplify": check_simplify,
    "openness": check_openness,
}


def run_check(ctx, name):
    passed, details = DRIVERS[name](ctx)
    return {"name": name, "pass": bool(passed), "details": details, "paper_anchor": ANCHORS[name]}
