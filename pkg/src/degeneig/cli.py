"""Batch command line front-end.

Exit codes: 0 pass, 1 check failure, 2 config error, 3 solver failure,
4 missing artifact.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import RunContext, build_mesh, run_check
from .config import load_config
from .eigen import cluster_eigenvalues, cluster_ids
from .errors import (ConfigError, ConvergenceFailure, DegenError, InvalidArgument, InvalidMesh,
                     MissingArtifact)
from .io import read_field, read_mesh, write_eigen_csv, write_field, write_mesh, write_xyz
from .mesh import refine_uniform

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER, EXIT_MISSING = 0, 1, 2, 3, 4

MESH_FILE = "mesh.degenmesh"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def _write_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2) + "\n")


def _header(cfg):
    return {"version": __version__, "config_hash": cfg.config_hash(), "seed": cfg.seed}


def _outdir(args, cfg):
    out = Path(args.output) if args.output else cfg.resolve(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args):
    cfg = load_config(args.config, args.seed)
    out = _outdir(args, cfg)
    t0 = time.perf_counter()
    try:
        ctx = RunContext(cfg)
    except (InvalidMesh, InvalidArgument) as exc:
        raise ConfigError(str(exc)) from exc
    t1 = time.perf_counter()
    k = cfg["solver.k"]
    try:
        d = ctx.decomp(k)
    except (ConvergenceFailure, InvalidArgument) as exc:
        report = {**_header(cfg), "status": "solver-failure", "error": str(exc)}
        res = getattr(exc, "residuals", None)
        if res is not None:
            report["residuals"] = res
        _write_json(out / "solve_report.json", report)
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    t2 = time.perf_counter()
    tol = cfg["check.cluster_tol"]
    write_mesh(out / MESH_FILE, ctx.mesh)
    write_eigen_csv(out / "eigenvalues.csv", d, cluster_ids(d, tol))
    for i in range(d.k):
        write_field(out / f"phi_{i + 1}.field", ctx.system.expand(d.phis[:, i]))
    if ctx.rho is not None:
        write_field(out / "potential.field", ctx.rho)
    _write_json(out / "solve_report.json", {
        **_header(cfg),
        "status": "ok",
        "mesh": {"nv": ctx.mesh.nv, "nt": ctx.mesh.nt, "interior": ctx.system.n},
        "weight": {"kind": ctx.spec.kind, "alpha": ctx.spec.alpha, "x0": ctx.spec.x0, "c0": ctx.spec.c0},
        "k": d.k,
        "lambdas": d.lambdas,
        "residuals": d.residuals,
        "clusters": [{"indices": [c.start + 1, c.stop], "lambda_ref": c.lambda_ref}
                     for c in cluster_eigenvalues(d, tol)],
        "timing": {"assembly_s": t1 - t0, "solve_s": t2 - t1},
    })
    print(f"solved k={d.k}: lambda_1 = {d.lambdas[0]:.10g}; wrote {out}")
    return EXIT_OK


def cmd_verify(args):
    cfg = load_config(args.config, args.seed)
    out = _outdir(args, cfg)
    if not cfg.checks:
        raise ConfigError("no checks enabled")
    try:
        ctx = RunContext(cfg)
    except (InvalidMesh, InvalidArgument) as exc:
        raise ConfigError(str(exc)) from exc
    entries = []
    try:
        for name in cfg.checks:
            t0 = time.perf_counter()
            e = run_check(ctx, name)
            e["details"]["seconds"] = time.perf_counter() - t0
            entries.append(e)
            print(f"{name:10s} {'PASS' if e['pass'] else 'FAIL'}")
    except ConvergenceFailure as exc:
        _write_json(out / "verify_report.json", {**_header(cfg), "checks": entries,
                                                 "status": "solver-failure", "error": str(exc)})
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    ok = all(e["pass"] for e in entries)
    _write_json(out / "verify_report.json", {**_header(cfg), "all_pass": ok, "checks": entries})
    if not ok:
        failed = [e["name"] for e in entries if not e["pass"]]
        print("failing checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_plotdata(args):
    cfg = load_config(args.config, args.seed)
    out = _outdir(args, cfg)
    mesh = read_mesh(out / MESH_FILE)
    if not (out / "eigenvalues.csv").is_file():
        raise MissingArtifact(f"no eigenvalues.csv in {out}; run solve first")
    i, tol = 1, cfg["check.nodal_tol"]
    while (out / f"phi_{i}.field").is_file():
        phi = read_field(out / f"phi_{i}.field", mesh.nv)
        write_xyz(out / f"phi_{i}.xyz", mesh, phi)
        mask = np.where(np.abs(phi) > tol * np.abs(phi).max(), np.sign(phi), 0.0)
        write_xyz(out / f"nodal_{i}.xyz", mesh, mask, fmt="%.17g")
        i += 1
    if i == 1:
        raise MissingArtifact(f"no phi_<i>.field files in {out}")
    print(f"wrote {i - 1} xyz pairs to {out}")
    return EXIT_OK


def cmd_mesh(args):
    if args.input:
        mesh = read_mesh(args.input)
        out = Path(args.output or ".")
        out.mkdir(parents=True, exist_ok=True)
    else:
        if not args.config:
            raise ConfigError("mesh needs --config or --input")
        cfg = load_config(args.config, args.seed)
        out = _outdir(args, cfg)
        try:
            mesh = build_mesh(cfg)
        except (InvalidMesh, InvalidArgument) as exc:
            raise ConfigError(str(exc)) from exc
    for _ in range(args.refine):
        mesh = refine_uniform(mesh)
    write_mesh(out / MESH_FILE, mesh)
    print(f"mesh: {mesh.nv} vertices, {mesh.nt} triangles -> {out / MESH_FILE}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="degeneig", description="Spectra of point-degenerate weighted Dirichlet problems.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, needs_cfg in (("solve", cmd_solve, True), ("verify", cmd_verify, True),
                                ("plotdata", cmd_plotdata, True), ("mesh", cmd_mesh, False)):
        s = sub.add_parser(name)
        s.add_argument("--config", required=needs_cfg)
        s.add_argument("--output")
        s.add_argument("--seed", type=int)
        if name == "mesh":
            s.add_argument("--input", help="existing degenmesh file to refine")
            s.add_argument("--refine", type=int, default=0, help="uniform refinements to apply")
        s.set_defaults(func=fn)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidMesh) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConvergenceFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DegenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
