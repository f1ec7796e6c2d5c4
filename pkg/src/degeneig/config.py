"""Run configuration: flat ``key = value`` text with dotted keys.

Blank lines and ``#`` comments are ignored.  Unknown keys, malformed values
and unmet check prerequisites raise :class:`ConfigError`.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InvalidArgument
from .weights import CONSTANT, POINT, WeightSpec

CHECKS = ("hardy", "poincare", "a2", "minmax", "courant", "nodal_eig", "monotone",
          "lipschitz", "rates", "split", "simplify", "openness")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _names(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


# key -> (parser, default)
SCHEMA = {
    "mesh.square_n": (int, 64),
    "mesh.file": (str, None),
    "mesh.pattern": (str, "unionjack"),
    "mesh.grading_depth": (int, 0),
    "mesh.refine": (int, 0),
    "weight.kind": (str, CONSTANT),
    "weight.alpha": (float, None),
    "weight.x0": (_floats, (0.0, 0.0)),
    "weight.c0": (float, 1.0),
    "potential.kind": (str, "none"),
    "potential.value": (float, None),
    "potential.file": (str, None),
    "solver.k": (int, 6),
    "solver.tol": (float, 1e-8),
    "solver.seed": (int, 0),
    "checks": (_names, ()),
    "output_dir": (str, "."),
    "check.trials": (int, 200),
    "check.fields": (int, 100),
    "check.pairs": (int, 20),
    "check.rho_bound": (float, 10.0),
    "check.lipschitz_n": (int, 8),
    "check.minmax_i": (int, 4),
    "check.monotone_k": (int, 5),
    "check.nodal_gap": (float, 0.05),
    "check.cluster": (_ints, (2, 3)),
    "check.taus": (_floats, (0.4, 0.2, 0.1, 0.05)),
    "check.eps": (float, 0.1),
    "check.n": (int, 4),
    "check.samples": (int, 10),
    "check.nodal_tol": (float, 1e-8),
    "check.cluster_tol": (float, 1e-6),
    "check.a2_depth": (int, 6),
    "check.a2_order": (int, 8),
}


@dataclass
class RunConfig:
    values: dict
    source: Path | None = None
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self):
        return self.values["solver.seed"]

    @property
    def checks(self):
        return self.values["checks"]

    def weight_spec(self):
        v = self.values
        try:
            if v["weight.kind"] == POINT:
                return WeightSpec.point(v["weight.alpha"], v["weight.x0"])
            return WeightSpec.constant(v["weight.c0"])
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from exc

    def resolve(self, path):
        p = Path(path)
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        return p

    def config_hash(self):
        text = "\n".join(f"{k} = {self.raw[k]}" for k in sorted(self.raw))
        text += f"\nsolver.seed = {self.seed}"
        return hashlib.sha256(text.encode()).hexdigest()


def parse_config(text, source=None, seed=None):
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val
    values = {k: d for k, (_, d) in SCHEMA.items()}
    for key, val in raw.items():
        try:
            values[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {val!r}") from exc
    if seed is not None:
        values["solver.seed"] = int(seed)
    cfg = RunConfig(values, Path(source) if source else None, raw)
    validate(cfg)
    return cfg


def load_config(path, seed=None):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), p, seed)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(cfg):
    """Schema and check-prerequisite validation, before anything runs."""
    v = cfg.values
    _require(v["weight.kind"] in (CONSTANT, POINT), f"weight.kind must be {CONSTANT} or {POINT}")
    if v["weight.kind"] == POINT:
        _require("weight.alpha" in cfg.raw, "weight.alpha is required for a point-degenerate weight")
        _require(len(v["weight.x0"]) == 2, "weight.x0 must be 'x,y'")
    cfg.weight_spec()
    _require(v["mesh.pattern"] in ("unionjack", "diagonal"), "mesh.pattern must be unionjack or diagonal")
    if v["mesh.file"] is None:
        _require(v["mesh.square_n"] >= 2, "mesh.square_n must be >= 2")
    _require(v["mesh.refine"] >= 0 and v["mesh.grading_depth"] >= 0, "refinement counts must be >= 0")
    kind = v["potential.kind"]
    _require(kind in ("none", "constant", "field"), "potential.kind must be none, constant or field")
    if kind == "constant":
        _require(v["potential.value"] is not None, "potential.value is required for a constant potential")
    if kind == "field":
        _require(v["potential.file"] is not None, "potential.file is required for a field potential")
    k = v["solver.k"]
    _require(k >= 1, "solver.k must be >= 1")
    _require(v["solver.tol"] > 0, "solver.tol must be positive")
    _require(0 < v["check.cluster_tol"] <= 1e-2, "check.cluster_tol must lie in (0, 1e-2]")
    _require(v["check.nodal_tol"] > 0, "check.nodal_tol must be positive")
    unknown = [c for c in cfg.checks if c not in CHECKS]
    _require(not unknown, f"unknown checks: {', '.join(unknown)}")
    checks = set(cfg.checks)
    point = v["weight.kind"] == POINT
    if checks & {"hardy", "a2"}:
        _require(point, "hardy and a2 checks need a point-degenerate weight")
    if "a2" in checks:
        _require(v["check.a2_depth"] >= 1 and v["check.a2_order"] >= 1, "a2 depth and order must be >= 1")
    if "minmax" in checks:
        _require(k >= 2, "minmax needs solver.k >= 2")
        _require(1 <= v["check.minmax_i"], "check.minmax_i must be >= 1")
    if "nodal_eig" in checks:
        _require(k >= 2, "nodal_eig needs solver.k >= 2")
    if "lipschitz" in checks:
        _require(v["check.lipschitz_n"] >= 1 and v["check.pairs"] >= 1, "lipschitz needs n and pairs >= 1")
        _require(v["check.rho_bound"] >= 0, "check.rho_bound must be >= 0")
    if checks & {"rates", "split"}:
        c = v["check.cluster"]
        _require(len(c) == 2 and 1 <= c[0] < c[1], "check.cluster must be 'first,last' with first < last")
        _require(k >= c[1] + 1, "solver.k must cover the cluster and one eigenvalue above it")
        _require(v["check.eps"] > 0, "check.eps must be positive")
    if "rates" in checks:
        t = v["check.taus"]
        _require(len(t) >= 2 and all(a > b for a, b in zip(t, t[1:])) and t[-1] >= 1e-6,
                 "check.taus must be >= 2 strictly decreasing values, the smallest >= 1e-6")
    if checks & {"simplify", "openness"}:
        _require(v["check.n"] >= 1 and v["check.eps"] > 0, "simplify needs check.n >= 1 and check.eps > 0")
        _require(k >= v["check.n"] + 1, "solver.k must be >= check.n + 1")
    return cfg
