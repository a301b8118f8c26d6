"""Batch front-end: ``locmorse {analyze,lagrange,continuation,oracle} --config run.yaml``.

Exit status: 0 success, 1 bad configuration or parameters, 2 generic-position
failure that survived every retry, 3 a structural check failed.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .builtins import NAMES, builtin
from .complex import verify_d_squared
from .continuation import HomotopyFamily, chain_map, induces_isomorphism, verify_chain_map
from .errors import BadParameter, LocMorseError, Retryable, ValidationFailure
from .field import Ball
from .lagrange import LagrangeParams, theorem_a_pipeline
from .oracle import oracle_homology
from .pipeline import local_homology

log = logging.getLogger("locmorse")

COMMANDS = ("analyze", "lagrange", "continuation", "oracle")
EXIT_OK, EXIT_CONFIG, EXIT_RETRYABLE, EXIT_VALIDATION = 0, 1, 2, 3

# section -> {key: default}; ``None`` means "derive from the field"
SCHEMA = {
    "command": None,
    "field": {"name": None, "params": {}},
    "ball": {"center": None, "delta": None},
    "tolerances": {"grad_tol": None, "merge_tol": None, "degen_tol": None},
    "flow": {"rel_tol": None, "abs_tol": None, "max_time": None, "converge_radius": None,
             "escape_margin": None, "singular_guard": None},
    "perturbation": {"amplitude": None, "seed": 0, "max_retries": 5},
    "search": {"grid_n": 16},
    "lagrange": {"delta": 0.05, "t_steps": 8},
    "continuation": {"mode": "two-seed", "seed_beta": None, "T": 1.0, "target": None},
    "oracle": {"n": 128, "refine": True},
    "output": {"dir": "out", "report": "report.json", "trajectories": True},
}
OPEN_KEYS = {("field", "params"), ("continuation", "target")}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-9`` (no decimal point) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


class ConfigError(LocMorseError):
    def __init__(self, message, line=None, column=None, source="<config>"):
        where = f"{source}:{line}:{column}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line, self.column = line, column


def _node_at(root, path):
    """YAML node for a key path (used to attach line/column to semantic errors)."""
    node = root
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            return node
        for k, v in node.value:
            if k.value == key:
                node = k if key == path[-1] else v
                break
        else:
            return node
    return node


@dataclass
class RunConfig:
    command: str
    data: dict  # fully populated, validated tree
    source: str = "<config>"

    @property
    def seed(self) -> int:
        return self.data["perturbation"]["seed"]

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def ball(self) -> Ball | None:
        b = self.data["ball"]
        if b["center"] is None and b["delta"] is None:
            return None
        if b["center"] is None or b["delta"] is None:
            raise BadParameter("ball needs both center and delta")
        return Ball(tuple(b["center"]), b["delta"])

    def builtin(self, spec=None):
        spec = spec or self.data["field"]
        return builtin(spec["name"], spec.get("params") or {}, self.ball())


def _fill(tree, schema, path, root, source):
    if not isinstance(tree, dict):
        n = _node_at(root, path)
        raise ConfigError(f"section {'.'.join(path)!r} must be a mapping", n.start_mark.line + 1,
                          n.start_mark.column + 1, source)
    out = {}
    for key, value in tree.items():
        if key not in schema:
            n = _node_at(root, path + (key,))
            raise ConfigError(f"unknown key {'.'.join(path + (key,))!r}", n.start_mark.line + 1,
                              n.start_mark.column + 1, source)
    for key, default in schema.items():
        value = tree.get(key, copy.deepcopy(default))
        if isinstance(default, dict) and path + (key,) not in OPEN_KEYS:
            value = _fill(value if value is not None else {}, default, path + (key,), root, source)
        out[key] = value
    return out


def _positive(cfg, section, root, source, keys=None):
    for k, v in cfg[section].items():
        if keys is not None and k not in keys:
            continue
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            n = _node_at(root, (section, k))
            raise ConfigError(f"{section}.{k} must be a positive number, got {v!r}",
                              n.start_mark.line + 1, n.start_mark.column + 1, source)


def parse_config(text: str, source: str = "<config>", seed: int | None = None) -> RunConfig:
    try:
        root = yaml.compose(text, Loader=_Loader)
        raw = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"{exc.problem}", mark.line + 1, mark.column + 1, source) from None
    if raw is None:
        raise ConfigError("empty configuration", source=source)
    cfg = _fill(raw, SCHEMA, (), root, source)

    def fail(path, msg):
        n = _node_at(root, path)
        raise ConfigError(msg, n.start_mark.line + 1, n.start_mark.column + 1, source)

    if cfg["command"] not in COMMANDS:
        fail(("command",), f"command must be one of {', '.join(COMMANDS)}, got {cfg['command']!r}")
    if cfg["field"]["name"] not in NAMES:
        fail(("field", "name"), f"field.name must be one of {', '.join(NAMES)}")
    _positive(cfg, "tolerances", root, source)
    _positive(cfg, "flow", root, source)
    _positive(cfg, "lagrange", root, source)
    _positive(cfg, "oracle", root, source, keys=("n",))
    _positive(cfg, "search", root, source)
    _positive(cfg, "continuation", root, source, keys=("T",))
    _positive(cfg, "perturbation", root, source, keys=("amplitude",))
    b = cfg["ball"]
    if b["center"] is not None:
        c = b["center"]
        if not (isinstance(c, list) and len(c) == 2 and all(isinstance(x, (int, float)) for x in c)):
            fail(("ball", "center"), "ball.center must be a list of two numbers")
        b["center"] = [float(x) for x in c]
    if b["delta"] is not None:
        _positive(cfg, "ball", root, source, keys=("delta",))
        b["delta"] = float(b["delta"])
    if cfg["continuation"]["mode"] not in ("two-seed", "constant", "target"):
        fail(("continuation", "mode"), "continuation.mode must be two-seed, constant or target")
    if cfg["continuation"]["mode"] == "target" and not isinstance(cfg["continuation"]["target"], dict):
        fail(("continuation",), "continuation.mode 'target' needs a continuation.target field spec")
    for section, key in (("perturbation", "seed"), ("perturbation", "max_retries"), ("continuation", "seed_beta"),
                         ("lagrange", "t_steps"), ("oracle", "n"), ("search", "grid_n")):
        v = cfg[section][key]
        if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 0):
            fail((section, key), f"{section}.{key} must be a non-negative integer")
    if seed is not None:
        if seed < 0 or seed >= 2**64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer", source=source)
        cfg["perturbation"]["seed"] = seed
    return RunConfig(cfg["command"], cfg, source)


def load_config(path, seed: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_config(text, str(path), seed)


# --- commands -----------------------------------------------------------------------


def _overrides(section):
    return {k: v for k, v in section.items() if v is not None}


def _analysis(cfg: RunConfig, fld, ball, isolated, seed):
    d = cfg.data
    return local_homology(
        fld, ball,
        amplitude=d["perturbation"]["amplitude"],
        seed=seed,
        grid_n=d["search"]["grid_n"],
        tolerances=_overrides(d["tolerances"]),
        flow=_overrides(d["flow"]),
        isolated=isolated,
        max_retries=d["perturbation"]["max_retries"],
    )


def _check_ball(b):
    if not b.ball.clear_of(b.field):
        raise BadParameter(f"{b.ball} does not keep B_2delta clear of the field's singularities")


def _report(cfg: RunConfig, **body):
    rep = {"command": cfg.command, "config_hash": cfg.hash}
    rep.update(body)
    rep["checks"] = {k: bool(v) for k, v in rep.get("checks", {}).items()}
    rep.setdefault("provenance", {})["version"] = __version__
    return rep


def run_analyze(cfg: RunConfig, out: Path):
    b = cfg.builtin()
    _check_ball(b)
    res = _analysis(cfg, b.field, b.ball, b.isolated, cfg.seed)
    witnesses = []
    for (k, hi, lo), trajs in sorted(res.connections.witnesses.items()):
        files = []
        for n, tr in enumerate(trajs):
            name = f"witness_d{k}_{hi}_{lo}_{n}.csv"
            if cfg.data["output"]["trajectories"]:
                tr.to_csv(out / name)
            files.append(name)
        witnesses.append({"degree": k, "from": hi, "to": lo, "count": len(trajs), "files": files})
    hom = res.homology.as_dict()
    prov = dict(hom["provenance"])
    prov.update({"flow": dict(res.flow.__dict__), "attempts": [list(a) for a in res.attempts],
                 "isolated": b.isolated})
    return _report(cfg, betti=hom["betti"], generators=hom["generators"],
                   points=[c.as_dict() for c in res.crits], witnesses=witnesses,
                   checks=res.checks, provenance=prov)


def run_lagrange(cfg: RunConfig, out: Path):
    spec = cfg.data["field"]
    if spec["name"] != "lagrange":
        raise BadParameter("the lagrange command needs field.name: lagrange")
    params = spec.get("params") or {}
    unknown = set(params) - {"m1", "m2", "eps"}
    if unknown:
        raise BadParameter(f"unknown lagrange parameters {sorted(unknown)}")
    try:
        p = LagrangeParams(float(params["m1"]), float(params["m2"]), float(params["eps"]))
    except KeyError as exc:
        raise BadParameter(f"lagrange field needs m1, m2, eps (missing {exc})") from None
    lg = cfg.data["lagrange"]
    rep = theorem_a_pipeline(p, delta=float(lg["delta"]), t_steps=int(lg["t_steps"]), seed=cfg.seed,
                             grid_n=cfg.data["search"]["grid_n"])
    if cfg.data["output"]["trajectories"]:
        rep.write_paths(out)
    body = rep.as_dict()
    return _report(cfg, betti={p.label: list(p.betti_end) for p in rep.points}, points=body["points"],
                   checks=rep.checks,
                   provenance={"params": body["params"], "delta": rep.delta, "seed": rep.seed,
                               "trace": body["trace"], "expected": body["expected"],
                               "t_steps": int(lg["t_steps"])})


def run_continuation(cfg: RunConfig, out: Path):
    d = cfg.data
    ct = d["continuation"]
    b = cfg.builtin()
    _check_ball(b)
    seed_a = cfg.seed
    seed_b = ct["seed_beta"] if ct["seed_beta"] is not None else seed_a + 1
    ra = _analysis(cfg, b.field, b.ball, b.isolated, seed_a)
    if ct["mode"] == "constant":
        rb = ra
    elif ct["mode"] == "two-seed":
        rb = _analysis(cfg, b.field, b.ball, b.isolated, seed_b)
    else:
        tb = cfg.builtin(ct["target"])
        _check_ball(tb)
        rb = _analysis(cfg, tb.field, b.ball, tb.isolated, seed_b)
    fam = HomotopyFamily(ra.perturbed, rb.perturbed, float(ct["T"]))
    phi = chain_map(fam, ra.crits, rb.crits, b.ball, ra.flow)
    checks = {
        "d_squared": verify_d_squared(ra.chain_complex) and verify_d_squared(rb.chain_complex),
        "chain_map_identity": verify_chain_map(phi, ra.chain_complex, rb.chain_complex),
        "isomorphism": induces_isomorphism(phi, ra.chain_complex, rb.chain_complex),
        "betti_equal": tuple(ra.betti) == tuple(rb.betti),
        "energy_bound": phi.energy_bound_ok,
    }
    if ct["mode"] == "constant":
        checks["identity"] = all(
            np.array_equal(phi[k], np.eye(len(ra.crits.by_index(k)), dtype=np.uint8)) for k in range(3))
    chain = {
        "T": phi.T,
        "matrices": {str(k): phi[k].astype(int).tolist() for k in range(3)},
        "generators_alpha": {str(k): v for k, v in phi.generators_alpha.items()},
        "generators_beta": {str(k): v for k, v in phi.generators_beta.items()},
        "energy_margins": [float(m) for m in phi.energy_margins],
        "unresolved_crossings": [[a, b, n] for (a, b), n in sorted(phi.unresolved.items())],
    }
    prov = {"mode": ct["mode"], "seed_alpha": ra.seed, "seed_beta": rb.seed,
            "alpha": ra.homology.provenance, "beta": rb.homology.provenance}
    return _report(cfg, betti={"alpha": list(ra.betti), "beta": list(rb.betti)}, chain_map=chain,
                   checks=checks, provenance=prov)


def run_oracle(cfg: RunConfig, out: Path):
    b = cfg.builtin()
    _check_ball(b)
    n = int(cfg.data["oracle"]["n"])
    res = oracle_homology(b.field, b.ball.center, b.ball.delta, n)
    checks = {}
    prov = {"field": b.field.descriptor, "ball": {"center": list(b.ball.center), "delta": b.ball.delta},
            "n": n, "level": res.level, "inner_radius": b.ball.delta / 2}
    if cfg.data["oracle"]["refine"]:
        fine = oracle_homology(b.field, b.ball.center, b.ball.delta, 2 * n)
        checks["refinement_stable"] = fine.betti == res.betti
        prov["refined_betti"] = list(fine.betti)
    return _report(cfg, betti=list(res.betti), checks=checks, provenance=prov)


RUNNERS = {"analyze": run_analyze, "lagrange": run_lagrange, "continuation": run_continuation,
           "oracle": run_oracle}


def execute(command: str, cfg: RunConfig, out: Path):
    """Run one command; returns (exit status, report dict or None)."""
    if cfg.command != command:
        raise ConfigError(f"config is for {cfg.command!r}, not {command!r}", source=cfg.source)
    out.mkdir(parents=True, exist_ok=True)
    try:
        rep = RUNNERS[command](cfg, out)
    except (BadParameter, ConfigError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG, None
    except Retryable as exc:
        log.error("retryable failure: %s", exc)
        return EXIT_RETRYABLE, None
    except (ValidationFailure, LocMorseError) as exc:
        log.error("validation failure: %s", exc)
        return EXIT_VALIDATION, None
    text = json.dumps(rep, sort_keys=True, indent=2) + "\n"
    (out / cfg.data["output"]["report"]).write_text(text)
    status = EXIT_OK if all(rep["checks"].values()) else EXIT_VALIDATION
    if status:
        log.error("failed checks: %s", sorted(k for k, v in rep["checks"].items() if not v))
    return status, rep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="locmorse", description="Local Morse homology of planar critical points.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="perturbation seed (overrides perturbation.seed)")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, seed=args.seed)
        out = Path(args.out or cfg.data["output"]["dir"])
        status, rep = execute(args.command, cfg, out)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if rep is not None:
        print(json.dumps({"command": rep["command"], "betti": rep.get("betti"), "checks": rep["checks"]},
                         sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
