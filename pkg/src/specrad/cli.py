"""Command-line front end.

``specrad <command> --config run.json [flags]`` builds the system and weight
described by the config, runs the requested methods, reconciles their
brackets and prints a JSON (default) or CSV report.  Exit status is 0 on
success, 1 on a configuration error and 2 when certified brackets disagree.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from . import ergopt, lift, measures, projext
from .cocycle import Weight, spectral_exponent
from .dynsys import (
    CIRCLE,
    SFT,
    CircleLift,
    DynamicsError,
    PartialSystem,
    circle_grid,
    essential_domain,
    finite_map,
    sft,
)
from .estimate import ExponentEstimate, ReconciliationError, encode_float, exp_or_zero, reconcile

log = logging.getLogger("specrad")

COMMANDS = ("exponent", "oracle", "mobius", "shift", "lift", "validate")
METHODS = ("gelfand", "karp", "periodic", "extension_vp", "limsup", "inner_field", "lift")
SAMPLED_METHODS = ("extension_vp",)
CSV_COLUMNS = ("method", "lower", "upper", "r_lower", "r_upper", "n_used", "exactness", "witness")
DEFAULT_N_MAX = {"shift": 10_000}


class ConfigError(ValueError):
    pass


def load_schema(name: str) -> dict:
    text = resources.files("specrad").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate_config(cfg: Any) -> None:
    """Schema check; the first violation is reported with its field path."""
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    e = jsonschema.exceptions.best_match(validator.iter_errors(cfg))
    if e is not None:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field {path}: {e.message}")


# ---------------------------------------------------------------------------
# config -> objects


def _cx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _matrix(rows, where: str) -> np.ndarray:
    widths = {len(r) for r in rows}
    if widths != {len(rows)}:
        raise ConfigError(f"config field {where}: matrix must be square")
    return np.array([[_cx(v) for v in r] for r in rows], dtype=complex)


def build_system(spec: dict) -> PartialSystem:
    try:
        if spec["type"] == "sft":
            return sft(spec["transition_matrix"], spec.get("word_depth", 1))
        if spec["type"] == "finite-map":
            return finite_map(spec["phi"])
        lift_spec = spec["lift"]
        harmonics = tuple((float(a), int(k)) for a, k in lift_spec.get("harmonics", []))
        return circle_grid(spec["grid_size"], CircleLift(float(lift_spec.get("shift", 0.0)), harmonics))
    except DynamicsError as exc:
        raise ConfigError(f"config field system: {exc}") from None


def _head(items: list, k: int = 10) -> str:
    return str(items) if len(items) <= k else f"{items[:k]} ... ({len(items)} in total)"


def _keyed(values: dict, sys: PartialSystem, where: str) -> list:
    missing = [lab for lab in sys.labels if lab not in values]
    extra = sorted(set(values) - set(sys.labels))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing states {_head(missing)}")
        if extra:
            parts.append(f"unknown states {_head(extra)}")
        raise ConfigError(f"config field {where}: " + "; ".join(parts))
    return [values[lab] for lab in sys.labels]


def build_weight(spec: dict, sys: PartialSystem) -> Weight:
    if spec["type"] == "sequence":
        raise ConfigError("config field weight/type: a sequence weight only works with the shift command")
    vals = _keyed(spec["values"], sys, "weight/values")
    if spec["type"] == "scalar":
        return Weight.scalar([_cx(v) for v in vals])
    mats = [_matrix(m, f"weight/values/{lab}") for m, lab in zip(vals, sys.labels)]
    if len({m.shape for m in mats}) != 1:
        raise ConfigError("config field weight/values: all matrices must have the same size")
    return Weight(np.stack(mats))


def build_field(spec: dict, sys: PartialSystem, dim: int) -> lift.InnerField:
    vals = _keyed(spec["matrices"], sys, "field/matrices")
    mats = [_matrix(m, f"field/matrices/{lab}") for m, lab in zip(vals, sys.labels)]
    if any(m.shape != (dim, dim) for m in mats):
        raise ConfigError(f"config field field/matrices: unitaries must be {dim}x{dim} to match the weight")
    try:
        return lift.InnerField(np.stack(mats))
    except ValueError as exc:
        raise ConfigError(f"config field field/matrices: {exc}") from None


def build_sequence(spec: dict) -> ergopt.ShiftSequence:
    if spec.get("type") != "sequence":
        raise ConfigError("config field weight/type: the shift command needs a sequence weight")
    kind = spec["kind"]
    try:
        if kind == "periodic":
            return ergopt.periodic([_cx(v) for v in spec.get("period", [])])
        if kind == "eventually_periodic":
            return ergopt.eventually_periodic([_cx(v) for v in spec.get("head", [])],
                                              [_cx(v) for v in spec.get("period", [])])
        if "bound" not in spec:
            raise ConfigError("config field weight/bound: explicit sequences need a tail bound")
        return ergopt.explicit([_cx(v) for v in spec.get("terms", [])], spec["bound"])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config field weight: {exc}") from None


def parse_matrix_flag(text: str) -> list:
    """``"a,b;c,d"`` (entries may be Python complex literals like ``1+2j``)."""
    try:
        return [[_cx(complex(t.strip())) for t in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise ConfigError(f"cannot parse matrix {text!r}; expected 'a,b;c,d'") from None


# ---------------------------------------------------------------------------
# report helpers


def jsonable(x: Any) -> Any:
    """Plain JSON data; non-finite floats become 'inf' / '-inf' / 'nan' strings."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return encode_float(float(x))
    if isinstance(x, complex):
        return [encode_float(x.real), encode_float(x.imag)]
    return x


def _system_summary(sys: PartialSystem) -> dict:
    out = {"kind": sys.kind, "n_states": sys.n_states, "sampled": sys.sampled}
    if sys.kind == SFT:
        out["word_depth"] = sys.word_depth
    if sys.kind == CIRCLE:
        out["grid_size"] = sys.grid_size
    return out


def _report(command: str, estimates: list[ExponentEstimate], system=None, details=None) -> tuple[dict, int]:
    report: dict = {
        "command": command,
        "system": system,
        "estimates": [e.to_dict() for e in estimates],
        "reconciled": None,
        "r": None,
        "error": None,
    }
    if details:
        report["details"] = details
    code = 0
    if estimates:
        try:
            rec = reconcile(estimates)
            report["reconciled"] = rec.to_dict()
            report["r"] = exp_or_zero(rec.center)
        except ReconciliationError as exc:
            report["error"] = {"kind": "reconciliation", "methods": list(exc.methods), "message": str(exc)}
            code = 2
    return jsonable(report), code


# ---------------------------------------------------------------------------
# commands


def _settings(cfg: dict, command: str) -> dict:
    return {
        "n_max": cfg.get("n_max", DEFAULT_N_MAX.get(command, 200)),
        "max_len": cfg.get("max_cycle_len"),
        "fiber_samples": cfg.get("fiber_samples", 8),
        "seed": cfg.get("seed"),
        "norm": cfg.get("norm", "l2"),
    }


def _need(cfg: dict, *keys: str) -> None:
    for k in keys:
        if k not in cfg:
            raise ConfigError(f"config field {k}: required for this command")


def _run_methods(methods, w: Weight, sys: PartialSystem, s: dict) -> list[ExponentEstimate]:
    out = []
    for m in methods:
        if m == "gelfand":
            out.append(spectral_exponent(w, sys, s["n_max"], norm=s["norm"], max_len=s["max_len"]))
        elif m == "karp":
            if w.dim != 1:
                raise ConfigError("method karp needs a scalar weight")
            out.append(ergopt.commutative_vp(w, sys, s["n_max"]))
        elif m == "periodic":
            out.append(ergopt.periodic_orbit_vp(w, sys, s["max_len"], s["n_max"]))
        elif m == "extension_vp":
            out.append(projext.extension_vp(w, sys, s["n_max"], s["fiber_samples"], seed=s["seed"],
                                            max_len=s["max_len"], norm=s["norm"]))
        elif m == "limsup":
            if w.dim != 1:
                raise ConfigError("method limsup needs a scalar weight")
            out.append(measures.limsup_empirical(sys, w.log_abs(), s["n_max"], s["max_len"]))
        else:
            raise ConfigError(f"method {m} is only available through the lift command")
    return out


def _check_seed(methods, s: dict) -> None:
    if any(m in SAMPLED_METHODS for m in methods) and s["seed"] is None:
        raise ConfigError("config field seed: required when a sampled method is requested")


def cmd_exponent(cfg: dict) -> tuple[dict, int]:
    _need(cfg, "system", "weight")
    sys_ = build_system(cfg["system"])
    w = build_weight(cfg["weight"], sys_)
    if "field" in cfg:
        w = lift.effective_weight(w, build_field(cfg["field"], sys_, w.dim), sys_)
    s = _settings(cfg, "exponent")
    methods = cfg.get("methods") or (["gelfand", "karp"] if w.dim == 1 else ["gelfand", "periodic"])
    _check_seed(methods, s)
    return _report("exponent", _run_methods(methods, w, sys_, s), _system_summary(sys_))


def cmd_lift(cfg: dict) -> tuple[dict, int]:
    _need(cfg, "system", "weight", "field")
    sys_ = build_system(cfg["system"])
    a = build_weight(cfg["weight"], sys_)
    fld = build_field(cfg["field"], sys_, a.dim)
    s = _settings(cfg, "lift")
    methods = cfg.get("methods") or ["inner_field", "lift"]
    _check_seed(methods, s)
    out = []
    for m in methods:
        if m == "inner_field":
            out.append(lift.weighted_endo_radius_inner(a, fld, sys_, s["n_max"], s["max_len"], s["norm"]))
        elif m == "lift":
            try:
                lifted = lift.lift_to_BD(a, fld, sys_)
            except DynamicsError as exc:
                raise ConfigError(f"config field system: {exc}") from None
            est = spectral_exponent(lifted, sys_, s["n_max"], norm=s["norm"], max_len=s["max_len"])
            out.append(ExponentEstimate(est.lower, est.upper, "lift", est.exactness, est.n_used,
                                        est.witness, est.estimate, est.meta))
        else:
            out.extend(_run_methods([m], lift.effective_weight(a, fld, sys_), sys_, s))
    return _report("lift", out, _system_summary(sys_))


def cmd_oracle(cfg: dict) -> tuple[dict, int]:
    _need(cfg, "system", "weight")
    sys_ = build_system(cfg["system"])
    w = build_weight(cfg["weight"], sys_)
    if w.dim != 1:
        raise ConfigError("config field weight: the oracle command needs a scalar weight")
    s = _settings(cfg, "oracle")
    core = essential_domain(sys_, w.support)
    g = ergopt.WordGraph.from_system(sys_, w.log_abs(), restrict=core)
    karp, cyc = ergopt.karp_max_mean_cycle(g)
    oracle = ergopt.cycle_enumeration_oracle(g, max(s["max_len"] or 0, g.n_nodes))
    agree = karp == oracle or abs(karp - oracle) <= 1e-12 * (1 + abs(oracle))
    details = {
        "karp": karp,
        "oracle": oracle,
        "difference": 0.0 if karp == oracle else abs(karp - oracle),
        "witness": [sys_.labels[x] for x in cyc] if cyc else None,
        "agree": agree,
    }
    est = ExponentEstimate(karp, karp, "karp", "sampled" if sys_.sampled else "exact",
                           witness=details["witness"], estimate=karp)
    report, code = _report("oracle", [est], _system_summary(sys_), details)
    if not agree:
        report["error"] = {"kind": "oracle-mismatch", "methods": ["karp", "cycle_enumeration"],
                           "message": f"karp {karp!r} != enumeration {oracle!r}"}
        code = 2
    return report, code


def cmd_mobius(cfg: dict) -> tuple[dict, int]:
    _need(cfg, "matrix")
    M = _matrix(cfg["matrix"], "matrix")
    if M.shape != (2, 2):
        raise ConfigError("config field matrix: the mobius command needs a 2x2 matrix")
    try:
        r, rep = projext.mobius_spectral_radius(M[0, 0], M[0, 1], M[1, 0], M[1, 1])
    except ValueError as exc:
        raise ConfigError(f"config field matrix: {exc}") from None
    lam = math.log(r) if r > 0 else -math.inf
    est = ExponentEstimate(lam, lam, "mobius", "exact", witness=None, estimate=lam)
    return _report("mobius", [est], None, projext.mobius_report_json(rep))


def cmd_shift(cfg: dict) -> tuple[dict, int]:
    _need(cfg, "weight")
    seq = build_sequence(cfg["weight"])
    s = _settings(cfg, "shift")
    est = ergopt.classical_shift_radius(seq, s["n_max"])
    details = {"finite_n_rate": ergopt.sup_product_rate(seq, s["n_max"]), "n": s["n_max"]}
    return _report("shift", [est], None, details)


def cmd_validate(cfg: dict) -> tuple[dict, int]:
    details: dict = {"valid": True}
    if "system" in cfg:
        sys_ = build_system(cfg["system"])
        details["system"] = _system_summary(sys_)
        if "weight" in cfg and cfg["weight"]["type"] != "sequence":
            w = build_weight(cfg["weight"], sys_)
            details["weight_dim"] = w.dim
            if "field" in cfg:
                build_field(cfg["field"], sys_, w.dim)
    if "weight" in cfg and cfg["weight"]["type"] == "sequence":
        build_sequence(cfg["weight"])
    if "matrix" in cfg:
        _matrix(cfg["matrix"], "matrix")
    return _report("validate", [], None, details)


DISPATCH = {
    "exponent": cmd_exponent,
    "oracle": cmd_oracle,
    "mobius": cmd_mobius,
    "shift": cmd_shift,
    "lift": cmd_lift,
    "validate": cmd_validate,
}


def run(command: str, cfg: dict) -> tuple[dict, int]:
    """Validate ``cfg`` and execute ``command``; returns ``(report, exit_code)``."""
    if command not in DISPATCH:
        raise ConfigError(f"unknown command {command!r}")
    validate_config(cfg)
    return DISPATCH[command](cfg)


# ---------------------------------------------------------------------------
# output


def dumps_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def dumps_csv(report: dict) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    rows = list(report.get("estimates") or [])
    if report.get("reconciled") and len(rows) > 1:
        rows.append(report["reconciled"])
    for e in rows:
        wr.writerow([
            e["method"], e["lower"], e["upper"], e["r_lower"], e["r_upper"], e["n_used"],
            e["exactness"], json.dumps(e["witness"], sort_keys=True),
        ])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specrad", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--method", help="comma-separated methods: " + ",".join(METHODS))
    p.add_argument("--n-max", type=int)
    p.add_argument("--max-cycle-len", type=int)
    p.add_argument("--fiber-samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--norm", choices=("l1", "l2", "linf"))
    p.add_argument("--matrix", help="2x2 matrix for mobius, e.g. '2,0;0,1'")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    p.add_argument("--threads", type=int, default=1, help="worker threads (computations are sequential; default 1)")
    return p


def _merge_flags(cfg: dict, args: argparse.Namespace) -> dict:
    cfg = dict(cfg)
    if args.method:
        cfg["methods"] = [m.strip() for m in args.method.split(",") if m.strip()]
    for flag, key in (("n_max", "n_max"), ("max_cycle_len", "max_cycle_len"),
                      ("fiber_samples", "fiber_samples"), ("seed", "seed"), ("norm", "norm")):
        val = getattr(args, flag)
        if val is not None:
            cfg[key] = val
    if args.matrix:
        cfg["matrix"] = jsonable(parse_matrix_flag(args.matrix))
    if args.fmt:
        cfg["output"] = args.fmt
    return cfg


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("SPECRAD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg: dict = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(cfg, dict):
                raise ConfigError("config field <root>: must be a JSON object")
        cfg = _merge_flags(cfg, args)
        report, code = run(args.command, cfg)
    except ConfigError as exc:
        print(f"specrad: {exc}", file=sys.stderr)
        return 1
    out = dumps_csv(report) if cfg.get("output") == "csv" else dumps_json(report)
    sys.stdout.write(out)
    if code == 2:
        print(f"specrad: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
