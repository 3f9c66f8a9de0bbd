"""Command-line front end.

Subcommands: calibrate, analyze, verify, flow, export-abstract.  Settings come
from an optional YAML file (``--config``) with command-line flags taking
precedence.  Reports are deterministic JSON.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .bubbles import calibration_summary, green_normalization, profiles_csv, sample_H_profile
from .cr_sphere import FAMILIES, CriticalSearchConfig, GreenData, check_C0, find_critical_points
from .criterion import SCHEMA_VERSION, AbstractCriticalData, from_records, run_criterion
from .errors import (
    C0ViolationError,
    C1ViolationError,
    CapExceededError,
    ConfigurationError,
    ConventionError,
    CoverageWarning,
    CRWebsterError,
    IncompleteInputError,
    InputError,
    InternalConsistencyError,
    FlowIntegrationError,
    PoleError,
    QuadratureError,
)
from .expression import parse_K
from .reduced_flow import AT_INFINITY, FlowConfig, classify_tuple
from .verification import run_suites, SUITES

log = logging.getLogger("cr_webster")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_C0 = 3
EXIT_C1 = 4
EXIT_CALIBRATION = 5
EXIT_CONSISTENCY = 6
EXIT_VERIFY = 7


@dataclass
class RunConfig:
    mode: str = "geometric"
    k_expr: str | None = None
    k_family: dict | None = None
    data: str | None = None
    seed: int = 0
    starts: int = 200
    refine: tuple = (32, 64, 128)
    grad_tol: float = 1e-10
    degeneracy_tol: float = 1e-6
    margin_tol: float = 1e-8
    eig_tol: float = 1e-8
    quad_rtol: float = 1e-4
    cap: int = 20
    out: str | None = None
    csv: str | None = None
    tuples: list = field(default_factory=list)
    samples: int = 201
    suites: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("geometric", "abstract"):
            raise ConfigurationError(f"mode must be 'geometric' or 'abstract', got {self.mode!r}")
        for name in ("grad_tol", "degeneracy_tol", "margin_tol", "eig_tol", "quad_rtol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigurationError(f"{name} must be positive, got {v!r}")
        self.refine = tuple(int(n) for n in self.refine)
        if len(self.refine) < 2 or any(n <= 0 for n in self.refine):
            raise ConfigurationError("refine needs at least two positive levels")
        if self.starts <= 0 or self.samples < 2 or self.cap <= 0:
            raise ConfigurationError("starts, samples and cap must be positive")

    def report_view(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("out", "csv"):
            d.pop(k)
        d["refine"] = list(self.refine)
        return d


def _levels(text: str) -> tuple:
    try:
        return tuple(int(s) for s in str(text).split(","))
    except ValueError:
        raise ConfigurationError(f"--refine expects comma-separated integers, got {text!r}") from None


def load_config(args) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as e:
            raise InputError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(doc, dict):
            raise InputError("config file must be a mapping")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for name in ("mode", "k_expr", "data", "seed", "out", "csv", "samples"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "refine", None) is not None:
        values["refine"] = _levels(args.refine)
    elif isinstance(values.get("refine"), str):
        values["refine"] = _levels(values["refine"])
    if getattr(args, "tuple", None):
        values["tuples"] = [t.split(",") for t in args.tuple]
    if getattr(args, "suite", None):
        values["suites"] = list(args.suite)
    try:
        return RunConfig(**values)
    except TypeError as e:
        raise ConfigurationError(str(e)) from None


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# pipelines


def curvature_from_config(cfg: RunConfig):
    if cfg.k_expr and cfg.k_family:
        raise ConfigurationError("give either k_expr or k_family, not both")
    if cfg.k_expr:
        return parse_K(cfg.k_expr, seed=cfg.seed)
    if cfg.k_family:
        fam = dict(cfg.k_family)
        name = fam.pop("name", None)
        if name not in FAMILIES:
            raise ConfigurationError(f"unknown K family {name!r}; choose from {sorted(FAMILIES)}")
        try:
            return FAMILIES[name](**fam)
        except TypeError as e:
            raise ConfigurationError(f"bad parameters for family {name!r}: {e}") from None
    raise InputError("geometric mode needs --k-expr or a k_family in the config")


def geometric_pipeline(cfg: RunConfig):
    """Critical points of K and their abstract twin; warnings are collected, not printed."""
    K = curvature_from_config(cfg)
    search = CriticalSearchConfig(starts=cfg.starts, grad_tol=cfg.grad_tol, degeneracy_tol=cfg.degeneracy_tol,
                                  seed=cfg.seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CoverageWarning)
        records = find_critical_points(K, search)
    notes = [str(w.message) for w in caught if issubclass(w.category, CoverageWarning)]
    c0 = check_C0(records, cfg.margin_tol)
    if not c0.passed:
        bad = [r for r in records if r.degenerate or not abs(r.kplus_margin) > cfg.margin_tol]
        raise C0ViolationError("; ".join(c0.violations), bad)
    data = from_records(records, GreenData(green_normalization()))
    return K, records, data, notes, c0


def abstract_input(cfg: RunConfig) -> AbstractCriticalData:
    if not cfg.data:
        raise InputError("abstract mode needs --data")
    return AbstractCriticalData.load(cfg.data)


def flow_section(data, run, cfg: RunConfig, selected=None) -> list:
    """Flow verdicts for every diagonalized tuple (or ``selected``) with agreement flags."""
    fcfg = FlowConfig(samples=cfg.samples)
    by_key = {tuple(sorted(v.labels)): v for v in run.verdicts}
    targets = [tuple(t) for t in selected] if selected else [v.labels for v in run.verdicts if not v.pruned]
    out = []
    for labels in targets:
        key = tuple(sorted(labels))
        if key not in by_key:
            raise InputError(f"tuple {list(labels)} is not a subset of K+ {run.kplus}")
        verdict, traj = classify_tuple(data, labels, cfg=fcfg, rel_tol=cfg.eig_tol)
        out.append({"labels": list(labels), "classification": verdict, "terminal": traj.classification,
                    "terminal_norm": traj.terminal_norm, "s_end": traj.s_end,
                    "in_F1": by_key[key].in_F1, "agrees": (verdict == AT_INFINITY) == by_key[key].in_F1,
                    "_trajectory": traj})
    return out


def analyze_report(cfg: RunConfig) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": "analyze", "version": __version__,
           "config": cfg.report_view(), "calibration": calibration_summary(cfg.refine)}
    if cfg.mode == "geometric":
        K, records, data, notes, c0 = geometric_pipeline(cfg)
        doc["curvature"] = K.descriptor
        doc["critical_points"] = [r.as_dict() for r in records]
        doc["C0"] = c0.as_dict()
        doc["warnings"] = notes
    else:
        data = abstract_input(cfg)
    run = run_criterion(data, cap=cfg.cap, rel_tol=cfg.eig_tol, margin_tol=cfg.margin_tol)
    doc["criterion"] = run.as_dict()
    flows = flow_section(data, run, cfg)
    for f in flows:
        f.pop("_trajectory")
    doc["flow"] = flows
    if not all(f["agrees"] for f in flows):
        raise InternalConsistencyError("flow classification disagrees with the spectral verdict")
    doc["conclusion"] = (run.general or run.main).conclusion
    doc["status"] = "ok"
    return doc


# --------------------------------------------------------------------------
# commands


def cmd_calibrate(cfg: RunConfig) -> int:
    doc = {"schema_version": SCHEMA_VERSION, "command": "calibrate", "version": __version__,
           "calibration": calibration_summary(cfg.refine)}
    emit(dumps(doc), cfg.out)
    return EXIT_OK


def cmd_analyze(cfg: RunConfig) -> int:
    emit(dumps(analyze_report(cfg)), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    names = cfg.suites or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigurationError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    checks = run_suites(names)
    doc = {"schema_version": SCHEMA_VERSION, "command": "verify", "version": __version__,
           "calibration": calibration_summary(cfg.refine), "checks": [c.as_dict() for c in checks],
           "passed": all(c.passed for c in checks)}
    if cfg.csv:
        emit(profiles_csv([sample_H_profile(l) for l in (10.0, 20.0, 40.0, 80.0)]), cfg.csv)
    emit(dumps(doc), cfg.out)
    for c in checks:
        log.info("%s: %s", c.name, "PASS" if c.passed else "FAIL")
    return EXIT_OK if doc["passed"] else EXIT_VERIFY


def cmd_flow(cfg: RunConfig) -> int:
    if cfg.mode == "geometric":
        _, _, data, _, _ = geometric_pipeline(cfg)
    else:
        data = abstract_input(cfg)
    run = run_criterion(data, cap=cfg.cap, rel_tol=cfg.eig_tol, margin_tol=cfg.margin_tol)
    flows = flow_section(data, run, cfg, cfg.tuples or None)
    if cfg.csv:
        os.makedirs(cfg.csv, exist_ok=True)
    for f in flows:
        traj = f.pop("_trajectory")
        if cfg.csv:
            path = os.path.join(cfg.csv, "flow_" + "_".join(f["labels"]) + ".csv")
            emit(traj.to_csv(), path)
            f["csv"] = os.path.basename(path)
    agrees = all(f["agrees"] for f in flows)
    doc = {"schema_version": SCHEMA_VERSION, "command": "flow", "version": __version__, "flow": flows,
           "agrees": agrees}
    emit(dumps(doc), cfg.out)
    return EXIT_OK if agrees else EXIT_CONSISTENCY


def cmd_export_abstract(cfg: RunConfig) -> int:
    if cfg.mode != "geometric":
        raise ConfigurationError("export-abstract converts a geometric run; use --mode geometric")
    _, _, data, _, _ = geometric_pipeline(cfg)
    emit(data.dump(), cfg.out)
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "flow": cmd_flow,
    "export-abstract": cmd_export_abstract,
}


def _exit_code(err: Exception) -> int:
    if isinstance(err, C0ViolationError):
        return EXIT_C0
    if isinstance(err, C1ViolationError):
        return EXIT_C1
    if isinstance(err, (ConventionError, QuadratureError)):
        return EXIT_CALIBRATION
    if isinstance(err, (InternalConsistencyError, FlowIntegrationError)):
        return EXIT_CONSISTENCY
    if isinstance(err, (InputError, ConfigurationError, IncompleteInputError, PoleError, CapExceededError)):
        return EXIT_INPUT
    return EXIT_INPUT


def _failure_doc(command: str, err: Exception) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "status": "failed",
           "error_type": type(err).__name__, "error": str(err)}
    if isinstance(err, C0ViolationError):
        doc["offending"] = [r.as_dict() if hasattr(r, "as_dict") else dataclasses.asdict(r) for r in err.offending]
    if isinstance(err, C1ViolationError):
        doc["offending"] = {"labels": list(err.labels), "rho": err.rho}
    return doc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--mode", choices=("geometric", "abstract"))
    common.add_argument("--k-expr", dest="k_expr", help="K as an expression in x1, y1, x2, y2")
    common.add_argument("--data", help="abstract critical-point data (YAML)")
    common.add_argument("--seed", type=int)
    common.add_argument("--refine", help="quadrature levels, e.g. 32,64,128")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cr-webster", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="calibrate c1, S, c2 and related constants")
    sub.add_parser("analyze", parents=[common], help="run the existence criterion")
    p = sub.add_parser("verify", parents=[common], help="bubble, Green and expansion checks")
    p.add_argument("--suite", action="append", help=f"run only this suite ({', '.join(SUITES)})")
    p.add_argument("--csv", help="write sampled H profiles to this CSV file")
    p = sub.add_parser("flow", parents=[common], help="reduced flow trajectories")
    p.add_argument("--tuple", action="append", help="comma-separated labels; repeatable (default: all)")
    p.add_argument("--csv", help="directory for trajectory CSV files")
    p.add_argument("--samples", type=int, help="rows per trajectory CSV")
    sub.add_parser("export-abstract", parents=[common], help="write geometric critical data as an abstract file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except CRWebsterError as err:
        code = _exit_code(err)
        sys.stderr.write(f"error ({type(err).__name__}): {err}\n")
        out = cfg.out if cfg is not None else None
        if out or code in (EXIT_C0, EXIT_C1):
            emit(dumps(_failure_doc(args.command, err)), out)
        return code


if __name__ == "__main__":
    sys.exit(main())
