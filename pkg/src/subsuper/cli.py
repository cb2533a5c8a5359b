"""Command line front end: ``subsuper solve problem.json --out results/``.

Exit codes: 0 solved, 1 configuration or expression error, 2 a hypothesis or
certificate failed, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, DomainError, HypothesisError
from .exprlang import ExprEvalError, ExprSyntaxError, parse
from .gridfn import Certificate
from .hammerstein import ScanConfig
from .pipeline import PIPELINES

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 1, 2, 3
STATUS = {EXIT_OK: "solved", EXIT_CONFIG: "config_error",
          EXIT_HYPOTHESIS: "hypothesis_failed", EXIT_NUMERIC: "not_converged"}

_COMMON = {"method", "f", "grid", "scan", "tolerances", "overrides"}
_METHOD_KEYS = {
    "hammerstein": {"kernel", "phi", "symmetric"},
    "hammerstein_dual": {"kernel", "phi", "symmetric"},
    "p_laplace": {"p", "D"},
}
_REQUIRED = {
    "hammerstein": {"kernel", "f"},
    "hammerstein_dual": {"kernel", "f", "overrides"},
    "p_laplace": {"p", "f"},
}
_OVERRIDES = {
    "hammerstein": {"r", "R", "mu", "alpha"},
    "hammerstein_dual": {"R", "mu", "alpha"},
    "p_laplace": {"r", "R"},
}
_TOLERANCES = {"eig_tol": 1e-12, "fp_tol": 1e-10, "c_tol": 1e-12, "max_iter": 100_000}


@dataclass
class ProblemConfig:
    method: str
    f: str
    kernel: str | None = None
    symmetric: bool = True
    phi: str = "sup"
    p: float | None = None
    D: tuple = (0.25, 0.75)
    n: int = 201
    rule: str = "simpson"
    scan: ScanConfig = field(default_factory=ScanConfig)
    eig_tol: float = 1e-12
    fp_tol: float = 1e-10
    c_tol: float = 1e-12
    max_iter: int = 100_000
    overrides: dict = field(default_factory=dict)

    def as_dict(self):
        d = {"method": self.method, "f": self.f}
        if self.kernel is not None:
            d.update(kernel=self.kernel, symmetric=self.symmetric, phi=self.phi)
        if self.p is not None:
            d.update(p=self.p, D=list(self.D))
        d.update(grid={"n": self.n, "rule": self.rule}, scan=self.scan.as_dict(),
                 tolerances={"eig_tol": self.eig_tol, "fp_tol": self.fp_tol,
                             "c_tol": self.c_tol, "max_iter": self.max_iter},
                 overrides=dict(self.overrides))
        return d


def _number(value, name, positive=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{name} must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return value


def _keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(extra)}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"missing field(s) in {where}: {sorted(missing)}")


def config_from_dict(raw):
    _keys(raw, _COMMON | set().union(*_METHOD_KEYS.values()), "config", {"method"})
    method = raw["method"]
    if method not in PIPELINES:
        raise ConfigError(f"method must be one of {sorted(PIPELINES)}, got {method!r}")
    _keys(raw, _COMMON | _METHOD_KEYS[method], f"config for method {method!r}", _REQUIRED[method])
    cfg = ProblemConfig(method=method, f=raw["f"])

    for key, variables in (("f", {"u"}), ("kernel", {"t", "s"})):
        if key in raw:
            if not isinstance(raw[key], str):
                raise ConfigError(f"{key} must be an expression string")
            try:
                parse(raw[key], variables)
            except ExprSyntaxError as exc:
                raise ExprSyntaxError(f"{key}: {exc.args[0].rsplit(' at byte', 1)[0]}",
                                      exc.offset, exc.src) from None
    cfg.kernel = raw.get("kernel")
    if "symmetric" in raw:
        if not isinstance(raw["symmetric"], bool):
            raise ConfigError("symmetric must be true or false")
        cfg.symmetric = raw["symmetric"]
    if "phi" in raw:
        if raw["phi"] not in ("sup", "integral"):
            raise ConfigError(f"phi must be 'sup' or 'integral', got {raw['phi']!r}")
        cfg.phi = raw["phi"]
    if "p" in raw:
        cfg.p = _number(raw["p"], "p")
        if cfg.p <= 1:
            raise ConfigError(f"p must exceed 1, got {cfg.p}")
    if method == "p_laplace":
        D = raw.get("D", [0.25, 0.75])
        if not (isinstance(D, list) and len(D) == 2):
            raise ConfigError("D must be a list [a, b]")
        a, b = (_number(x, "D endpoint") for x in D)
        if not 0 < a < b < 1:
            raise ConfigError(f"D = [{a}, {b}] must satisfy 0 < a < b < 1")
        cfg.D = (a, b)

    grid = raw.get("grid", {})
    _keys(grid, {"n", "rule"}, "grid")
    if "n" in grid:
        if not isinstance(grid["n"], int) or isinstance(grid["n"], bool):
            raise ConfigError("grid.n must be an integer")
        cfg.n = grid["n"]
    cfg.rule = grid.get("rule", cfg.rule)

    scan = raw.get("scan", {})
    _keys(scan, {"t_min", "t_max", "points_per_decade"}, "scan")
    try:
        cfg.scan = ScanConfig(**{k: _number(v, f"scan.{k}") for k, v in scan.items()})
    except DomainError as exc:
        raise ConfigError(str(exc)) from None

    tol = raw.get("tolerances", {})
    _keys(tol, set(_TOLERANCES), "tolerances")
    for k, v in tol.items():
        setattr(cfg, k, int(_number(v, f"tolerances.{k}")) if k == "max_iter" else _number(v, k))

    ov = raw.get("overrides", {})
    _keys(ov, _OVERRIDES[method], "overrides",
          _OVERRIDES[method] if method == "hammerstein_dual" else ())
    cfg.overrides = {k: _number(v, f"overrides.{k}") for k, v in ov.items()}
    return cfg


def load_config(path, n=None, fp_tol=None):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    cfg = config_from_dict(raw)
    if n is not None:
        cfg.n = n
    if fp_tol is not None:
        cfg.fp_tol = _number(fp_tol, "--fp-tol")
    return cfg


def _plain(obj):
    """Convert to JSON-safe builtins; non-finite floats become strings."""
    if isinstance(obj, Certificate):
        return _plain(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def emit_report(report, columns, out_dir):
    """Write report.json and, when columns are given, functions.csv into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_plain(report), indent=2, allow_nan=False))
        fh.write("\n")
    if columns:
        names = list(columns)
        rows = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
        with open(os.path.join(out_dir, "functions.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(names) + "\n")
            for row in rows:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def run(config_path, out_dir, n=None, fp_tol=None):
    report = {"status": None, "exit_code": None}
    info, log, columns = {}, [], None
    try:
        cfg = load_config(config_path, n, fp_tol)
        report["config"] = cfg.as_dict()
        _, columns = PIPELINES[cfg.method](cfg, info, log)
        code = EXIT_OK
    except (ConfigError, ExprEvalError, DomainError) as exc:
        code = EXIT_CONFIG
        report["message"] = str(exc)
        if isinstance(exc, ExprSyntaxError):
            report["offset"] = exc.offset
    except HypothesisError as exc:
        code = EXIT_HYPOTHESIS
        report.update(message=str(exc), failed_hypothesis=exc.hypothesis, margin=exc.margin,
                      worst_node=exc.worst_node)
    except ConvergenceError as exc:
        code = EXIT_NUMERIC
        report.update(message=str(exc), last_residual=exc.residual, iterations=exc.iterations)
    report.update(status=STATUS[code], exit_code=code)
    report.update(info)
    report["hypothesis_log"] = log
    emit_report(report, columns, out_dir)
    if code != EXIT_OK:
        print(f"subsuper: {report['status']}: {report['message']}", file=sys.stderr)
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(prog="subsuper", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="solve the problem described by a JSON config")
    solve.add_argument("config")
    solve.add_argument("--out", required=True, help="output directory (created if missing)")
    solve.add_argument("--n", type=int, default=None, help="override grid.n")
    solve.add_argument("--fp-tol", type=float, default=None, help="override tolerances.fp_tol")
    args = parser.parse_args(argv)
    return run(args.config, args.out, args.n, args.fp_tol)


if __name__ == "__main__":
    sys.exit(main())
