"""Scenario files and the ``feasolve`` command line.

Commands
--------
``run <scenario.json>``     iterate one lambda, write trace CSV and summary JSON
``sweep <scenario.json>``   the same for every lambda in a list
``verify <scenario.json>``  run, then check the fixed-point and shadow properties
``budget <params.json>``    evaluate the regularity / rate constants

Exit codes: 0 success, 1 malformed input or a failed check, 2 max_iters
reached, 3 divergence guard tripped.  ``FEAS_LOG`` (quiet, info, debug)
sets stderr verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, diagnostics
from .engine import DivergenceError, StopCriteria, StopReason, detect_orbit, iterate, residual, write_trace_csv
from .geometry import AFFINE_KINDS, GeometryError, set_from_dict
from .operators import CycleOp

log = logging.getLogger("feasolve")

SCHEMA = "feasolve/1"
EXIT_OK, EXIT_INPUT, EXIT_MAX_ITERS, EXIT_DIVERGED = 0, 1, 2, 3
ORBIT_WINDOW = 20
FIXED_TOL = 1e-8
LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class ScenarioError(ValueError):
    """Malformed scenario; `where` names the offending field."""

    def __init__(self, where, msg):
        super().__init__(f"{where}: {msg}")
        self.where = where


def _real(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(where, f"expected a finite number, got {v!r}")
    return float(v)


def _lambdas(raw):
    vals = raw if isinstance(raw, list) else [raw]
    out = [_real(v, "lambda") for v in vals]
    for v in out:
        if not 0.0 <= v <= 1.0:
            raise ScenarioError("lambda", f"must lie in [0, 1], got {v}")
    return out


@dataclass
class Scenario:
    name: str
    dimension: int
    sets: list
    lam: float | list
    x0: list | str
    seed: int = 0
    stop: StopCriteria = field(default_factory=StopCriteria)
    outputs: dict = field(default_factory=lambda: {"trace_csv": "trace.csv", "summary_json": "summary.json"})
    verify: dict | None = None

    @property
    def lambdas(self):
        return _lambdas(self.lam)

    def initial_point(self):
        if isinstance(self.x0, str):
            rng = np.random.default_rng(self.seed)
            return rng.uniform(-1.0, 1.0, self.dimension)
        return np.asarray(self.x0, dtype=float)

    def to_dict(self):
        d = {
            "name": self.name,
            "dimension": self.dimension,
            "sets": [S.to_dict() for S in self.sets],
            "lambda": self.lam,
            "x0": self.x0,
            "seed": self.seed,
            "stop": self.stop.to_dict(),
            "outputs": dict(self.outputs),
        }
        if self.verify is not None:
            d["verify"] = self.verify
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ScenarioError("<root>", "scenario must be a JSON object")
        for key in ("dimension", "sets", "lambda", "x0"):
            if key not in d:
                raise ScenarioError(key, "missing")
        dim = d["dimension"]
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
            raise ScenarioError("dimension", f"expected a positive integer, got {dim!r}")
        if not isinstance(d["sets"], list) or len(d["sets"]) < 2:
            raise ScenarioError("sets", "need a list of at least two sets")
        sets = []
        for i, sd in enumerate(d["sets"]):
            try:
                S = set_from_dict(sd)
            except (GeometryError, KeyError, TypeError, ValueError) as exc:
                raise ScenarioError(f"sets[{i}]", str(exc)) from None
            if S.dim != dim:
                raise ScenarioError(f"sets[{i}]", f"dimension {S.dim} does not match {dim}")
            sets.append(S)
        lam = d["lambda"]
        if isinstance(lam, list) and not lam:
            raise ScenarioError("lambda", "empty list")
        _lambdas(lam)
        x0 = d["x0"]
        if isinstance(x0, str):
            if x0 != "random":
                raise ScenarioError("x0", f"expected a point or \"random\", got {x0!r}")
        elif isinstance(x0, list):
            x0 = [_real(v, "x0") for v in x0]
            if len(x0) != dim:
                raise ScenarioError("x0", f"has {len(x0)} coordinates, expected {dim}")
        else:
            raise ScenarioError("x0", "expected a list of numbers or \"random\"")
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ScenarioError("seed", "expected an unsigned 64-bit integer")
        stop_d = d.get("stop", {})
        if not isinstance(stop_d, dict):
            raise ScenarioError("stop", "expected an object")
        known = set(StopCriteria().to_dict())
        for k in stop_d:
            if k not in known:
                raise ScenarioError(f"stop.{k}", "unknown field")
        try:
            stop = StopCriteria(**stop_d)
        except (TypeError, ValueError) as exc:
            raise ScenarioError("stop", str(exc)) from None
        outputs = {"trace_csv": "trace.csv", "summary_json": "summary.json"}
        outputs.update(d.get("outputs", {}))
        verify = d.get("verify")
        if verify is not None and not isinstance(verify, dict):
            raise ScenarioError("verify", "expected an object")
        return cls(d.get("name", "scenario"), dim, sets, lam, x0, seed, stop, outputs, verify)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError("<file>", str(exc)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    return Scenario.from_dict(raw)


# -- single runs ------------------------------------------------------------


def _trace_path(base, lam, multi):
    p = Path(base)
    if multi:
        p = p.with_name(f"{p.stem}_lam{lam:g}{p.suffix}")
    return p


def _fit(residuals):
    try:
        return diagnostics.fit_rate(residuals).to_dict()
    except diagnostics.InsufficientDataError:
        return None


def _shadow_digest(sets, lam, x):
    if not all(S.kind in AFFINE_KINDS for S in sets):
        return None
    op = CycleOp(sets, lam)
    if residual(op, x) > FIXED_TOL:
        return None
    return analysis.verify_shadow_affine(sets, lam, x, FIXED_TOL).digest()


def run_one(sc: Scenario, lam, x0, out_dir, multi=False):
    """Iterate one lambda; returns ``(record, trace, exit_code)``."""
    op = CycleOp(sc.sets, lam)
    rel = _trace_path(sc.outputs["trace_csv"], lam, multi)
    path = Path(out_dir) / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        trace = iterate(op, x0, sc.stop)
        code = EXIT_MAX_ITERS if trace.stop_reason is StopReason.MAX_ITERS else EXIT_OK
        stop = trace.stop_reason.value
    except DivergenceError as exc:
        log.error("lambda=%g diverged: %s", lam, exc)
        trace, code, stop = exc.trace, EXIT_DIVERGED, "diverged"
    write_trace_csv(trace, path)
    x = trace.final
    record = {
        "lambda": lam,
        "iterations": trace.iterations,
        "stop_reason": stop,
        "final_point": x.tolist(),
        "final_residual": trace.residuals[-1],
        "final_gap": trace.gaps[-1],
        "fitted_rate": _fit(trace.residuals),
        "orbit": None,
        "characterization": None,
        "shadow_check": None,
        "multivalued_hit": trace.multivalued_hit,
        "trace_csv": str(rel),
    }
    if trace.iterations >= 1:
        w = min(ORBIT_WINDOW, trace.iterations)
        orb = detect_orbit(trace, w, sc.stop.shadow_tol or 1e-10)
        record["orbit"] = {
            "is_orbit": orb.is_orbit,
            "mean_step": orb.mean_step,
            "step_variation": orb.step_variation,
            "shadow_final_diff": orb.shadow_final_diff,
            "window": orb.window,
            "heuristic": orb.heuristic,
        }
    if code != EXIT_DIVERGED:
        record["characterization"] = analysis.characterize_fixed_point(sc.sets, lam, x, FIXED_TOL).digest()
        record["shadow_check"] = _shadow_digest(sc.sets, lam, x)
    log.info("lambda=%g: %s after %d iterations, residual %.3g", lam, stop, trace.iterations, record["final_residual"])
    return record, trace, code


def _combine(codes):
    for c in (EXIT_DIVERGED, EXIT_MAX_ITERS, EXIT_INPUT):
        if c in codes:
            return c
    return EXIT_OK


def _write_summary(sc, out_dir, command, records, extra=None):
    doc = {"schema": SCHEMA, "command": command, "scenario": sc.name, "records": records}
    if extra:
        doc.update(extra)
    path = Path(out_dir) / sc.outputs["summary_json"]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def cmd_run(sc: Scenario, out_dir):
    lams = sc.lambdas
    if len(lams) != 1:
        raise ScenarioError("lambda", "run takes a single value; use sweep for a list")
    rec, _, code = run_one(sc, lams[0], sc.initial_point(), out_dir)
    _write_summary(sc, out_dir, "run", [rec])
    return code


def cmd_sweep(sc: Scenario, out_dir):
    lams = sc.lambdas
    distinct = list(dict.fromkeys(lams))
    if len(distinct) < len(lams):
        log.warning("duplicate lambda values removed: %s -> %s", lams, distinct)
    if len(distinct) < 2:
        raise ScenarioError("lambda", "sweep needs at least two distinct values")
    x0 = sc.initial_point()
    records, codes = [], []
    for lam in distinct:
        rec, _, code = run_one(sc, lam, x0, out_dir, multi=True)
        records.append(rec)
        codes.append(code)
    _write_summary(sc, out_dir, "sweep", records)
    return _combine(codes)


def _check(name, passed, **values):
    return {"check": name, "pass": bool(passed), **values}


def verify_checks(sc: Scenario, lam, x):
    """Every applicable property check at the converged point `x`."""
    sets = sc.sets
    cfg = sc.verify or {}
    out = []
    rep = analysis.characterize_fixed_point(sets, lam, x, FIXED_TOL)
    ok = rep.is_fixed and rep.representation_residual <= FIXED_TOL
    if lam < 1.0:
        ok = ok and abs(rep.coefficient_sum - 1.0) <= 1e-12
    if lam <= 0.5:
        ok = ok and rep.convex_combination and rep.p_terms_in_sets
    out.append(_check("characterization", ok, **rep.digest()))

    if all(S.kind in AFFINE_KINDS for S in sets):
        sh = analysis.verify_shadow_affine(sets, lam, x, FIXED_TOL)
        out.append(_check("affine_shadow", sh.holds, **sh.digest()))

    if "common_point" in cfg:
        cp = np.asarray(cfg["common_point"], dtype=float)
        r = residual(CycleOp(sets, lam), cp)
        out.append(_check("intersection_fixed", r <= 1e-12, residual=r))
        g = diagnostics.gap_at(sets, x).total
        out.append(_check("consistent_gap", g <= 1e-8, final_gap=g))

    if "eps_bar" in cfg:
        eps_bar = cfg["eps_bar"]
        m = len(sets)
        eps_bar = eps_bar if isinstance(eps_bar, list) else [eps_bar] * m
        anchors = [S.project(x).point for S in sets]
        budget = analysis.affine_approx_budget(sets, anchors, eps_bar, cfg.get("eps_U"))
        af = analysis.verify_shadow_almost_fixed(sets, lam, x, budget, FIXED_TOL)
        out.append(_check("almost_fixed_budget", af.holds, **af.digest(), budget=budget.to_dict()))
    return out


def cmd_verify(sc: Scenario, out_dir):
    x0 = sc.initial_point()
    records, codes = [], []
    for lam in dict.fromkeys(sc.lambdas):
        rec, _, code = run_one(sc, lam, x0, out_dir, multi=len(sc.lambdas) > 1)
        if code == EXIT_OK:
            try:
                rec["checks"] = verify_checks(sc, lam, np.asarray(rec["final_point"]))
            except (GeometryError, ValueError) as exc:
                rec["checks"] = [_check("setup", False, error=str(exc))]
            if not all(c["pass"] for c in rec["checks"]):
                code = EXIT_INPUT
        else:
            rec["checks"] = []
        records.append(rec)
        codes.append(code)
    _write_summary(sc, out_dir, "verify", records)
    for rec in records:
        for c in rec["checks"]:
            log.info("lambda=%g %s: %s", rec["lambda"], c["check"], "PASS" if c["pass"] else "FAIL")
    return _combine(codes)


# -- budget calculator ------------------------------------------------------


def budget_report(params: dict) -> dict:
    """Regularity chain from ``eps_U``, ``lambda``, ``kappa`` (and ``m`` for scalar ``eps_U``).

    Optional blocks: ``approx`` {``eps_U``, ``shapiro_k``, ``eps_bar``} for the
    tangent-approximation radius, and ``composed_eps`` for the shadow budget.
    """
    for key in ("eps_U", "lambda", "kappa"):
        if key not in params:
            raise ScenarioError(key, "missing")
    eps_U = params["eps_U"]
    if not isinstance(eps_U, list):
        if "m" not in params:
            raise ScenarioError("m", "required when eps_U is a single number")
        eps_U = [eps_U] * int(params["m"])
    elif "m" in params and int(params["m"]) != len(eps_U):
        raise ScenarioError("m", f"is {params['m']} but eps_U has {len(eps_U)} entries")
    eps_U = [_real(e, "eps_U") for e in eps_U]
    lam = _lambdas(params["lambda"])
    if len(lam) != 1:
        raise ScenarioError("lambda", "expected a single value")
    kappa = _real(params["kappa"], "kappa")
    rb = analysis.regularity_budget(eps_U, lam[0], kappa)
    out = {"schema": SCHEMA, "regularity": rb.to_dict(), "m": len(eps_U)}
    out["validity"] = [
        {"projector_valid": v.projector_valid, "reflector_valid": v.reflector_valid}
        for v in map(analysis.projector_violations, eps_U)
    ]
    if "approx" in params:
        a = params["approx"]
        out["approx_radius"] = analysis.approx_radius(a.get("eps_U", 0.0), a.get("shapiro_k", 1.0), a["eps_bar"])
    if "composed_eps" in params:
        out["shadow_error_budget"] = analysis.shadow_error_budget(params["composed_eps"])
    return out


def cmd_budget(path, out_dir=None):
    try:
        params = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError("<file>", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    if not isinstance(params, dict):
        raise ScenarioError("<root>", "params must be a JSON object")
    report = budget_report(params)
    text = json.dumps(report, indent=2)
    print(text)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "budget.json").write_text(text + "\n")
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def _setup_logging():
    level_name = os.environ.get("FEAS_LOG", "info").lower()
    level = LOG_LEVELS.get(level_name)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("feasolve: %(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(level if level is not None else logging.INFO)
    if level is None:
        log.warning("FEAS_LOG=%r not recognised; using info", level_name)


def build_parser():
    p = argparse.ArgumentParser(prog="feasolve", description="Cyclic relaxed Douglas-Rachford feasibility runs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "iterate a scenario with one lambda"),
        ("sweep", "iterate a scenario for each lambda in a list"),
        ("verify", "iterate and check fixed-point properties"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("scenario")
        sp.add_argument("--out-dir", default=None, help="directory for trace and summary files")
        sp.add_argument("--seed", type=int, default=None, help="seed for x0 = \"random\"")
        sp.add_argument("--max-iters", type=int, default=None)
    bp = sub.add_parser("budget", help="evaluate the regularity and rate constants")
    bp.add_argument("params")
    bp.add_argument("--out-dir", default=None)
    return p


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if args.command == "budget":
            return cmd_budget(args.params, args.out_dir)
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc.seed = args.seed
        if args.max_iters is not None:
            overrides = sc.stop.to_dict()
            overrides["max_iters"] = args.max_iters
            try:
                sc.stop = StopCriteria(**overrides)
            except ValueError as exc:
                raise ScenarioError("--max-iters", str(exc)) from None
        out_dir = args.out_dir if args.out_dir is not None else "."
        return {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}[args.command](sc, out_dir)
    except ScenarioError as exc:
        log.error("malformed input at %s", exc)
        return EXIT_INPUT
    except (analysis.BudgetRangeError, GeometryError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
