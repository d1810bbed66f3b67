"""Command-line front end: ``jordanhydro {check,solve,hodograph,reproduce-jb3}``.

Every run writes ``report.json``, any CSV files, and a ``manifest.json``
listing them with their SHA-256 digests.  Exit codes: 0 when every check
passes, 1 when a check fails, 2 for configuration or parse errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .connection import (
    DefiningField,
    NotDarbouxTsarevError,
    SingularConfigurationError,
    skew_nabla_c,
    check_3RC,
    check_structural_lemmas,
    christoffel_jet,
    dnabla_V_residual,
    jb3_necessary_conditions,
    nabla_e_residual,
    riemann_from,
)
from .config import ConfigError, RunConfig, load_config
from .darboux import InitialData, check_compatibility, integrate
from .expr import EvalError, FieldEvaluator
from .hodograph import (
    HodographProblem,
    NotASymmetryError,
    SymmetryField,
    check_M_structure,
    pde_convergence,
    sample_grid,
    verify_pde,
)
from .hydrolinear import (
    closedness_residual,
    conservation_system,
    density_residual,
    omega_label,
    symmetry_label,
    symmetry_residual,
    symmetry_system,
)
from .jb3 import reproduce
from .metric import (
    CascadeThetaField,
    ThetaField,
    check_DN2,
    jb3_flat_family,
    riemann_of_metric,
    theta_label,
    theta_system,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# integrator-backed quantities are judged at this tier, closed forms at the stricter ones
INTEGRATOR_TOL = 1e-6
CLOSED_FORM_FLAT_TOL = 1e-8
SOLVED_RESIDUAL_TOL = 1e-7
COMPATIBILITY_TOL = 1e-6
HODOGRAPH_ALGEBRAIC_TOL = 1e-10
HODOGRAPH_M_TOL = 1e-8
PDE_RATIO = (3.5, 4.5)


def bundled_config() -> Path:
    return Path(str(resources.files("jordanhydro") / "data" / "jb3.toml"))


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class Output:
    """One output directory: files are recorded in the manifest in write order."""

    def __init__(self, root: Path, command: str, args: dict):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.args = args
        self.files: list[dict] = []

    def write(self, name: str, text: str):
        data = text.encode("utf-8")
        (self.root / name).write_bytes(data)
        self.files.append({"name": name, "bytes": len(data),
                           "sha256": hashlib.sha256(data).hexdigest()})

    def json(self, name: str, obj):
        self.write(name, json.dumps(_clean(obj), indent=2) + "\n")

    def finish(self, passed: bool, code: int):
        manifest = {"tool": "jordanhydro", "version": __version__, "command": self.command,
                    "arguments": self.args, "passed": passed, "exit_code": code,
                    "files": self.files}
        (self.root / "manifest.json").write_text(json.dumps(_clean(manifest), indent=2) + "\n",
                                                 encoding="utf-8")


def _field(cfg: RunConfig) -> DefiningField:
    return DefiningField(cfg.bs, cfg.vector_field, cfg.parameters)


def _worst(rows: dict, name: str, value: float, where, tol: float):
    cur = rows.setdefault(name, {"check": name, "residual": 0.0, "where": None, "tol": tol})
    if value > cur["residual"] or cur["where"] is None:
        cur["residual"], cur["where"] = float(value), where


def _sample_points(cfg: RunConfig, df: DefiningField, count: int, seed: int):
    box = cfg.check.box
    if box is None:
        if cfg.solver.base_point is None:
            raise ConfigError("check: give check.box or solver.base_point")
        box = tuple((x - 0.5, x + 0.5) for x in cfg.solver.base_point)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    rng = np.random.default_rng(seed)
    pts, skipped = [], 0
    while len(pts) < count:
        if skipped > 100 * count:
            raise ConfigError("check.box: too few regular points")
        p = lo + (hi - lo) * rng.random(len(lo))
        try:
            df.check_regular(p)
        except (SingularConfigurationError, EvalError):
            skipped += 1
            continue
        pts.append(p)
    return pts, skipped


# -- check ------------------------------------------------------------------


def cmd_check(cfg: RunConfig, out: Output, tol: float, seed: int) -> bool:
    df = _field(cfg)
    bs = df.bs
    pts, skipped = _sample_points(cfg, df, cfg.check.points, seed)
    violations = [f"X^{a} depends on u^{b}" for a, b in df.dependence_violations()]
    rows: dict = {}
    lemma_fail: list = []
    errors: list = []
    nec = bs.sizes == (3,)
    for p in pts:
        where = [float(x) for x in p]
        try:
            t = christoffel_jet(df, p)
        except (ArithmeticError, ValueError) as exc:
            errors.append({"point": where, "error": f"{type(exc).__name__}: {exc}"})
            continue
        R = riemann_from(t.gamma, t.dgamma)
        _worst(rows, "d_nabla(X o) = 0", dnabla_V_residual(df, p, t), where, tol)
        _worst(rows, "nabla e = 0", nabla_e_residual(bs, t.gamma), where, tol)
        _worst(rows, "3RC", check_3RC(df, p, R), where, tol)
        _worst(rows, "A = skew part of nabla c", float(np.max(np.abs(skew_nabla_c(bs, t.gamma)))),
               where, tol)
        rep = check_structural_lemmas(df, p, tol, tensor=t)
        worst_lemma = max((r.residual for r in rep.results if r.applicable), default=0.0)
        _worst(rows, "structural lemmas", worst_lemma, where, tol)
        for r in rep.failures():
            if len(lemma_fail) < 20:
                lemma_fail.append({"point": where, **r.as_dict()})
        if nec:
            for k, v in jb3_necessary_conditions(df, p).items():
                _worst(rows, f"necessary condition {k} = 0", abs(v), where, tol)
    table = list(rows.values())
    for r in table:
        r["passed"] = r["residual"] <= r["tol"]
    table.insert(0, {"check": "Darboux-Tsarev dependence", "passed": not violations,
                     "violations": violations})
    passed = all(r["passed"] for r in table) and not errors
    out.json("report.json", {"config": cfg.summary(), "points": len(pts),
                             "irregular_points_skipped": skipped, "seed": seed, "tol": tol,
                             "passed": passed, "checks": table, "lemma_failures": lemma_fail,
                             "errors": errors})
    for r in table:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']}"
              + (f"  residual {r['residual']:.3e}" if "residual" in r else ""))
    return passed


# -- solve ------------------------------------------------------------------


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(x if isinstance(x, str) else repr(float(x)) for x in r))
    return "\n".join(lines) + "\n"


def _metric_data(cfg, df, system):
    m = cfg.metric
    closed = None
    if m.flat_family:
        closed = jb3_flat_family(*[m.flat_family[k] for k in ("F1", "F4", "F5", "F6", "F7")],
                                 eps=m.eps)
    if m.initial_data:
        funcs = {theta_label(i, a): e for (i, a), e in m.initial_data.items()}
        data = InitialData(m.base_point, funcs, cfg.parameters)
    else:
        fld = {theta_label(k.i, k.alpha): closed[n] for n, k in enumerate(df.bs.indices())}
        data = InitialData.from_field(system, fld, m.base_point, cfg.parameters)
    return data, closed


def cmd_solve(cfg: RunConfig, out: Output, target: str, step: float,
              explicit_step: bool = False) -> bool:
    df = _field(cfg)
    bs = df.bs
    idx = list(bs.indices())
    closed = None
    if target == "metric":
        if cfg.metric is None:
            raise ConfigError("no [metric] section")
        system = theta_system(df)
        data, closed = _metric_data(cfg, df, system)
        if cfg.metric.step is not None and not explicit_step:
            step = cfg.metric.step
        targets = cfg.metric.targets
        labels = [theta_label(k.i, k.alpha) for k in idx]
    else:
        sec = getattr(cfg, target)
        if sec is None:
            raise ConfigError(f"no [{target}] section")
        if target == "symmetries":
            system, L = symmetry_system(df), symmetry_label
        else:
            system, L = conservation_system(df), omega_label
        data = InitialData(sec.base_point, {L(i, a): e for (i, a), e in sec.initial_data.items()},
                           cfg.parameters)
        targets = sec.targets
        labels = [L(k.i, k.alpha) for k in idx]
    try:
        data.validate(system)
    except ValueError as exc:
        raise ConfigError(f"{target}.initial_data: {exc}") from None

    comp = check_compatibility(system, data, targets[0], h=1e-4, step=step)
    comp = {"residual": comp["residual"], "where": comp["where"], "point": targets[0],
            "tol": COMPATIBILITY_TOL}
    comp["passed"] = comp["residual"] <= COMPATIBILITY_TOL
    report = {"config": cfg.summary(), "target": target, "step": step, "compatibility": comp}
    if not comp["passed"]:
        report.update(passed=False, aborted="the system is not compatible at the first target")
        out.json("report.json", report)
        print(f"FAIL  compatibility residual {comp['residual']:.3e}; run aborted")
        return False

    rows, results = [], []
    ev_closed = None if closed is None else FieldEvaluator(closed, bs.n, cfg.parameters)
    for p in targets:
        sol = integrate(system, data, p, step)
        vals = [sol.values[a] for a in labels]
        r: dict = {"point": list(p), "values": dict(zip(labels, vals))}
        if target == "symmetries":
            r["d_nabla"] = symmetry_residual(df, sol)
            r["passed"] = r["d_nabla"] <= SOLVED_RESIDUAL_TOL
            res = r["d_nabla"]
        elif target == "conservation":
            w = np.array(vals)
            dw = np.array([sol.grad(a) for a in labels])
            r["closedness"], pair = closedness_residual(dw)
            gamma = christoffel_jet(df, p).gamma
            r["density"] = density_residual(bs, gamma, w, dw)
            r["passed"] = max(r["closedness"], r["density"]) <= SOLVED_RESIDUAL_TOL
            res = max(r["closedness"], r["density"])
        else:
            cascade = CascadeThetaField(df, data, step)
            # order 2 first, so DN2 reuses the same jets
            r["max_abs_riemann"] = riemann_of_metric(bs, cascade, p).max_abs()
            r["dn2"] = check_DN2(cascade, df, p)
            checks = [r["dn2"] <= INTEGRATOR_TOL, r["max_abs_riemann"] <= INTEGRATOR_TOL
                      if closed is not None else True]
            if closed is not None:
                r["closed_form_max_abs_riemann"] = riemann_of_metric(
                    bs, ThetaField(bs, closed, cfg.parameters), p).max_abs()
                r["error_vs_closed_form"] = float(np.max(np.abs(np.array(vals)
                                                                 - ev_closed.values(p))))
                checks += [r["closed_form_max_abs_riemann"] <= CLOSED_FORM_FLAT_TOL,
                           r["error_vs_closed_form"] <= INTEGRATOR_TOL]
            r["passed"] = all(checks)
            res = r["dn2"]
        results.append(r)
        rows.append(list(p) + vals + [res])
    passed = all(r["passed"] for r in results)
    header = [f"u_{k}" for k in range(1, bs.n + 1)] + labels + ["residual"]
    out.write(f"{target}.csv", _csv(header, rows))
    tolerances = {"symmetries": {"d_nabla": SOLVED_RESIDUAL_TOL},
                  "conservation": {"closedness": SOLVED_RESIDUAL_TOL,
                                   "density": SOLVED_RESIDUAL_TOL},
                  "metric": {"dn2": INTEGRATOR_TOL, "max_abs_riemann": INTEGRATOR_TOL,
                             "closed_form_max_abs_riemann": CLOSED_FORM_FLAT_TOL,
                             "error_vs_closed_form": INTEGRATOR_TOL}}[target]
    report.update(passed=passed, tolerances=tolerances, results=results)
    if target == "metric" and closed is not None:
        report["flatness"] = {
            "closed_form_max_abs_riemann": max(r["closed_form_max_abs_riemann"] for r in results),
            "integrated_max_abs_riemann": max(r["max_abs_riemann"] for r in results)}
    out.json("report.json", report)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {target} at {r['point']}")
    return passed


# -- hodograph ----------------------------------------------------------------


def cmd_hodograph(cfg: RunConfig, out: Output) -> bool:
    h = cfg.hodograph
    if h is None:
        raise ConfigError("no [hodograph] section")
    df = _field(cfg)
    syms = [SymmetryField.from_field(df, "t")]
    syms += [SymmetryField(label, df.bs, exprs, cfg.parameters) for label, exprs in h.symmetries]
    labels = [s.label for s in syms]
    times = [h.times.get(k, 0.0) for k in labels]
    vary = labels.index(h.vary)
    try:
        prob = HodographProblem(df, syms, region=h.region, check_points=[h.u_guess])
    except NotASymmetryError as exc:
        out.json("report.json", {"config": cfg.summary(), "passed": False, "error": str(exc)})
        print(f"FAIL  {exc}")
        return False
    start = time.perf_counter()
    sample = sample_grid(prob, h.x.values(), h.t.values(), h.u_guess, times, vary)
    elapsed = time.perf_counter() - start
    out.write("hodograph.csv", sample.to_csv())

    ok = sample.ok
    alg = float(np.nanmax(sample.residual)) if ok.any() else float("nan")
    mres = 0.0
    for j in range(len(sample.ts)):
        for i in range(len(sample.xs)):
            if ok[j, i]:
                s = check_M_structure(prob, sample.U[j, i], sample.point_times(j))
                mres = max(mres, s["c_symmetry"], s["toeplitz"])
    pde = verify_pde(prob, sample)
    conv = pde_convergence(prob, h.x.start, h.t.start, h.convergence_h, h.convergence_size,
                           h.u_guess, times, vary)
    conv = {k: v for k, v in conv.items() if not k.endswith("_sample")}
    conv["h"] = h.convergence_h
    checks = [
        {"check": "algebraic residual", "value": alg, "tol": HODOGRAPH_ALGEBRAIC_TOL,
         "passed": bool(alg <= HODOGRAPH_ALGEBRAIC_TOL)},
        {"check": "M structure", "value": mres, "tol": HODOGRAPH_M_TOL,
         "passed": bool(mres <= HODOGRAPH_M_TOL)},
        {"check": "PDE residual halving ratio", "value": conv["ratio"], "range": PDE_RATIO,
         "passed": bool(PDE_RATIO[0] <= conv["ratio"] <= PDE_RATIO[1])},
        {"check": "converged points", "value": int(ok.sum()), "passed": bool(ok.any())},
    ]
    passed = all(c["passed"] for c in checks)
    out.json("report.json", {
        "config": cfg.summary(), "passed": passed, "labels": labels, "times": times,
        "vary": h.vary, "grid": [len(sample.xs), len(sample.ts)], "seconds": round(elapsed, 3),
        "checks": checks, "pde": pde, "pde_convergence": conv,
        "symmetry_residuals": prob.symmetry_residuals,
        "singular_locus": sample.holes})
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['check']}  {c['value']}")
    if sample.holes:
        print(f"      {len(sample.holes)} grid points did not converge (see singular_locus)")
    return passed


# -- reproduce-jb3 --------------------------------------------------------------


def cmd_reproduce(cfg: RunConfig | None, out: Output, seed: int, step: float | None) -> bool:
    data = dict(cfg.jb3) if cfg is not None else {}
    kw = {} if step is None else {"step": step}
    rows = reproduce(data, seed=seed, **kw)
    passed = all(r.passed for r in rows)
    out.json("report.json", {"passed": passed, "seed": seed,
                             "rows": [r.as_dict() for r in rows]})
    width = max(len(r.item) for r in rows)
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.item:<{width}}  "
              f"{r.value:.3e} {r.relation} {r.tol:g}")
    return passed


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (TOML)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--tol", type=float, help="tolerance for structural identities")
    common.add_argument("--step", type=float, help="integrator step")
    common.add_argument("--seed", type=int, default=0, help="seed for random test points")
    ap = argparse.ArgumentParser(prog="jordanhydro", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="structural checks of the connection")
    s = sub.add_parser("solve", parents=[common], help="run a cascade at the configured targets")
    s.add_argument("target", choices=["symmetries", "conservation", "metric"])
    sub.add_parser("hodograph", parents=[common], help="sample a hodograph solution")
    sub.add_parser("reproduce-jb3", parents=[common],
                   help="check the single 3-block closed forms (bundled data by default)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        if args.command == "reproduce-jb3":
            path = args.config or bundled_config()
        elif args.config is None:
            raise ConfigError("--config is required")
        else:
            path = args.config
        cfg = load_config(path)
        for name in ("tol", "step"):
            v = getattr(args, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigError(f"--{name} must be a positive number")
        tol = args.tol if args.tol is not None else cfg.solver.tol
        step = args.step if args.step is not None else cfg.solver.step
        out = Output(args.out, args.command,
                     {"config": str(path), "tol": tol, "step": step, "seed": args.seed,
                      **({"target": args.target} if args.command == "solve" else {})})
        if args.command == "check":
            passed = cmd_check(cfg, out, tol, args.seed)
        elif args.command == "solve":
            passed = cmd_solve(cfg, out, args.target, step, args.step is not None)
        elif args.command == "hodograph":
            passed = cmd_hodograph(cfg, out)
        else:
            passed = cmd_reproduce(cfg, out, args.seed, args.step)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotDarbouxTsarevError, SingularConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if out is not None:
            out.json("report.json", {"passed": False, "error": str(exc)})
            out.finish(False, EXIT_FAIL)
        return EXIT_FAIL
    code = EXIT_OK if passed else EXIT_FAIL
    out.finish(passed, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
