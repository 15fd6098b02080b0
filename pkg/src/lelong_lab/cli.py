"""Config-driven experiment runner: ``lelong-lab run`` and ``lelong-lab verify``."""
from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import currents as C
from . import geometry as G
from . import jensen as J
from . import lelong as L
from . import maps as M
from . import tangent as TG
from .errors import LabError
from .integrate import QuadratureSpec

TASKS = ("point", "lelong", "kappa", "kappa_eps", "jensen", "jensen_smooth", "tangent", "conic",
         "intrinsic", "sweep")
QUAD_FIELDS = [f.name for f in fields(QuadratureSpec)]

SCHEMA = {
    "type": "object",
    "required": ["schema", "task", "seed", "setting", "current"],
    "properties": {
        "schema": {"const": 1},
        "task": {"enum": list(TASKS)},
        "seed": {"type": "integer", "minimum": 0},
        "setting": {
            "type": "object",
            "required": ["k", "l", "p"],
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "l": {"type": "integer", "minimum": 0},
                "p": {"type": "integer", "minimum": 0},
                "metric": {"type": "object"},
                "base": {"type": "object"},
                "r_bar": {"type": "number", "exclusiveMinimum": 0},
                "omega_scale": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "current": {"type": "object", "required": ["kind"]},
        "maps": {"type": "array", "items": {"type": "object", "required": ["kind"]}},
        "schedule": {
            "type": "object",
            "properties": {
                "radii": {"type": "object", "properties": {
                    "r0": {"type": "number", "exclusiveMinimum": 0},
                    "count": {"type": "integer", "minimum": 1},
                    "ratio": {"type": "number", "exclusiveMinimum": 1}}, "additionalProperties": False},
                "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "lambdas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "mus": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
            "additionalProperties": False,
        },
        "quadrature": {"type": "object", "properties": {f: {} for f in QUAD_FIELDS},
                       "additionalProperties": False},
        "params": {"type": "object"},
        "variants": {"type": "array", "items": {"type": "object"}},
        "assertions": {"type": "array", "items": {
            "type": "object", "required": ["name", "path", "op"],
            "properties": {"name": {"type": "string"}, "path": {"type": "string"},
                           "op": {"enum": ["approx", "within_error", "le", "ge", "true"]}}}},
        "output": {"type": "object", "properties": {"dir": {"type": "string"}}},
    },
    "additionalProperties": False,
}


class ConfigError(Exception):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def __str__(self):
        msg = super().__str__()
        return f"{self.field}: {msg}" if self.field else msg


# --------------------------------------------------------------------------
# config resolution

def load_bundled(name):
    text = resources.files("lelong_lab").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_config(path):
    p = Path(path)
    if not p.exists():
        try:
            return load_bundled(p.stem)
        except FileNotFoundError:
            raise ConfigError(f"no such config file: {path}") from None
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "config"
        raise ConfigError(exc.message, where) from None


class Plan:
    """Everything built from a validated config, before any integration."""

    def __init__(self, cfg, threads=None):
        validate(cfg)
        self.cfg = cfg
        st = cfg["setting"]
        try:
            self.setting = G.build_setting(st["k"], st["l"], st["p"], metric=st.get("metric"),
                                           base=st.get("base"), r_bar=st.get("r_bar", 0.5),
                                           omega_scale=st.get("omega_scale", 1.0), seed=cfg["seed"])
            self.current = C.current_from_spec(cfg["current"], st["k"], self.setting.n)
            self.maps = [M.map_from_spec(m, st["k"], self.setting.n) for m in cfg.get("maps", [])]
        except LabError as exc:
            if exc.code in ("schema", "unsupported-kind"):
                raise ConfigError(exc.message, exc.context.get("field")) from None
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc), "setting") from None
        q = dict(cfg.get("quadrature", {}))
        q["seed"] = cfg["seed"]
        if threads is not None:
            q["threads"] = threads
        try:
            self.quad = QuadratureSpec(**q)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "quadrature") from None
        sch = cfg.get("schedule", {})
        r = sch.get("radii", {})
        try:
            self.radii = L.RadiusSchedule(r.get("r0", 0.4), r.get("count", 6), r.get("ratio", 2.0))
        except LabError as exc:
            raise ConfigError(exc.message, "schedule.radii.count") from None
        self.eps = sch.get("eps")
        self.lambdas = sch.get("lambdas", [1, 2, 4, 8, 16])
        self.mus = sch.get("mus", [2.0, 0.5, 3.0])
        self.params = cfg.get("params", {})
        self.task = cfg["task"]
        if self.task == "intrinsic" and len(self.maps) != 2:
            raise ConfigError("the intrinsic task needs exactly two maps", "maps")
        if self.task in ("jensen", "jensen_smooth") and not isinstance(self.current, C.SmoothForm):
            raise ConfigError("Lelong-Jensen tasks need a smooth_form current", "current.kind")
        if self.task == "sweep" and not cfg.get("variants"):
            raise ConfigError("the sweep task needs a non-empty variants list", "variants")

    @property
    def tau(self):
        return self.maps[0] if self.maps else None

    def describe(self):
        s = self.setting
        return {"task": self.task, "setting": s.spec(), "c1": s.c1, "c2": s.c2,
                "current": self.current.spec(), "maps": [m.spec() for m in self.maps],
                "radii": self.radii.radii, "quadrature": self.quad.to_dict()}


# --------------------------------------------------------------------------
# tasks: each returns (rows, results, series)
# rows: dicts with keys indicator, j, param, value, error, label

def _row(indicator, j, param, value, error, label=""):
    return {"indicator": indicator, "j": "" if j is None else j, "param": float(param),
            "value": float(np.real(value)), "error": float(error), "label": label}


def _series_rows(name, j, est):
    return [_row(name, j, r, v, e) for r, v, e in est.samples]


def _task_point(plan):
    T = plan.current
    samples = []
    for r in plan.radii.radii:
        est = L.nu_point(T, r, plan.quad)
        samples.append((r, float(est.value), float(est.error)))
    lim = L.extrapolate(samples, plan.radii.ratio, "nu_point")
    return _series_rows("nu_point", None, lim), {"nu_point": lim.to_dict()}, {"nu_point": lim.samples}


def _task_lelong(plan):
    seqs = L.nu_sequences(plan.current, plan.setting, plan.radii, plan.tau, plan.quad, plan.params.get("js"))
    rows, results, series = [], {}, {}
    for j, est in seqs.items():
        rows += _series_rows("nu", j, est)
        results[f"nu_{j}"] = est.to_dict()
        series[f"nu_{j}"] = est.samples
    results["top_index"] = L.top_index(plan.setting, plan.current)
    return rows, results, series


def _task_kappa(plan):
    T, s = plan.current, plan.setting
    j = plan.params.get("j", L.top_index(s, T))
    radii = plan.radii.radii
    rows, samples = [], []
    for r_in, r_out in zip(radii[1:], radii[:-1]):
        est = L.kappa_corona(T, s, r_in, r_out, j, plan.tau, plan.quad)
        rows.append(_row("kappa_corona", j, r_out, est.value, est.error, f"inner={r_in!r}"))
        samples.append((r_out, float(est.value), float(est.error)))
    return rows, {f"kappa_{j}": {"samples": samples}}, {f"kappa_{j}": samples}


def _task_kappa_eps(plan):
    T, s = plan.current, plan.setting
    r = plan.params.get("r", plan.radii.r0)
    j = plan.params.get("j", s.l)
    eps = plan.eps or [r / 2, r / 4, r / 8, r / 16]
    lim = L.kappa_eps(T, s, r, j, eps, plan.tau, plan.quad)
    nu = L.nu_j(T, s, r, j, plan.tau, plan.quad)
    rows = [_row("kappa_eps", j, e, v, err) for e, v, err in lim.samples]
    rows.append(_row("nu", j, r, nu.value, nu.error))
    gap = abs(lim.limit - float(nu.value))
    results = {"kappa_eps": lim.to_dict(), "nu_at_r": {"value": float(nu.value), "error": float(nu.error)},
               "gap": gap, "agree": bool(gap <= lim.error + float(nu.error))}
    return rows, results, {f"kappa_eps_{j}": lim.samples}


def _jensen_rows(rep, param):
    rows = []
    for name, t in rep.terms.items():
        if t is not None:
            rows.append(_row(name, rep.inputs.get("q"), param, t.value, t.error))
    rows.append(_row("residual", rep.inputs.get("q"), param, rep.residual.value, rep.residual.error))
    return rows


def _task_jensen(plan):
    p = plan.params
    rep = J.lj_report(plan.current, plan.setting, p.get("r1", 0.15), p.get("r2", 0.4), plan.quad,
                      jitter=p.get("jitter", False), seed=plan.quad.seed)
    d = rep.to_dict()
    d["passes"] = rep.passes(p.get("rel_tol", 1e-3))
    d["relative_residual"] = abs(float(np.real(rep.residual.value))) / max(rep.max_term, 1e-300)
    return _jensen_rows(rep, rep.inputs["r2"]), {"jensen": d}, {}


def _task_jensen_smooth(plan):
    r = plan.params.get("r", 0.4)
    rep = J.lj_smooth_origin(plan.current, plan.setting, r, plan.quad)
    d = rep.to_dict()
    d["passes"] = rep.passes(plan.params.get("rel_tol", 1e-3))
    return _jensen_rows(rep, r), {"jensen_smooth": d}, {}


def _task_tangent(plan):
    table = TG.sample_tangent(plan.current, plan.setting, plan.tau, plan.lambdas, quad=plan.quad)
    rows = []
    for lam, vals, errs in zip(table.lambdas, table.values, table.errors):
        for label, v, e in zip(table.labels, vals, errs):
            rows.append(_row("tangent", None, lam, v, e, label))
    d = table.to_dict()
    d["converged"] = bool(all(table.verdicts))
    return rows, {"tangent": d}, {}


def _task_conic(plan):
    dev = TG.conic_check(plan.current, plan.setting, plan.mus, quad=plan.quad)
    return [_row("conic_deviation", None, max(plan.mus), dev, 0.0)], {"conic": {"deviation": dev,
                                                                                  "mus": plan.mus}}, {}


def _task_intrinsic(plan):
    s = plan.setting
    j = plan.params.get("j", L.top_index(s, plan.current))
    res = L.intrinsic_check(plan.current, s, plan.maps[0], plan.maps[1], j, plan.radii, plan.quad)
    a, b = res.pop("sequence_1"), res.pop("sequence_2")
    rows = _series_rows("nu_map1", j, a) + _series_rows("nu_map2", j, b)
    return rows, {"intrinsic": res}, {f"nu_{j}_map1": a.samples, f"nu_{j}_map2": b.samples}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _task_sweep(plan):
    inner = plan.params.get("task", "lelong")
    if inner == "sweep" or inner not in TASKS:
        raise ConfigError(f"invalid sweep task {inner!r}", "params.task")
    rows, results, series = [], {}, {}
    base = {k: v for k, v in plan.cfg.items() if k not in ("variants", "assertions", "output")}
    base["task"] = inner
    for i, var in enumerate(plan.cfg["variants"]):
        sub = Plan(_merge(base, var), plan.quad.threads)
        r, res, ser = RUNNERS[inner](sub)
        for row in r:
            row["label"] = f"variant={i}" + (f";{row['label']}" if row["label"] else "")
        rows += r
        results[f"variant_{i}"] = res
        series.update({f"v{i}_{k}": v for k, v in ser.items()})
    return rows, results, series


RUNNERS = {"point": _task_point, "lelong": _task_lelong, "kappa": _task_kappa, "kappa_eps": _task_kappa_eps,
           "jensen": _task_jensen, "jensen_smooth": _task_jensen_smooth, "tangent": _task_tangent,
           "conic": _task_conic, "intrinsic": _task_intrinsic, "sweep": _task_sweep}


# --------------------------------------------------------------------------
# assertions and output

def _lookup(results, path):
    cur = results
    for part in path.split("."):
        if isinstance(cur, dict) and part in cur:
            cur = cur[part]
        elif isinstance(cur, list) and part.lstrip("-").isdigit():
            cur = cur[int(part)]
        else:
            raise KeyError(path)
    return cur


def check_assertion(a, results):
    try:
        got = _lookup(results, a["path"])
    except (KeyError, IndexError):
        return False, f"missing result {a['path']}"
    op = a["op"]
    if op == "true":
        return bool(got), f"{a['path']} = {got}"
    if op == "within_error":
        limit, err = float(got["limit"]), float(got["error"])
        target = float(a.get("value", 0.0))
        factor = float(a.get("factor", 1.0))
        ok = abs(limit - target) <= factor * err + float(a.get("abs_tol", 0.0))
        return ok, f"{limit!r} +- {err!r} vs {target!r}"
    got = float(got["limit"]) if isinstance(got, dict) else float(got)
    target = float(a.get("value", 0.0))
    if op == "approx":
        tol = float(a.get("abs_tol", 0.0)) + float(a.get("rel_tol", 0.0)) * abs(target)
        return abs(got - target) <= tol, f"{got!r} vs {target!r} (tol {tol!r})"
    if op == "le":
        return got <= target, f"{got!r} <= {target!r}"
    return got >= target, f"{got!r} >= {target!r}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)          # RFC-4180 quoting and CRLF line ends
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def run_config(cfg, out_dir=None, threads=None, dry_run=False, echo=print, err=None):
    """Run one experiment; returns the exit code."""
    err = err or (lambda m: print(m, file=sys.stderr))
    try:
        plan = Plan(cfg, threads)
    except ConfigError as exc:
        err(f"schema error: {exc}")
        return 2
    if dry_run:
        echo(json.dumps(_jsonable(plan.describe()), indent=2, sort_keys=True))
        return 0
    out = Path(out_dir or cfg.get("output", {}).get("dir", "lelong-lab-out"))
    try:
        rows, results, series = RUNNERS[plan.task](plan)
    except ConfigError as exc:
        err(f"schema error: {exc}")
        return 2
    except LabError as exc:
        err(f"error [{exc.code}]: {exc.message}")
        return 1
    checks = []
    for a in cfg.get("assertions", []):
        ok, detail = check_assertion(a, _jsonable(results))
        checks.append({"name": a["name"], "passed": bool(ok), "detail": detail})
    out.mkdir(parents=True, exist_ok=True)
    header = ["task", "indicator", "j", "param", "value", "error", "label"]
    _write_csv(out / "results.csv", header,
               [[plan.task, r["indicator"], r["j"], r["param"], r["value"], r["error"], r["label"]] for r in rows])
    (out / "plotdata").mkdir(exist_ok=True)
    for name, samples in series.items():
        _write_csv(out / "plotdata" / f"{name}.csv", ["r", "value", "error"],
                   [[float(a), float(b), float(c)] for a, b, c in samples])
    passed = all(c["passed"] for c in checks)
    summary = {"schema": 1, "version": __version__, "config": cfg, "task": plan.task,
               "provenance": {"c1": plan.setting.c1, "c2": plan.setting.c2, "seed": cfg["seed"],
                              "quadrature": plan.quad.to_dict(), "setting": plan.setting.spec(),
                              "radii": plan.radii.radii},
               "results": results, "assertions": checks, "passed": passed}
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    for c in checks:
        if not c["passed"]:
            err(f"assertion failed: {c['name']} ({c['detail']})")
    echo(f"wrote {out / 'results.csv'} ({len(rows)} rows); assertions "
         f"{sum(c['passed'] for c in checks)}/{len(checks)} passed")
    return 0 if passed else 1


def resolve_threads(flag):
    env = os.environ.get("LELONG_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return flag


def main(argv=None):
    ap = argparse.ArgumentParser(prog="lelong-lab", description="Generalized Lelong number laboratory")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="path to a JSON config, or the name of a bundled config")
    run.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ver = sub.add_parser("verify", help="run the acceptance table")
    ver.add_argument("--only", action="append", default=None,
                     help="restrict to rows with this tag or number (repeatable)")
    args = ap.parse_args(argv)
    if args.cmd == "run":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"schema error: {exc}", file=sys.stderr)
            return 2
        return run_config(cfg, args.out, resolve_threads(args.threads), args.dry_run)
    from . import acceptance
    outcomes = acceptance.run(args.only, echo=print)
    if not outcomes:
        print(f"no acceptance rows match {args.only}", file=sys.stderr)
        return 1
    failed = [o for o in outcomes if not o.passed]
    print(f"{len(outcomes) - len(failed)}/{len(outcomes)} rows passed")
    if failed:
        print("failed: " + ", ".join(f"{o.number} {o.name}" for o in failed), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
