"""Scenario files, the operation registry and the runner behind the CLI.

A scenario is a JSON object::

    {"schema": 1, "name": "tail", "operation": "estimate_tau_tail",
     "graph": {"family": "lattice", "radius": 60}, "lambda": 2.0,
     "reps": 20000, "seed": 7, "params": {"horizon": 60}}

Results land in ``<output root>/<name>/``: ``records.jsonl``, one
``<curve>.csv`` per curve and ``manifest.json`` (written last).
"""
from __future__ import annotations

import datetime as _dt
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import checks as C
from . import estimators as E
from . import process as P
from .errors import SamplingAborted
from .graph import GraphError, GraphSpec, load_adjacency
from .records import atomic_write, config_hash, dumps, file_digest, write_curve, write_records

SCHEMA = 1
OUTPUT_ENV = "CONTACTLAB_OUTPUT"
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_ABORTED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    operation: str
    graph: GraphSpec | None
    lam: float
    reps: int
    seed: int
    params: dict = field(default_factory=dict)
    output: str | None = None
    parallelism: int | None = None
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


@dataclass
class OpResult:
    records: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def add_curve(self, name, curve):
        self.curves[name] = (curve.times, curve.values, curve.std_errors)


# ---------------------------------------------------------------------------
# parsing


def _graph(obj, base: Path | None) -> GraphSpec | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ConfigError("graph must be an object")
    obj = dict(obj)
    if obj.get("family") == "explicit" and "path" in obj:
        p = Path(obj.pop("path"))
        p = p if p.is_absolute() or base is None else base / p
        try:
            return GraphSpec("explicit", adjacency=load_adjacency(p))
        except OSError as exc:
            raise ConfigError(f"cannot read adjacency file {p}: {exc}") from exc
    try:
        return GraphSpec.from_dict(obj)
    except (TypeError, ValueError, GraphError) as exc:
        raise ConfigError(f"bad graph: {exc}") from exc


def parse_scenario(obj: dict, base: Path | None = None) -> Scenario:
    if not isinstance(obj, dict):
        raise ConfigError("scenario must be a JSON object")
    if obj.get("schema") != SCHEMA:
        raise ConfigError(f"unsupported schema {obj.get('schema')!r}; expected {SCHEMA}")
    for key in ("name", "operation", "reps", "seed"):
        if key not in obj:
            raise ConfigError(f"missing field {key!r}")
    op = obj["operation"]
    if op not in REGISTRY:
        raise ConfigError(f"unknown operation {op!r}; known: {', '.join(sorted(REGISTRY))}")
    reps = obj["reps"]
    if isinstance(reps, bool) or not isinstance(reps, int) or reps < 1:
        raise ConfigError(f"reps must be a positive integer, got {reps!r}")
    seed = obj["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    lam = obj.get("lambda", 0.0)
    if not isinstance(lam, (int, float)) or lam < 0:
        raise ConfigError(f"lambda must be a nonnegative number, got {lam!r}")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    name = str(obj["name"])
    if not name or "/" in name or name.startswith("."):
        raise ConfigError(f"bad scenario name {name!r}")
    par = obj.get("parallelism")
    if par is not None and (not isinstance(par, int) or par < 1):
        raise ConfigError("parallelism must be a positive integer")
    return Scenario(name, op, _graph(obj.get("graph"), base), float(lam), reps, seed, params,
                    obj.get("output"), par, obj)


def load_scenario(path) -> Scenario:
    import json
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_scenario(obj, path.parent)


# ---------------------------------------------------------------------------
# operation handlers


def _need_graph(sc: Scenario):
    if sc.graph is None:
        raise ConfigError(f"operation {sc.operation} needs a graph")
    return P.cached_graph(sc.graph)


def _labels_to_idx(g, labels):
    try:
        return [g.index(tuple(x) if isinstance(x, list) else x) for x in labels]
    except (KeyError, GraphError) as exc:
        raise ConfigError(f"unknown vertex: {exc}") from exc


def _cfg(sc: Scenario, **over) -> P.StationarySamplerConfig:
    p = dict(sc.params)
    delta = tuple(tuple(x) if isinstance(x, list) else x for x in p.pop("delta", [0]))
    spec = sc.graph or GraphSpec("lattice", radius=1)
    kw = {k: p[k] for k in ("burn_in", "horizon", "radius", "burn_in_tolerance",
                            "truncation_tolerance", "safety") if k in p}
    kw.setdefault("radius", 30 if spec.family == "lattice" else None)
    kw.update(over)
    return P.StationarySamplerConfig(spec, delta, sc.lam, seed=sc.seed, **kw)


def _pick(p: dict, *keys):
    return {k: p[k] for k in keys if k in p}


def _estimate_record(sc, est) -> dict:
    return {"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
            "seed": sc.seed, **est.to_dict()}


def op_survival_prob(sc):
    spec = sc.graph or GraphSpec("lattice", radius=1)
    p = sc.params
    est = E.estimate_survival_prob(spec, sc.lam, None, p.get("horizon", 100.0), sc.reps, sc.seed)
    return OpResult([_estimate_record(sc, est)])


def op_lambda_c(sc):
    spec = sc.graph or GraphSpec("lattice", radius=1)
    p = sc.params
    est = E.estimate_lambda_c(spec, p.get("horizon", 200.0), sc.reps,
                              tuple(p.get("bracket", (1.0, 2.5))), p.get("tolerance", 0.02),
                              p.get("threshold", 0.05), sc.seed)
    return OpResult([_estimate_record(sc, est)])


def op_beta(sc):
    p = sc.params
    est = E.estimate_beta(sc.lam, tuple(p.get("n_list", (10, 20, 40))), sc.reps, sc.seed)
    return OpResult([_estimate_record(sc, est)])


def _curve_result(sc, name, curve, **extra):
    r = OpResult([{"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
                   "seed": sc.seed, **curve.to_dict(), **extra}])
    r.add_curve(name, curve)
    return r


def op_alpha_mixing(sc):
    p = sc.params
    c = E.estimate_alpha_mixing(_cfg(sc), p.get("t_grid", list(range(11))),
                                length=p.get("length", 2e5), step=p.get("step", 0.05),
                                n_batches=p.get("n_batches", 20))
    return _curve_result(sc, "alpha_mixing", c)


def op_d(sc):
    p = sc.params
    c = E.estimate_d(_cfg(sc), p.get("t_grid", [0, 1, 2, 5, 10]), t_past=p.get("t_past", 1.0),
                     attempts=sc.reps, stationary_reps=p.get("stationary_reps"))
    return _curve_result(sc, "d", c)


def op_cutoff(sc):
    p = sc.params
    if "beta_hat" not in p:
        raise ConfigError("cutoff_curve needs params.beta_hat")
    rows = E.cutoff_curve(sc.lam, p.get("n_list", [10, 20, 40]), p.get("epsilon", 0.5),
                          p.get("r", 1), p["beta_hat"], sc.reps, sc.seed,
                          stationary_reps=p.get("stationary_reps", 20000))
    res = OpResult([{"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
                     "seed": sc.seed, "rows": rows}])
    for branch, name in (("-", "cutoff_minus"), ("+", "cutoff_plus")):
        sel = [r for r in rows if r["branch"] == branch]
        res.curves[name] = ([r["t"] for r in sel], [r["tv"] for r in sel], [r["se"] for r in sel])
    return res


def _indicator_mean(s):
    return float(np.mean(s))


def op_clt(sc):
    p = sc.params
    rep = E.estimate_clt(_cfg(sc), _indicator_mean, p.get("t", 200.0), sc.reps,
                         long_length=p.get("long_length"))
    rep = {k: v for k, v in rep.items() if k != "values"}
    return OpResult([{"scenario": sc.name, "operation": sc.operation, "seed": sc.seed, **rep}])


def op_rate_function(sc):
    p = sc.params
    rf = E.estimate_rate_function(_cfg(sc), _indicator_mean, p.get("grid", [0.4, 0.5, 0.6, 0.7, 0.8]),
                                  p.get("horizons", [20, 40, 80, 160]), sc.reps, p.get("h"))
    res = OpResult([{"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
                     "seed": sc.seed, **rf.to_dict()}])
    res.curves["rate_function"] = (rf.grid, rf.psi_hat, rf.std_errors)
    return res


def op_complete_convergence(sc):
    p = sc.params
    c = E.complete_convergence_check(sc.lam, p.get("initial", [0]), p.get("t_grid", [1, 2, 5, 10, 20]),
                                     sc.reps, sc.seed, p.get("window_radius", 1), p.get("horizon"),
                                     p.get("stationary_reps", 20000))
    return _curve_result(sc, "complete_convergence", c)


def op_tau_tail(sc):
    p = sc.params
    c = E.estimate_tau_tail(sc.lam, 0, p.get("t_grid", list(range(2, 21, 2))), p.get("horizon", 60.0),
                            sc.reps, sc.seed)
    return _curve_result(sc, "tau_tail", c)


def op_rho(sc):
    p = sc.params
    est = E.estimate_rho(sc.lam, 0, p.get("t_grid", [0.5, 1, 1.5, 2, 2.5, 3, 4, 5]), sc.reps, sc.seed)
    return OpResult([_estimate_record(sc, est)])


def op_shape_mixing(sc):
    p = sc.params
    c = E.shape_mixing_check(sc.lam, 0, p.get("theta", 0.2), p.get("t_grid", [0, 1, 2, 5, 10]),
                             sc.reps, sc.seed, p.get("horizon"), p.get("stationary_reps", 20000))
    return _curve_result(sc, "shape_mixing", c)


def _evolve_for(sc):
    fault = sc.params.get("fault")
    if fault is None:
        return C.evolve
    if fault == "complement_start":
        return C.faulty_evolve
    raise ConfigError(f"unknown fault {fault!r}")


def _check_result(sc, rep):
    return OpResult([{"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
                      **rep.to_dict()}], checks=[rep])


def op_monotone_coupling(sc):
    g = _need_graph(sc)
    return _check_result(sc, C.check_monotone_coupling(g, sc.lam, sc.reps, sc.seed,
                                                       sc.params.get("horizon", 5.0),
                                                       evolve_fn=_evolve_for(sc)))


def op_additivity(sc):
    g = _need_graph(sc)
    return _check_result(sc, C.check_additivity(g, sc.lam, sc.reps, sc.seed,
                                                sc.params.get("horizon", 5.0),
                                                evolve_fn=_evolve_for(sc)))


def op_self_duality(sc):
    g = _need_graph(sc)
    p = sc.params
    return _check_result(sc, C.check_self_duality(g, sc.lam, _labels_to_idx(g, p.get("delta", [0])),
                                                  _labels_to_idx(g, p.get("lam_set", [3])),
                                                  p.get("t", 2.0), sc.reps, sc.seed))


def op_positive_association(sc):
    cfg = _cfg(sc) if sc.params.get("delta") else C.default_check_config(sc.seed)
    return _check_result(sc, C.check_positive_association(cfg, reps=sc.reps))


def op_dfkg(sc):
    cfg = _cfg(sc) if sc.params.get("delta") else C.default_check_config(sc.seed)
    return _check_result(sc, C.check_dfkg(cfg, t_past=sc.params.get("t_past", 1.0), reps=sc.reps))


def op_generator_equivalence(sc):
    g = _need_graph(sc)
    p = sc.params
    return _check_result(sc, C.check_generator_equivalence(g, sc.lam, p.get("t", 0.5), sc.reps,
                                                           sc.seed, p.get("initial")))


def op_stationary_projection(sc):
    cfg = _cfg(sc)
    tr = P.sample_stationary_projection(cfg, sc.params.get("replicate", 0))
    res = OpResult([{"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
                     "seed": sc.seed, "window": list(tr.window), "events": int(tr.times.size)}])
    res.trajectory = (tr, list(cfg.delta))
    return res


def op_validate_truncation(sc):
    rep = P.validate_truncation(_cfg(sc), reps=sc.reps)
    if rep["flagged"]:
        raise SamplingAborted("truncation radius too small", **rep)
    return OpResult([{"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
                      "seed": sc.seed, **rep}])


REGISTRY: dict[str, Callable] = {
    "estimate_survival_prob": op_survival_prob,
    "estimate_lambda_c": op_lambda_c,
    "estimate_beta": op_beta,
    "estimate_alpha_mixing": op_alpha_mixing,
    "estimate_d": op_d,
    "cutoff_curve": op_cutoff,
    "estimate_clt": op_clt,
    "estimate_rate_function": op_rate_function,
    "complete_convergence_check": op_complete_convergence,
    "estimate_tau_tail": op_tau_tail,
    "estimate_rho": op_rho,
    "shape_mixing_check": op_shape_mixing,
    "check_monotone_coupling": op_monotone_coupling,
    "check_additivity": op_additivity,
    "check_self_duality": op_self_duality,
    "check_positive_association": op_positive_association,
    "check_dfkg": op_dfkg,
    "check_generator_equivalence": op_generator_equivalence,
    "sample_stationary_projection": op_stationary_projection,
    "validate_truncation": op_validate_truncation,
}


# ---------------------------------------------------------------------------
# running


def output_root(override=None) -> Path:
    return Path(override or os.environ.get(OUTPUT_ENV) or "runs")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_scenario(sc: Scenario, out_root=None) -> tuple[int, Path, dict]:
    """Execute ``sc``; returns ``(exit code, output directory, summary)``."""
    out = Path(sc.output) if sc.output else output_root(out_root) / sc.name
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    t0 = time.perf_counter()
    files = {}
    code = EXIT_OK
    summary = {"name": sc.name, "operation": sc.operation}
    try:
        res = REGISTRY[sc.operation](sc)
    except SamplingAborted as exc:
        code = EXIT_ABORTED
        res = OpResult([{"scenario": sc.name, "operation": sc.operation, "config_hash": sc.hash,
                         "seed": sc.seed, "aborted": str(exc), "diagnostics": exc.diagnostics}])
        summary["aborted"] = str(exc)
        summary["diagnostics"] = exc.diagnostics
    if any(not c.passed for c in res.checks):
        code = EXIT_CHECK_FAILED
    summary["verdicts"] = [c.verdict for c in res.checks]
    files["records.jsonl"] = write_records(out / "records.jsonl", res.records)
    for name, (t, v, e) in sorted(res.curves.items()):
        files[f"{name}.csv"] = write_curve(out / f"{name}.csv", list(t), list(v), list(e))
    traj = getattr(res, "trajectory", None)
    if traj is not None:
        from .records import write_trajectory
        p1, p2 = write_trajectory(out / "trajectory.csv", traj[0], traj[1],
                                  {"seed": sc.seed, "config_hash": sc.hash})
        files["trajectory.csv"], files["trajectory.json"] = p1, p2
    manifest = {
        "scenario_hash": sc.hash,
        "scenario": sc.raw,
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "elapsed_seconds": round(time.perf_counter() - t0, 3),
        "seeds": {"master": sc.seed, "replicas": sc.reps,
                  "lineage": "replica i uses combine(master, i); streams use "
                             "combine(replica seed, vertex or edge key, time block)"},
        "exit_code": code,
        "outputs": {name: file_digest(path) for name, path in sorted(files.items())},
    }
    atomic_write(out / "manifest.json", dumps(manifest) + "\n")
    summary["exit_code"] = code
    summary["output"] = str(out)
    summary["curves"] = sorted(f"{n}.csv" for n in res.curves)
    return code, out, summary


def _run_path(args):
    path, out_root = args
    try:
        sc = load_scenario(path) if not isinstance(path, dict) else parse_scenario(path)
    except ConfigError as exc:
        return EXIT_CONFIG, None, {"name": str(path), "exit_code": EXIT_CONFIG, "error": str(exc)}
    code, out, summary = run_scenario(sc, out_root)
    return code, str(out), summary


def run_suite(path, out_root=None) -> tuple[int, Path, dict]:
    """Run every scenario of a suite file; the worst exit code wins."""
    import json
    from concurrent.futures import ProcessPoolExecutor
    from .svg import dashboard
    from .records import read_curve
    path = Path(path)
    try:
        suite = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load suite {path}: {exc}") from exc
    if not isinstance(suite, dict) or suite.get("schema") != SCHEMA:
        raise ConfigError(f"suite must be an object with schema {SCHEMA}")
    name = str(suite.get("name", path.stem))
    items = []
    for s in suite.get("scenarios", []):
        if isinstance(s, str):
            items.append(str(path.parent / s) if not Path(s).is_absolute() else s)
        elif isinstance(s, dict):
            items.append(s)
        else:
            raise ConfigError("suite scenarios must be paths or objects")
    root = output_root(out_root) / name
    workers = int(suite.get("parallelism") or os.cpu_count() or 1)
    args = [(it, root) for it in items]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
            results = list(ex.map(_run_path, args))
    else:
        results = [_run_path(a) for a in args]
    table = [r[2] for r in results]
    code = max([r[0] for r in results], default=EXIT_OK)
    panels = []
    for row in table:
        for cname in row.get("curves", []):
            t, v, e = read_curve(Path(row["output"]) / cname)
            log = cname.startswith("tau_tail") or cname.startswith("alpha")
            panels.append((f"{row['name']}: {cname[:-4]}", [(cname[:-4], t, v, e)], log))
    root.mkdir(parents=True, exist_ok=True)
    report = {"suite": name, "exit_code": code,
              "table": [{k: row.get(k) for k in ("name", "operation", "exit_code", "verdicts",
                                                  "error", "aborted")} for row in table]}
    atomic_write(root / "summary.json", dumps(report) + "\n")
    atomic_write(root / "dashboard.svg", dashboard(panels))
    return code, root, report
