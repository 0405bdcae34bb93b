"""Command-line front end.

    crgeom --config run.json [--task NAME] [--out DIR] [--seed N]
           [--grid NxNxN] [--threshold X]

Writes ``summary.json`` (schema 1) and CSV dumps to the output directory.
Exit status: 0 all checks passed, 2 some check failed (named on stderr),
1 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import jax.numpy as jnp
import numpy as np

from . import conformal as C
from . import function_spaces as FS
from . import yamabe as Y
from .core import ScalarField, total_volume
from .discrete import discrete_laplacian
from .errors import CRGeometryError
from .models import deformation_family, heisenberg, nilmanifold, sphere, sphere_hopf
from .models.deformation import convergence_ratios
from .webster import tensor_norms_fast, webster

SCHEMA = 1
TASKS = ("invariants", "conformal-check", "yamabe", "green", "deform", "norms")


class ConfigError(Exception):
    pass


# -- config ---------------------------------------------------------------------------


def parse_grid(text: str) -> list:
    try:
        dims = [int(v) for v in text.lower().split("x")]
    except ValueError as exc:
        raise ConfigError(f"bad --grid {text!r}; expected NxNxN") from exc
    if not dims or any(d < 1 for d in dims):
        raise ConfigError(f"bad --grid {text!r}")
    return dims


def load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    if args.task:
        cfg["task"] = args.task
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.grid:
        cfg["grid"] = parse_grid(args.grid)
    if args.threshold is not None:
        cfg.setdefault("params", {})["threshold"] = args.threshold
    cfg.setdefault("model", "nilmanifold")
    cfg.setdefault("n", 1)
    cfg.setdefault("seed", 0)
    cfg.setdefault("params", {})
    if cfg.get("task") not in TASKS:
        raise ConfigError(f"unknown task {cfg.get('task')!r}; expected one of {', '.join(TASKS)}")
    return cfg


def trig_field(spec, name="f") -> ScalarField:
    """{"terms": [[amp, [k...], phase], ...]} -> ScalarField."""
    try:
        terms = [(float(a), tuple(float(v) for v in k), float(ph)) for a, k, ph in spec["terms"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("field spec needs terms [[amp, [k...], phase], ...]") from exc
    return ScalarField.trig(terms, name=name)


def build_model(cfg: dict):
    kind = cfg["model"]
    n = int(cfg["n"])
    grid = tuple(cfg["grid"]) if cfg.get("grid") is not None else None
    dim = 2 * n + 1
    if grid is not None and kind != "sphere" and len(grid) != dim:
        raise ConfigError(f"grid must have {dim} axes for n = {n}")
    if kind == "heisenberg":
        m = heisenberg(n, float(cfg.get("half_width", 1.0)), grid or (16,) * dim)
    elif kind == "nilmanifold":
        m = nilmanifold(n, float(cfg.get("scale", 1.0)), grid or (16,) * dim)
    elif kind == "sphere":
        chart = cfg.get("chart", "hopf")
        if chart == "hopf":
            if n != 1:
                raise ConfigError("the Hopf chart is available for n = 1 only")
            m = sphere_hopf(grid or (16, 32, 32))
        else:
            m = sphere(n, chart, float(cfg.get("half_width", 1.0)), grid or (16,) * dim)
    else:
        raise ConfigError(f"unknown model {kind!r}")
    if cfg.get("rescale"):
        m = C.rescale(m, trig_field(cfg["rescale"], "f"))
    return m


# -- records ----------------------------------------------------------------------------


def record(name, value, threshold, relation="<=") -> dict:
    v = float(value)
    if relation == "<=":
        ok = v <= threshold
    elif relation == ">=":
        ok = v >= threshold
    elif relation == ">":
        ok = v > threshold
    elif relation == "in":
        ok = threshold[0] <= v <= threshold[1]
    else:
        raise ValueError(relation)
    ok = ok and math.isfinite(v)
    return {"name": name, "value": v, "threshold": threshold, "relation": relation, "pass": bool(ok)}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _sample(m, count):
    pts = m.grid.points
    if count is None or count >= len(pts):
        return pts
    step = max(1, len(pts) // int(count))
    return pts[::step][: int(count)]


# -- tasks ------------------------------------------------------------------------------


def task_invariants(m, cfg, out: Path):
    p = cfg["params"]
    thr = float(p.get("threshold", 1e-8))
    pts = _sample(m, p.get("points"))
    w = webster(m, pts)
    Rn, An = tensor_norms_fast(w)
    S = np.real(np.asarray(w.S))
    g = np.asarray(w.g)
    levi = np.linalg.eigvalsh(0.5 * (g + np.conj(np.swapaxes(g, -1, -2))))[..., 0]
    res = {
        "max_R": float(np.max(Rn)),
        "max_T": float(np.max(An)),
        "S_mean": float(np.mean(S)),
        "S_std": float(np.std(S)),
        "S_min": float(np.min(S)),
        "S_max": float(np.max(S)),
        "levi_min": float(np.min(levi)),
        "points": int(len(pts)),
    }
    if m.grid.kind in ("nilmanifold", "hopf"):
        res["volume"] = total_volume(m)
    recs = [record("levi_min", res["levi_min"], 0.0, ">")]
    model = m.meta.get("model")
    perturbed = "rescaled_by" in m.meta
    if model in ("heisenberg", "nilmanifold") and not perturbed:
        recs += [record("max_R", res["max_R"], thr), record("max_T", res["max_T"], thr)]
    if model == "sphere" and not perturbed:
        recs += [record("max_T", res["max_T"], thr),
                 record("S_std_over_mean", res["S_std"] / abs(res["S_mean"]), 1e-6)]
    write_csv(out / "invariants.csv", ["point", "S", "norm_R", "norm_T"],
              [[i, S[i], Rn[i], An[i]] for i in range(len(pts))])
    return res, recs


def task_conformal(m, cfg, out: Path):
    p = cfg["params"]
    thr = float(p.get("threshold", 1e-6))
    pts = _sample(m, p.get("points", 64))
    if "f" in p:
        fields = [trig_field(p["f"], "f")]
    else:
        rng = np.random.default_rng(cfg["seed"])
        L = float(m.grid.meta.get("scale", 1.0))
        fields = []
        for i in range(int(p.get("fields", 5))):
            terms = []
            for _ in range(3):
                k = np.zeros(m.dim)
                k[: 2 * m.n] = rng.integers(-2, 3, size=2 * m.n) / L
                terms.append((float(rng.uniform(-0.1, 0.1)), tuple(k), float(rng.uniform(0, 2 * np.pi))))
            fields.append(ScalarField.trig(terms, name=f"f{i}"))
    res, recs, rows = {}, [], []
    for f in fields:
        dev = C.transformation_check(m, f, pts)
        res[f.name] = dev
        for key, v in dev.items():
            recs.append(record(f"{f.name}.{key}", v, thr))
            rows.append([f.name, key, v])
    write_csv(out / "conformal.csv", ["field", "tensor", "relative_deviation"], rows)
    return res, recs


def _init_density(m, p, seed):
    kind = p.get("init", "perturbed")
    if kind == "one":
        return 1.0
    if kind == "perturbed":
        L = float(m.grid.meta.get("scale", 1.0))
        return ScalarField(lambda x: 1.0 + 0.2 * jnp.cos(2 * jnp.pi * x[0] / L), "init")
    if kind == "random":
        return Y.random_positive_field(discrete_laplacian(m), np.random.default_rng(seed))
    raise ConfigError(f"unknown init {kind!r}")


def _center_index(m):
    return int(np.ravel_multi_index(tuple(s // 2 for s in m.grid.shape), m.grid.shape))


def _green_records(m, op, pole, thr):
    G = Y.green_function(m, op, pole)
    recs = [record("green.min_minus_one", abs(float(np.min(G.values)) - 1.0), 1e-12),
            record("green.residual", G.residual, thr)]
    if not G.offset:
        recs.append(record("green.min_raw", float(np.min(G.raw)), 0.0, ">"))
    return G, recs


def task_yamabe(m, cfg, out: Path):
    p = cfg["params"]
    opts = Y.YamabeOptions(tol=float(p.get("tol", 1e-8)), max_iter=int(p.get("max_iter", 200)))
    op = discrete_laplacian(m)
    sol = Y.yamabe_minimize(m, op, _init_density(m, p, cfg["seed"]), opts)
    u = sol.u.values.reshape(op.shape)
    B = Y.functional_B(m, u, op)
    hist = np.asarray(sol.history)
    p_exp = C.yamabe_exponent(m.n)
    res = {"solution": sol.summary(), "B": B, "clip_events": sol.clip_events,
           "constant_curvature_residual": Y.constant_curvature_residual(m, op, u),
           # diagnostics only: no a-priori bound is certified
           "iterate_norms": {"min": float(u.min()), "max": float(u.max()),
                             "L_p": float(op.inner(np.abs(u) ** (p_exp - 1), np.abs(u)) ** (1 / p_exp))}}
    if m.meta.get("model") == "sphere" and "rescaled_by" not in m.meta:
        # A at the standard density bounds the invariant from above
        res["Y_upper_bound"] = Y.el_residual(op, Y._normalize(op, np.ones(op.shape), p_exp), p_exp)[0]
    recs = [
        record("EL_residual", sol.EL_residual, float(p.get("el_threshold", 1e-6))),
        record("B_minus_one", abs(B - 1.0), 1e-10),
        record("descent_increase", float(np.max(np.diff(hist))) if len(hist) > 1 else 0.0, 0.0),
    ]
    if m.meta.get("model") == "nilmanifold" and "rescaled_by" not in m.meta:
        recs.append(record("abs_Y_est", abs(sol.Y_est), float(p.get("threshold", 1e-4))))
    ytol = float(p.get("y_tol", 1e-4))
    if sol.Y_est <= ytol:
        res["branch"] = "nonpositive"
        if m.grid.kind == "nilmanifold":
            # central translation by one t-cell: isometry of the constant-curvature form
            shifted = np.roll(u, -1, axis=-1)
            h = m.grid.axes[-1][1] - m.grid.axes[-1][0]
            F = C.heisenberg_translation(np.r_[np.zeros(2 * m.n), h], m.n)
            lam = np.array([C.pseudoconformal_factor(F, m, m, x)[0] for x in _sample(m, 32)])
            lam_u = (shifted / u).reshape(-1) ** (p_exp - 2)
            defect = float(max(np.max(np.abs(lam - 1.0)), np.max(np.abs(lam_u - 1.0))))
            res["isometry_defect"] = defect
            G = np.array([np.linalg.eigvalsh(C.adapted_metric(m, x))[0] for x in _sample(m, 32)])
            res["adapted_metric_min_eig"] = float(np.min(G))
            recs.append(record("isometry_defect", defect, float(p.get("isometry_threshold", 1e-3))))
            recs.append(record("adapted_metric_min_eig", res["adapted_metric_min_eig"], 0.0, ">"))
    else:
        res["branch"] = "positive"
        G, grecs = _green_records(m, op, _center_index(m), float(p.get("green_threshold", 1e-8)))
        res["green"] = G.summary()
        recs += grecs
        if m.grid.kind == "hopf":
            F = C.SmoothMap(lambda x: x + jnp.array([0.0, 0.3, -0.2]), name="rotation")
            lam = [C.pseudoconformal_factor(F, m, m, x) for x in _sample(m, 16)]
            dev = float(max(abs(a - 1.0) + r for a, r in lam))
            res["rotation_factor_defect"] = dev
            recs.append(record("rotation_factor_defect", dev, 1e-9))
    write_csv(out / "yamabe_u.csv", ["node", "u"], [[i, v] for i, v in enumerate(sol.u.values)])
    return res, recs


def task_green(m, cfg, out: Path):
    p = cfg["params"]
    op = discrete_laplacian(m)
    pole = p.get("pole", "center")
    pole = _center_index(m) if pole == "center" else int(pole)
    G, recs = _green_records(m, op, pole, float(p.get("threshold", 1e-8)))
    write_csv(out / "green.csv", ["node", "G"], [[i, v] for i, v in enumerate(G.values)])
    return {"green": G.summary()}, recs


def _family(m, cfg):
    d = cfg.get("deformation") or {}
    try:
        return deformation_family(m, d.get("recipe", "contact"), d.get("eps", [0.1, 0.05, 0.025]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def task_deform(m, cfg, out: Path):
    p = cfg["params"]
    fam = _family(m, cfg)
    pts = _sample(m, p.get("points", 64))
    fam.sample = pts
    c0 = fam.deviations(0)
    c1 = fam.deviations(1)
    conv = convergence_ratios(fam, pts)
    res = {"eps": fam.schedule, "recipe": fam.recipe, "C0": c0, "C1": c1,
           "levi_min": [fam.levi_min(k) for k in range(len(fam))], "scalars": conv}
    recs = [record("C0_monotone", float(fam.monotone(0)), 1.0, ">="),
            record("C1_monotone", float(fam.monotone(1)), 1.0, ">=")]
    recs += [record(f"levi_min[{k}]", v, 0.0, ">") for k, v in enumerate(res["levi_min"])]
    lo, hi = p.get("ratio_range", [0.4, 0.6])
    halving = all(abs(b / a - 0.5) < 1e-12 for a, b in zip(fam.schedule, fam.schedule[1:]))
    if halving:
        for key, rat in conv["ratio"].items():
            for i, r in enumerate(rat):
                if conv["deviation"][key][i] > 1e-10:
                    recs.append(record(f"ratio.{key}[{i}]", r, (lo, hi), "in"))
    rows = [[k, fam.schedule[k], c0[k], c1[k]] for k in range(len(fam))]
    write_csv(out / "deform.csv", ["member", "eps", "C0", "C1"], rows)
    return res, recs


def task_norms(m, cfg, out: Path):
    p = cfg["params"]
    lo = np.asarray(p.get("lower", m.chart.lower), dtype=float)
    hi = np.asarray(p.get("upper", m.chart.upper), dtype=float)
    U = FS.Domain.box(m, lo, hi)
    battery = FS.bump_battery(m, lo, hi, int(p.get("count", 3)), cfg["seed"])
    s = float(p.get("s", 0.5))
    reports = []
    for f in battery:
        reports += [FS.sobolev_norm(m, f, 2.0, 1, U), FS.sobolev_norm(m, f, 2.0, 2, U),
                    FS.gamma_norm(m, f, s, U, seed=cfg["seed"]),
                    FS.holder_norm(m, f, s / 2, U, seed=cfg["seed"])]
    FS.write_reports(out / "norms.csv", reports)
    probes = {"base": FS.subelliptic_probe(m, battery, s=s, U=U, seed=cfg["seed"])}
    recs = [record(f"probe.base.{k}", probes["base"][k], 1e12) for k in "abcd"]
    if cfg.get("deformation"):
        fam = _family(m, cfg)
        for k in range(len(fam)):
            probes[f"member{k}"] = FS.subelliptic_probe(fam.member(k), battery, s=s, U=U, seed=cfg["seed"])
        tol = float(p.get("threshold", 0.3))
        for key in "abcd":
            vals = [probes[f"member{k}"][key] for k in range(len(fam))]
            spread = (max(vals) - min(vals)) / min(vals)
            recs.append(record(f"probe.spread.{key}", spread, tol))
    res = {"reports": [{"kind": r.kind, "value": r.value, "params": r.params, "diagnostics": r.diagnostics}
                       for r in reports], "probes": probes}
    return res, recs


RUNNERS = {
    "invariants": task_invariants,
    "conformal-check": task_conformal,
    "yamabe": task_yamabe,
    "green": task_green,
    "deform": task_deform,
    "norms": task_norms,
}


def run(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    m = build_model(cfg)
    try:
        res, recs = RUNNERS[cfg["task"]](m, cfg, out)
    except CRGeometryError as exc:
        res, recs = {"error": str(exc)}, [{"name": f"error.{type(exc).__name__}", "value": None,
                                           "threshold": None, "relation": "raises", "pass": False}]
    failed = [r["name"] for r in recs if not r["pass"]]
    summary = {
        "schema": SCHEMA,
        "task": cfg["task"],
        "config": {k: v for k, v in cfg.items()},
        "model": m.name,
        "results": res,
        "records": recs,
        "status": "fail" if failed else "pass",
    }
    text = json.dumps(_clean(summary), sort_keys=True, indent=2) + "\n"
    (out / "summary.json").write_text(text)
    if failed:
        print(f"contract violation: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


class _Parser(argparse.ArgumentParser):
    # exit status 2 is reserved for contract violations
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="crgeom", description="pseudohermitian geometry experiments")
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--task", help=f"override the configured task ({', '.join(TASKS)})")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--seed", type=int, help="seed for randomized batteries")
    ap.add_argument("--grid", help="grid override, e.g. 32x32x32")
    ap.add_argument("--threshold", type=float, help="override the task's main threshold")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
        return run(cfg, Path(args.out))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
