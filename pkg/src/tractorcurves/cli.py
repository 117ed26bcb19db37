"""Command-line experiment runner.

    python -m tractorcurves <curvature|trace|check|integrals|converge> --config cfg.json \
        [--out DIR] [--format csv|json] [--seed N]

Exit codes: 0 when every requested check passes, 1 when a check fails (the
report is still written), 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import jsonschema
import numpy as np

from .conformal import AlmostPRStructure, Scale, ae_residual
from .curves import (
    CurveState,
    CurveTrace,
    annotate,
    boundary_incidence,
    integrate_conformal_circle,
    integrate_geodesic,
    schouten_alignment_residual,
    trace_generalized_geodesic,
)
from .errors import CheckFailure, ConfigError, InsufficientSamples, NoBoundaryHit, TractorCurvesError
from .expr import parse_expression, parse_matrix
from .geometry import MetricField, curvature_at
from .integrals import (
    TwoFormField,
    constant_two_form,
    conservation_report,
    position_wedge,
    squared_coordinate_form,
)
from .integrators import METHODS, IntegratorConfig
from .io import write_json, write_trace
from .models import MODEL_NAMES, analytic_reference, make_model, random_unit_vectors
from .tractor import h_pair, scale_tractor, scale_tractor_parallel_residual

COMMANDS = ("curvature", "trace", "check", "integrals", "converge")

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": ["string", "number"]}}}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"type": "string"},
        "model": {
            "type": "object",
            "properties": {
                "name": {"enum": list(MODEL_NAMES)},
                "dim": {"type": "integer", "minimum": 2},
                "margin": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["name", "dim"],
            "additionalProperties": False,
        },
        "structure": {
            "type": "object",
            "properties": {
                "dim": {"type": "integer", "minimum": 3},
                "metric": _matrix,
                "scale": {"type": ["string", "number"]},
                "domain_radius": {"type": "number", "exclusiveMinimum": 0},
                "name": {"type": "string"},
            },
            "required": ["dim", "metric"],
            "additionalProperties": False,
        },
        "flow": {"enum": ["generalized_geodesic", "geodesic", "conformal_circle"]},
        "mode": {"enum": ["einstein", "interior"]},
        "initial_conditions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"x": _vector, "u": _vector, "a": _vector},
                "required": ["x", "u"],
                "additionalProperties": False,
            },
        },
        "starts": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["radial", "random"]},
                "count": {"type": "integer", "minimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind", "count"],
            "additionalProperties": False,
        },
        "points": {
            "type": "object",
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "list": {"type": "array", "items": _vector},
            },
            "additionalProperties": False,
        },
        "integrator": {
            "type": "object",
            "properties": {
                "method": {"enum": list(METHODS)},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
                "max_step": {"type": "number", "exclusiveMinimum": 0},
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "max_steps": {"type": "integer", "minimum": 1},
                "renormalize_every": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "checks": {
            "type": "array",
            "items": {
                "anyOf": [
                    {"type": "string"},
                    {"type": "object", "properties": {"name": {"type": "string"}}, "required": ["name"]},
                ]
            },
        },
        "integrals": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["constant", "position_wedge", "squared_coordinate", "inline"]},
                    "matrix": _matrix,
                    "w": _vector,
                    "i": {"type": "integer", "minimum": 1},
                    "j": {"type": "integer", "minimum": 1},
                },
                "required": ["kind"],
                "additionalProperties": False,
            },
        },
        "convergence": {
            "type": "object",
            "properties": {
                "problems": {"type": "array", "items": {"enum": ["flat_circle", "hyperbolic_diameter"]}},
                "steps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": list(METHODS)},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


def validate_config(config: dict) -> None:
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    if ("model" in config) == ("structure" in config):
        raise ConfigError("config needs exactly one of 'model' or 'structure'")


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    validate_config(config)
    return config


# ---------------------------------------------------------------- building blocks


@dataclass
class Setup:
    name: str
    dim: int
    structure: AlmostPRStructure
    model: Optional[object] = None


def build_structure(config: dict) -> Setup:
    if "model" in config:
        m = config["model"]
        try:
            spec = make_model(m["name"], m["dim"], margin=m.get("margin", 0.05))
        except TractorCurvesError as exc:
            raise ConfigError(str(exc)) from None
        return Setup(spec.name, spec.dim, spec.structure, spec)
    st = config["structure"]
    n = st["dim"]
    comps = parse_matrix(st["metric"], n, symmetric=True)
    radius = st.get("domain_radius")
    domain = None if radius is None else (lambda x, r=radius: float(x @ x) < r * r)
    name = st.get("name", "inline")
    probe = np.zeros(n)
    g0 = comps(probe)
    raw = np.array([[parse_expression(e, n)(probe) for e in row] for row in st["metric"]])
    if not np.allclose(raw, raw.T):
        raise ConfigError("inline metric entries are not symmetric")
    evals = np.linalg.eigvalsh(g0)
    if np.any(np.abs(evals) < 1e-12):
        raise ConfigError("inline metric is degenerate at the origin")
    signature = (int(np.sum(evals > 0)), int(np.sum(evals < 0)))
    metric = MetricField(n, comps, signature=signature, domain=domain, name=name)
    scale = Scale(parse_expression(st.get("scale", 1.0), n), name="inline")
    return Setup(name, n, AlmostPRStructure(metric, scale, name=name))


def build_integrator(config: dict) -> IntegratorConfig:
    try:
        return IntegratorConfig(**config.get("integrator", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integrator: {exc}") from None


def build_integrals(config: dict, n: int) -> list[TwoFormField]:
    out = []
    for item in config.get("integrals", []):
        kind = item["kind"]
        if kind == "constant":
            K = np.asarray(item.get("matrix", []), dtype=float)
            if K.shape != (n, n):
                raise ConfigError(f"constant 2-form needs a {n}x{n} matrix")
            k = constant_two_form(K)
        elif kind == "position_wedge":
            w = np.asarray(item.get("w", []), dtype=float)
            if w.shape != (n,):
                raise ConfigError(f"position_wedge needs w of length {n}")
            k = position_wedge(w)
        elif kind == "squared_coordinate":
            i, j = item.get("i", 1) - 1, item.get("j", 2) - 1
            if not (0 <= i < n and 0 <= j < n and i != j):
                raise ConfigError("squared_coordinate needs distinct indices within the dimension")
            k = squared_coordinate_form(n, i, j)
        else:
            if "matrix" not in item:
                raise ConfigError("inline 2-form needs 'matrix'")
            k = TwoFormField(parse_matrix(item["matrix"], n, antisymmetric=True), name="inline")
        out.append(TwoFormField(k.k, k.partials, name=item.get("name", f"{kind}{len(out)}")))
    return out


def initial_conditions(config: dict, n: int, rng: np.random.Generator) -> list[CurveState]:
    states = []
    for ic in config.get("initial_conditions", []):
        x, u = np.asarray(ic["x"], float), np.asarray(ic["u"], float)
        a = np.asarray(ic["a"], float) if "a" in ic else None
        if x.shape != (n,) or u.shape != (n,) or (a is not None and a.shape != (n,)):
            raise ConfigError(f"initial condition vectors must have length {n}")
        try:
            states.append(CurveState(x, u, a))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "starts" in config:
        st = config["starts"]
        count, radius = st["count"], st.get("radius", 0.5)
        if st["kind"] == "radial":
            states += [CurveState(radius * d, d) for d in random_unit_vectors(count, n, rng)]
        else:
            pts = ball_points(n, count, rng, radius)
            states += [CurveState(p, v) for p, v in zip(pts, random_unit_vectors(count, n, rng))]
    return states


def sample_points(config: dict, n: int, rng: np.random.Generator) -> np.ndarray:
    pts = config.get("points", {})
    if "list" in pts:
        P = np.asarray(pts["list"], dtype=float)
        if P.ndim != 2 or P.shape[1] != n:
            raise ConfigError(f"points must have length {n}")
        return P
    return ball_points(n, pts.get("count", 20), rng, pts.get("radius", 0.9))


def ball_points(n: int, count: int, rng: np.random.Generator, radius: float) -> np.ndarray:
    v = rng.normal(size=(count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * radius * rng.uniform(size=(count, 1)) ** (1.0 / n)


def run_trace(setup: Setup, config: dict, cfg: IntegratorConfig, s0: CurveState) -> CurveTrace:
    S = setup.structure
    flow = config.get("flow", "generalized_geodesic")
    if flow == "generalized_geodesic":
        trace = trace_generalized_geodesic(S, s0.x, s0.u, cfg, mode=config.get("mode", "einstein"))
    elif flow == "geodesic":
        trace = integrate_geodesic(S.singular_metric, s0, cfg)
    else:
        trace = integrate_conformal_circle(S, s0, cfg)
    annotate(S, trace, ("s", "wedge_residual", "sigma_norm2"))
    try:
        annotate(S, trace, ("sigma_residual",))
    except InsufficientSamples:
        trace.diagnostics["sigma_residual"] = np.full(len(trace), np.nan)
    return trace


# ---------------------------------------------------------------- checks


@dataclass
class Context:
    setup: Setup
    config: dict
    rng: np.random.Generator
    traces: list = field(default_factory=list)
    integrals: list = field(default_factory=list)
    reports: list = field(default_factory=list)  # per trace: list of FirstIntegralReport
    slopes: dict = field(default_factory=dict)


def _region(trace: CurveTrace, opts: dict) -> np.ndarray:
    r = opts.get("max_radius")
    if r is None:
        return np.ones(len(trace), dtype=bool)
    return np.linalg.norm(trace.X, axis=1) <= r


def _finite_max(values) -> float:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(np.max(values)) if values.size else float("nan")


def check_wedge_residual(ctx: Context, opts: dict):
    thr = opts.get("threshold", 1e-6)
    per = [_finite_max(t.diagnostics["wedge_residual"][_region(t, opts)]) for t in ctx.traces]
    worst = max(per) if per else float("nan")
    return bool(per) and worst <= thr, {"threshold": thr, "max": worst, "per_trace": per}


def check_sigma_parallel(ctx: Context, opts: dict):
    thr = opts.get("threshold", 1e-6)
    per = [_finite_max(t.diagnostics["sigma_residual"][_region(t, opts)]) for t in ctx.traces]
    worst = max(per) if per else float("nan")
    return bool(per) and worst <= thr, {"threshold": thr, "max": worst, "per_trace": per}


def check_sigma_norm_drift(ctx: Context, opts: dict):
    thr = opts.get("threshold", 1e-8)
    per = [float(np.ptp(t.diagnostics["sigma_norm2"])) for t in ctx.traces]
    worst = max(per) if per else float("nan")
    return bool(per) and worst <= thr, {"threshold": thr, "max": worst, "per_trace": per}


def check_boundary_incidence(ctx: Context, opts: dict):
    tol = opts.get("tolerance_deg", 0.01)
    hits, angles, ok = [], [], True
    for t in ctx.traces:
        try:
            hit = boundary_incidence(ctx.setup.structure, t)
        except NoBoundaryHit:
            hits.append(None)
            ok = False
            continue
        hits.append({"param": hit.param, "point": hit.point, "incidence_deg": hit.incidence_deg})
        angles.append(hit.incidence_deg)
        ok = ok and abs(hit.incidence_deg - 90.0) <= tol
    return bool(ctx.traces) and ok, {"tolerance_deg": tol, "angles_deg": angles, "hits": hits}


def check_conformal_circle_agreement(ctx: Context, opts: dict):
    """Schouten alignment of random unit directions; 'misaligned' expects a non-Einstein structure."""
    S = ctx.setup.structure
    n = ctx.setup.dim
    thr = opts.get("threshold", 1e-3)
    samples = opts.get("samples", 1000)
    expect = opts.get("expect", "aligned")
    fraction_needed = opts.get("fraction", 0.9)
    pts = ball_points(n, samples, ctx.rng, opts.get("radius", 0.9))
    vel = random_unit_vectors(samples, n, ctx.rng)
    res = np.array([schouten_alignment_residual(S, CurveState(p, v)) for p, v in zip(pts, vel)])
    frac = float(np.mean(res >= thr))
    stats = {"threshold": thr, "expect": expect, "fraction_misaligned": frac, "samples": samples, "max": float(res.max())}
    if expect == "misaligned":
        stats["required_fraction"] = fraction_needed
        return frac >= fraction_needed, stats
    return frac == 0.0, stats


def check_ae_residual(ctx: Context, opts: dict):
    S = ctx.setup.structure
    pts = sample_points(ctx.config, ctx.setup.dim, ctx.rng)
    res = np.array([ae_residual(S, p) for p in pts])
    expect = opts.get("expect", "einstein")
    if expect == "non_einstein":
        thr = opts.get("threshold", 1e-3)
        frac = float(np.mean(res >= thr))
        need = opts.get("fraction", 0.9)
        return frac >= need, {"threshold": thr, "expect": expect, "fraction_above": frac, "min": float(res.min())}
    thr = opts.get("threshold", 1e-8)
    return float(res.max()) <= thr, {"threshold": thr, "expect": expect, "max": float(res.max())}


def check_scale_tractor_parallel(ctx: Context, opts: dict):
    S = ctx.setup.structure
    thr = opts.get("threshold", 1e-8)
    worst_par, worst_h = 0.0, 0.0
    for t in ctx.traces:
        hs = []
        for st in t.states:
            if S.on_zero_locus(st.x) or not S.background.contains(st.x):
                continue
            worst_par = max(worst_par, scale_tractor_parallel_residual(S, st))
            I = scale_tractor(S, st.x)
            hs.append(h_pair(I, I))
        if hs:
            worst_h = max(worst_h, float(np.ptp(hs)))
    ok = bool(ctx.traces) and worst_par <= thr and worst_h <= thr
    return ok, {"threshold": thr, "max_parallel_residual": worst_par, "max_hII_variation": worst_h}


def check_first_integral_drift(ctx: Context, opts: dict):
    expect = opts.get("expect", "conserved")
    thr = opts.get("threshold", 1e-3 if expect == "drift" else 1e-7)
    rel = [r.relative_drift for reps in ctx.reports for r in reps]
    if not rel:
        return False, {"threshold": thr, "expect": expect, "note": "no integrals evaluated"}
    if expect == "drift":
        return min(rel) >= thr, {"threshold": thr, "expect": expect, "min_relative_drift": min(rel)}
    return max(rel) <= thr, {"threshold": thr, "expect": expect, "max_relative_drift": max(rel)}


def check_convergence_order(ctx: Context, opts: dict):
    target, tol = opts.get("order", 4.0), opts.get("tolerance", 0.3)
    ok = bool(ctx.slopes) and all(abs(s - target) <= tol for s in ctx.slopes.values())
    return ok, {"order": target, "tolerance": tol, "slopes": ctx.slopes}


CHECKS: dict[str, tuple[str, Callable]] = {
    "wedge_residual": ("trace", check_wedge_residual),
    "sigma_parallel": ("trace", check_sigma_parallel),
    "sigma_norm_drift": ("trace", check_sigma_norm_drift),
    "boundary_incidence": ("trace", check_boundary_incidence),
    "scale_tractor_parallel": ("trace", check_scale_tractor_parallel),
    "conformal_circle_agreement": ("point", check_conformal_circle_agreement),
    "ae_residual": ("point", check_ae_residual),
    "first_integral_drift": ("integral", check_first_integral_drift),
    "convergence_order": ("converge", check_convergence_order),
}

_COMMAND_KINDS = {
    "curvature": {"point"},
    "trace": {"trace"},
    "integrals": {"integral"},
    "converge": {"converge"},
    "check": {"point", "trace", "integral"},
}


def _check_specs(config: dict) -> list[dict]:
    specs = []
    for item in config.get("checks", []):
        spec = {"name": item} if isinstance(item, str) else dict(item)
        if spec["name"] not in CHECKS:
            raise ConfigError(f"unknown check {spec['name']!r}; expected one of {sorted(CHECKS)}")
        specs.append(spec)
    return specs


# ---------------------------------------------------------------- experiments


def curvature_report(setup: Setup, points: np.ndarray) -> list[dict]:
    S = setup.structure
    rows = []
    for p in points:
        row = {"x": p}
        try:
            pack = curvature_at(S.singular_metric, p)
        except TractorCurvesError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        I = scale_tractor(S, p)
        row.update({"J": pack.J, "scalar": pack.scalar, "ae_residual": ae_residual(S, p), "hII": h_pair(I, I)})
        g = pack.metric
        lam = np.trace(pack.schouten_mixed()) / setup.dim
        row["schouten_factor"] = float(lam)
        row["schouten_trace_free"] = float(np.max(np.abs(pack.schouten - lam * g)) / np.max(np.abs(g)))
        if setup.model is not None:
            ref = analytic_reference(setup.model, p)
            row["schouten_error"] = float(np.max(np.abs(pack.schouten - ref.schouten)) / np.max(np.abs(g)))
        rows.append(row)
    return rows


def _exact_flat_circle(r: float, T: float) -> np.ndarray:
    return np.array([r * np.cos(T / r), r * np.sin(T / r), 0.0])


def convergence_problem(problem: str, h: float, t_end: float, method: str = "rk4_fixed") -> float:
    """Terminal position error of a fixed-step run with a known exact solution."""
    cfg = IntegratorConfig(method=method, step=h, max_step=h, t_max=t_end, renormalize_every=0)
    if problem == "flat_circle":
        r = 0.25
        S = make_model("euclidean", 3).structure
        s0 = CurveState([r, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0 / r, 0.0, 0.0])
        trace = integrate_conformal_circle(S, s0, cfg)
        exact = _exact_flat_circle(r, t_end)
    elif problem == "hyperbolic_diameter":
        # unit speed in s^-2 delta at the origin is |u| = 1/2; x(t) = tanh(t/2) e1
        S = make_model("hyperbolic", 3).structure
        trace = integrate_geodesic(S.singular_metric, CurveState([0.0, 0.0, 0.0], [0.5, 0.0, 0.0]), cfg)
        exact = np.array([np.tanh(t_end / 2.0), 0.0, 0.0])
    else:
        raise ConfigError(f"unknown convergence problem {problem!r}")
    if abs(trace.params[-1] - t_end) > 1e-12:
        raise ConfigError(f"{problem}: run stopped early at {trace.params[-1]}")
    return float(np.linalg.norm(trace.X[-1] - exact))


def convergence_study(config: dict) -> dict:
    """Log-log slope of terminal error against step size for each problem."""
    conv = config.get("convergence", {})
    steps = sorted(conv.get("steps", [1e-2, 5e-3, 2.5e-3]), reverse=True)
    method = conv.get("method", "rk4_fixed")
    if method != "rk4_fixed":
        raise ConfigError("convergence study needs the fixed-step method")
    if len(steps) < 3:
        raise ConfigError(f"convergence study needs at least 3 step sizes, got {len(steps)}")
    t_end = conv.get("t_end", 1.0)
    out = {}
    for problem in conv.get("problems", ["flat_circle", "hyperbolic_diameter"]):
        errors = [convergence_problem(problem, h, t_end, method) for h in steps]
        if min(errors) <= 0.0:
            raise ConfigError(f"{problem}: zero error, cannot fit an order")
        slope = float(np.polyfit(np.log(steps), np.log(errors), 1)[0])
        out[problem] = {"steps": steps, "errors": errors, "slope": slope}
    return out


def _ordered_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_experiment(
    config: dict,
    command: str = "check",
    out_dir=None,
    fmt: Optional[str] = None,
    seed: Optional[int] = None,
) -> tuple[int, dict]:
    """Run the pipelines of ``command``; returns (exit code, report).

    Raises ConfigError for invalid input. Check failures are reported through
    the exit code, never raised.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    validate_config(config)
    seed = config.get("seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    out_cfg = config.get("output", {})
    fmt = fmt or out_cfg.get("format", "csv")
    out_dir = Path(out_dir or out_cfg.get("dir", "."))
    workers = config.get("workers", 1)
    specs = [s for s in _check_specs(config) if CHECKS[s["name"]][0] in _COMMAND_KINDS[command]]
    setup = build_structure(config)
    ctx = Context(setup, config, rng)
    report = {
        "experiment": config.get("experiment", command),
        "model": setup.name,
        "command": command,
        "seed": seed,
        "checks": [],
    }

    if command == "converge":
        study = convergence_study(config)
        ctx.slopes = {k: v["slope"] for k, v in study.items()}
        report["convergence"] = study
        if not specs:
            specs = [{"name": "convergence_order"}]
    elif command == "curvature":
        report["points"] = curvature_report(setup, sample_points(config, setup.dim, rng))
    else:
        cfg = build_integrator(config)
        states = initial_conditions(config, setup.dim, rng)
        needs_traces = command != "check" or any(CHECKS[s["name"]][0] != "point" for s in specs)
        if not states and needs_traces:
            raise ConfigError("no initial conditions: give 'initial_conditions' or 'starts'")
        try:
            ctx.traces = _ordered_map(lambda s0: run_trace(setup, config, cfg, s0), states, workers)
        except TractorCurvesError as exc:
            raise ConfigError(f"cannot trace from the configured starts: {type(exc).__name__}: {exc}") from None
        integrals = build_integrals(config, setup.dim) if command in ("integrals", "check") else []
        for t in ctx.traces:
            reps = [conservation_report(setup.structure, k, t) for k in integrals]
            for k, r in zip(integrals, reps):
                t.diagnostics[f"fi_{k.name}"] = r.values
            ctx.reports.append(reps)
        names = [k.name for k in integrals]
        out_dir.mkdir(parents=True, exist_ok=True)
        summaries = []
        for i, (t, reps) in enumerate(zip(ctx.traces, ctx.reports)):
            path = write_trace(out_dir / f"trace_{i:03d}.{fmt}", t, fmt, names)
            summaries.append(
                {
                    "file": path.name,
                    "samples": len(t),
                    "status": t.meta.get("status"),
                    "param_end": float(t.params[-1]),
                    "max_wedge_residual": _finite_max(t.diagnostics["wedge_residual"]),
                    "max_sigma_residual": _finite_max(t.diagnostics["sigma_residual"]),
                    "integrals": [r.summary() for r in reps],
                }
            )
        report["traces"] = summaries

    failed = []
    for spec in specs:
        _, fn = CHECKS[spec["name"]]
        ok, stats = fn(ctx, spec)
        report["checks"].append({"name": spec["name"], "pass": bool(ok), "stats": stats})
        if not ok:
            failed.append(spec["name"])
    out_dir.mkdir(parents=True, exist_ok=True)
    report["failed"] = failed
    write_json(out_dir / "report.json", report)
    return (1 if failed else 0), report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tractorcurves", description="Tractor-calculus curve experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default: config output.dir or .)")
        p.add_argument("--format", choices=("csv", "json"), default=None, help="trace file format")
        p.add_argument("--seed", type=int, default=None, help="random seed (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        config = load_config(args.config)
        code, report = run_experiment(config, args.command, args.out, args.format, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for chk in report["checks"]:
        print(f"{'PASS' if chk['pass'] else 'FAIL'} {chk['name']}")
    if code:
        print(f"{CheckFailure.__name__}: {', '.join(report['failed'])}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
