"""Command-line front end.

Five workflows over a JSON config file: ``analyze`` (one operating point),
``optimize`` (closed form or grid search), ``sweep`` (CSV over one swept
variable), ``simulate`` (Monte Carlo with analytic side-by-side), and
``boundary`` (feasible-region edge).  Outputs are data files (JSON/CSV, to
stdout by default); no plotting.

Exit codes: 0 success, 2 validation error, 3 unstable parameterization,
4 power-ratio violation, 5 empty feasible region.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import metrics, optimize, phy, queueing, sim
from .errors import (
    InvalidArrival,
    InvalidParameter,
    NoFeasiblePoint,
    PowerRatioViolation,
    Unstable,
    ValidationError,
)
from .model import INFINITE, DelayConstraint, Finite, Infinite, ValidatedConfig, config_from_dict

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNSTABLE = 3
EXIT_POWER_RATIO = 4
EXIT_INFEASIBLE = 5


def _fmt(x) -> str:
    """Locale-independent 9-significant-digit float formatting."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def _load_doc(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValidationError([InvalidParameter("", "config root must be a JSON object")])
    return doc


def _apply_sets(doc: dict, sets: list[str]) -> dict:
    """Apply repeatable ``--set section.key=value`` overrides to the raw doc."""
    for item in sets:
        if "=" not in item:
            raise ValidationError([InvalidParameter(item, "--set expects section.key=value")])
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        if len(parts) != 2:
            raise ValidationError([InvalidParameter(key, "--set keys are section.key (e.g. protocol.q2)")])
        section, field = parts
        doc.setdefault(section, {})
        if not isinstance(doc[section], dict):
            raise ValidationError([InvalidParameter(section, "not a config section")])
        doc[section][field] = value
    return doc


def _config(args) -> ValidatedConfig:
    doc = _load_doc(args.config)
    _apply_sets(doc, args.set or [])
    return config_from_dict(doc)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------


def _analysis_payload(cfg: ValidatedConfig) -> dict:
    p = cfg.protocol
    probs = phy.success_probabilities(cfg)
    rates = queueing.ServiceRates(mu1=float(probs.p_1_12), mu2=probs.p_1_1)
    qa = queueing.analyze(p.lam, rates, p.m, require_delay=p.lam > 0)
    report = metrics.secondary_throughput(cfg)
    k = optimize.kappa_constants(cfg, p.p2_mw)
    return {
        "success_probs": asdict(probs),
        "kappa": asdict(k),
        "mean_pt_to_receiver_distance_m": phy.expected_pt_to_sr_distance(cfg),
        "queue": asdict(qa),
        "throughput": {
            "t_s": report.t_s,
            "t_s_case1": report.breakdown[0],
            "t_s_case2": report.breakdown[1],
            "delay": report.delay,
            "feasible": report.feasible,
        },
    }


def cmd_analyze(args) -> int:
    cfg = _config(args)
    _emit(_json_text(_analysis_payload(cfg)), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config(args)
    if cfg.delay is None:
        raise ValidationError([InvalidParameter("delay_constraint", "required by optimize")])
    p = cfg.protocol
    if args.mode == "closed-form":
        if not isinstance(p.m, Infinite):
            raise ValidationError(
                [InvalidParameter("protocol.m", "closed-form mode applies to the no-congestion-control case (m=inf)")]
            )
        result = optimize.constrained_optimal_q2(cfg, p.p2_mw, p.lam, cfg.delay)
        _emit(_json_text(asdict(result)), args.out)
        return EXIT_OK
    if not isinstance(p.m, Finite):
        raise ValidationError([InvalidParameter("protocol.m", "grid mode needs a finite congestion threshold")])
    grid = optimize.GridSpec(
        q2_steps=args.q2_steps,
        p2_steps=args.p2_steps,
        p2_range=(args.p2_min, args.p2_max) if args.p2_min or args.p2_max else None,
    )
    want_surface = bool(args.surface_out)
    out = optimize.grid_optimize(cfg, p.lam, p.m, cfg.delay, grid, with_surface=want_surface)
    if want_surface:
        result, surface = out
        _emit(_csv_text(["q2", "p2_mw", "t_s", "delay", "feasible"], surface), args.surface_out)
    else:
        result = out
    _emit(_json_text(asdict(result)), args.out)
    return EXIT_OK


_SWEEP_VARS = {"q1", "q2", "p2", "lambda", "m"}
_SWEEP_OUTPUTS = {
    "success_probs": ["p_2_2", "p_1_12", "p_2_12", "p_1_1"],
    "throughput": ["t_s", "t_s_case1", "t_s_case2"],
    "delay": ["delay"],
    "occupancy": ["pi0", "prob_mid", "prob_above"],
}


def _sweep_values(spec: dict) -> list:
    if "values" in spec:
        vals = list(spec["values"])
        if len(vals) < 1:
            raise ValidationError([InvalidParameter("values", "empty sweep")])
        return vals
    rng = spec.get("range")
    if not rng:
        raise ValidationError([InvalidParameter("range", "sweep needs 'range' or 'values'")])
    steps = int(rng["steps"])
    if steps < 2:
        raise ValidationError([InvalidParameter("range.steps", "must be >= 2")])
    return list(np.linspace(float(rng["start"]), float(rng["stop"]), steps))


def _sweep_point(cfg_doc: dict, variable: str, value) -> ValidatedConfig:
    doc = json.loads(json.dumps(cfg_doc))  # deep copy
    key = {"q1": "q1", "q2": "q2", "p2": "p2_mw", "lambda": "lambda", "m": "m"}[variable]
    doc["protocol"][key] = value
    return config_from_dict(doc)


def _sweep_row(cfg: ValidatedConfig, outputs: list[str]) -> list:
    p = cfg.protocol
    row: list = []
    probs = None
    qa = None
    report = None
    for out in outputs:
        try:
            if out == "success_probs":
                probs = probs or phy.success_probabilities(cfg)
                row += [probs.p_2_2, probs.p_1_12, probs.p_2_12, probs.p_1_1]
            elif out == "throughput":
                report = report or metrics.secondary_throughput(cfg)
                row += [report.t_s, report.breakdown[0], report.breakdown[1]]
            elif out == "delay":
                report = report or metrics.secondary_throughput(cfg)
                row += [report.delay]
            elif out == "occupancy":
                mu1 = float(phy.p_1_12(p.q2, p.p2_mw, cfg))
                rates = queueing.ServiceRates(mu1=mu1, mu2=phy.p_1_1(cfg))
                qa = qa or queueing.analyze(p.lam, rates, p.m, require_delay=False)
                row += [qa.pi0, qa.prob_mid, qa.prob_above]
        except (Unstable, InvalidArrival):
            row += [math.nan] * len(_SWEEP_OUTPUTS[out])
    return row


def cmd_sweep(args) -> int:
    cfg_doc = _apply_sets(_load_doc(args.config), args.set or [])
    config_from_dict(cfg_doc)  # validate the base point before sweeping
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    unknown = set(spec) - {"variable", "range", "values", "outputs", "fixed"}
    if unknown:
        raise ValidationError([InvalidParameter(k, "unknown sweep key") for k in sorted(unknown)])
    variable = spec.get("variable")
    if variable not in _SWEEP_VARS:
        raise ValidationError([InvalidParameter("variable", f"must be one of {sorted(_SWEEP_VARS)}")])
    outputs = spec.get("outputs") or []
    bad = [o for o in outputs if o not in _SWEEP_OUTPUTS]
    if bad or not outputs:
        raise ValidationError([InvalidParameter("outputs", f"need a nonempty subset of {sorted(_SWEEP_OUTPUTS)}")])
    fixed = spec.get("fixed") or {}
    if variable in fixed.get("protocol", {}) or (variable == "p2" and "p2_mw" in fixed.get("protocol", {})):
        raise ValidationError([InvalidParameter("fixed", f"swept variable {variable!r} also pinned in 'fixed'")])
    for section, fields in fixed.items():
        cfg_doc.setdefault(section, {})
        cfg_doc[section].update(fields)

    header = [variable]
    for out in outputs:
        header += _SWEEP_OUTPUTS[out]
    rows = []
    for value in _sweep_values(spec):
        cfg = _sweep_point(cfg_doc, variable, value)
        rows.append([value] + _sweep_row(cfg, outputs))
    _emit(_csv_text(header, rows), args.out)
    return EXIT_OK


def _pooled_probability(reps: list[sim.EmpiricalProbability]):
    n = sum(r.n for r in reps)
    if n == 0:
        return math.nan, math.nan, 0
    value = sum(r.value * r.n for r in reps if r.n) / n
    se = math.sqrt(sum((r.se * r.n) ** 2 for r in reps if r.n)) / n
    return value, se, n


def _pooled_mean(values: list[float]):
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, math.nan
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    return mean, se

def _z(emp, se, ref):
    if not se or math.isnan(se) or se == 0.0:
        return math.nan
    return (emp - ref) / se


def cmd_simulate(args) -> int:
    cfg = _config(args)
    p = cfg.protocol
    spec0 = sim.SimSpec(
        slots=args.slots,
        seed=args.seed,
        sim_radius_factor=args.radius_factor,
        warmup_slots=args.warmup,
    )
    reps = [
        sim.run(cfg, spec=sim.SimSpec(
            slots=spec0.slots,
            seed=spec0.seed + i,
            sim_radius_factor=spec0.sim_radius_factor,
            warmup_slots=spec0.warmup_slots,
        ))
        for i in range(args.replications)
    ]

    mu1 = float(phy.p_1_12(p.q2, p.p2_mw, cfg))
    rates = queueing.ServiceRates(mu1=mu1, mu2=phy.p_1_1(cfg))
    analytic: dict = {
        "p_2_2": float(phy.p_2_2(p.q1, cfg)),
        "p_1_12": mu1,
        "p_2_12": float(phy.p_2_12(p.q2, p.p2_mw, cfg)),
        "p_1_1": phy.p_1_1(cfg),
    }
    stable = queueing.is_stable(p.lam, rates, p.m)
    if stable:
        qa = queueing.analyze(p.lam, rates, p.m, require_delay=p.lam > 0)
        analytic.update(
            pi0=qa.pi0, prob_mid=qa.prob_mid, prob_above=qa.prob_above, q_bar=qa.q_bar, delay=qa.delay
        )

    pooled: dict = {}
    z: dict = {}
    for name in ("p_2_2", "p_1_12", "p_2_12", "p_1_1"):
        value, se, n = _pooled_probability([getattr(r.emp_p, name) for r in reps])
        pooled[name] = {"value": value, "se": se, "n": n}
        z[name] = _z(value, se, analytic[name])
    for idx, name in enumerate(("pi0", "prob_mid", "prob_above")):
        value, se = _pooled_mean([r.emp_occupancy[idx] for r in reps])
        pooled[name] = {"value": value, "se": se}
        if stable:
            z[name] = _z(value, se, analytic[name])
    for name, attr in (("q_bar", "emp_qbar"), ("delay", "emp_delay")):
        value, se = _pooled_mean([getattr(r, attr) for r in reps])
        pooled[name] = {"value": value, "se": se}
        if stable and analytic.get(name) is not None:
            z[name] = _z(value, se, analytic[name])
    growth = any(r.queue_growing for r in reps)

    payload = {
        "config_stable": stable,
        "queue_growth_detected": growth,
        "replications": [asdict(r) for r in reps],
        "pooled": pooled,
        "analytic": analytic,
        "z_scores": z,
    }
    _emit(_json_text(payload), args.out)
    return EXIT_OK


def _finite_boundary_q2(cfg: ValidatedConfig, lam: float, m: Finite, p2: float, d_max: float) -> float | None:
    """Largest q2 with average delay < d_max at fixed power (monotone in q2)."""

    def delay_at(q2: float) -> float:
        _, delay, _, _ = metrics._terms(cfg, lam, cfg.protocol.q1, q2, p2, m)
        return float(delay)

    if delay_at(1.0) < d_max:
        return 1.0
    if not delay_at(0.0) < d_max:
        return None
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-5:
        mid = 0.5 * (lo + hi)
        if delay_at(mid) < d_max:
            lo = mid
        else:
            hi = mid
    return lo


def cmd_boundary(args) -> int:
    cfg = _config(args)
    if cfg.delay is None:
        raise ValidationError([InvalidParameter("delay_constraint", "required by boundary")])
    lam = args.lam if args.lam is not None else cfg.protocol.lam
    m = cfg.protocol.m
    if args.m is not None:
        m = INFINITE if args.m in ("inf", "infinite") else Finite(int(args.m))
    p2_lo = args.p2_min or cfg.channel.p2_max_mw * 1e-3
    p2_hi = args.p2_max or cfg.channel.p2_max_mw
    p2_axis = np.geomspace(p2_lo, p2_hi, args.p2_steps)

    rows = []
    feasible_somewhere = False
    if isinstance(m, Infinite):
        for p2 in p2_axis:
            try:
                fb = optimize.feasible_q2_bound(cfg, float(p2), lam, cfg.delay)
            except NoFeasiblePoint:
                rows.append([float(p2), 0.0, "infeasible"])
                continue
            q2b, binding = fb.q2_max, fb.binding
            if q2b >= 1.0:
                q2b, binding = 1.0, "unit-interval"
            rows.append([float(p2), q2b, binding])
            feasible_somewhere = True
    else:
        if not lam < phy.p_1_1(cfg):
            raise Unstable(f"lam={lam} >= p_1_1: unstable for every q2")
        for p2 in p2_axis:
            q2b = _finite_boundary_q2(cfg, lam, m, float(p2), cfg.delay.d_max)
            if q2b is None:
                rows.append([float(p2), 0.0, "infeasible"])
            else:
                rows.append([float(p2), q2b, "unit-interval" if q2b >= 1.0 else "delay"])
                feasible_somewhere = True
    if not feasible_somewhere:
        raise NoFeasiblePoint("no power level admits a feasible access probability")
    _emit(_csv_text(["p2_mw", "q2_boundary", "binding"], rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sharedaccess", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config field")
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("analyze", help="success probabilities, queue analysis and throughput at one point")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="optimal secondary access (closed form or grid)")
    common(p)
    p.add_argument("--mode", choices=["closed-form", "grid"], required=True)
    p.add_argument("--q2-steps", type=int, default=200)
    p.add_argument("--p2-steps", type=int, default=200)
    p.add_argument("--p2-min", type=float, default=None)
    p.add_argument("--p2-max", type=float, default=None)
    p.add_argument("--surface-out", default=None, help="grid mode: write the full masked surface CSV here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="CSV of metrics over one swept variable")
    common(p)
    p.add_argument("--spec", required=True, help="sweep spec JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo replications with analytic side-by-side")
    common(p)
    p.add_argument("--slots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--warmup", type=int, default=2000)
    p.add_argument("--radius-factor", type=float, default=3.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("boundary", help="feasible-region boundary q2(P2)")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--m", default=None, help="congestion threshold (integer or 'inf')")
    p.add_argument("--p2-steps", type=int, default=100)
    p.add_argument("--p2-min", type=float, default=None)
    p.add_argument("--p2-max", type=float, default=None)
    p.set_defaults(func=cmd_boundary)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        for v in e.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except (json.JSONDecodeError, FileNotFoundError, KeyError, TypeError, ValueError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (Unstable, InvalidArrival) as e:
        print(f"unstable: {e}", file=sys.stderr)
        return EXIT_UNSTABLE
    except PowerRatioViolation as e:
        print(f"power ratio: {e}", file=sys.stderr)
        return EXIT_POWER_RATIO
    except NoFeasiblePoint as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
