"""Command line interface.

Subcommands: ``exponents`` (per-pair exponent breakdown CSV), ``bound``
(analytic bound reports as JSON), ``simulate`` (Monte Carlo estimate plus
bound verdict), ``detect`` (region-detection trials against their bound)
and ``gate-sec4`` (the entropy-margin gate for the shipped compound-BSC
example).

Exit codes: 0 success / PASS verdict, 1 FAIL verdict, 2 input error.
All numeric output carries 12 significant digits so regression diffs are
meaningful.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import montecarlo
from .channel import binary_entropy
from .errors import GepkitError, IntegrityError, ParseError, SchemaError
from .exponents import (
    ExponentCache,
    detection_bound,
    exponent_Ec,
    gep_bound_D,
    gep_bound_margin,
    gep_bound_partitioned,
)
from .scenario import Scenario, load_scenario

FMT = "%.12g"


def _fmt(x: float) -> str:
    return FMT % x


def _round12(x: float) -> float:
    return float(_fmt(x))


def _join(ids) -> str:
    return " ".join(str(i) for i in ids)


# ---------------------------------------------------------------------------
# bound evaluation shared by `bound` / `simulate` / `exponents`
# ---------------------------------------------------------------------------

def decode_bound_reports(scenario: Scenario, cache=None):
    """Per-D decoder bounds for the scenario's own partition."""
    cache = cache or ExponentCache(scenario.model, scenario.alpha)
    return {D: gep_bound_D(scenario.model, D, reg, scenario.alpha,
                           scenario.N, cache=cache)
            for D, reg in scenario.partition.items()}


def scenario_bound(scenario: Scenario, cache=None):
    """The analytic bound matching the scenario's decoder variant: summed
    per-D decoder bounds (plain), the margin bound (margin), or decode plus
    weighted detection (detect-then-decode).  Returns a BoundReport."""
    from .exponents import VACUITY_TOL, BoundReport

    cache = cache or ExponentCache(scenario.model, scenario.alpha)
    model, alpha, N = scenario.model, scenario.alpha, scenario.N
    if scenario.decoder == "margin":
        D = tuple(range(model.K))
        return gep_bound_margin(model, D, scenario.region, scenario.margin,
                                alpha, N, cache=cache)
    reports = decode_bound_reports(scenario, cache)
    raw = sum(r.raw for r in reports.values())
    components = {str(D): r.raw for D, r in reports.items()}
    if scenario.decoder == "detect":
        det_raw = 0.0
        log_norm = alpha.log_total(N)
        for g in model.index_space():
            rep = detection_bound(model, g, scenario.detection, alpha, N)
            det_raw += rep.raw
        det_raw = det_raw / math.exp(log_norm)
        components["detection"] = det_raw
        raw += det_raw
    terms = tuple(t for r in reports.values() for t in r.terms)
    log_raw = math.log(raw) if raw > 0 else float("-inf")
    return BoundReport(value=min(1.0, raw), raw=raw, log_raw=log_raw, N=N,
                       terms=terms, vacuous=raw >= 1.0 - VACUITY_TOL,
                       alpha_key=alpha.key(), components=components)


def _report_dict(report) -> dict:
    return {
        "value": _round12(report.value),
        "raw": _round12(report.raw) if math.isfinite(report.raw) else None,
        "vacuous": report.vacuous,
        "N": report.N,
        "heuristic": report.heuristic,
        "components": {k: _round12(v) for k, v in report.components.items()},
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_exponents(scenario: Scenario, out: Path, args) -> int:
    cache = ExponentCache(scenario.model, scenario.alpha)
    rows = []
    reports = decode_bound_reports(scenario, cache)
    for D, report in reports.items():
        for t in report.terms:
            rows.append(("decode", D, t))
    if scenario.margin or scenario.decoder == "margin":
        D = tuple(range(scenario.model.K))
        rep = gep_bound_margin(scenario.model, D, scenario.region,
                               scenario.margin, scenario.alpha, scenario.N,
                               cache=cache)
        for t in rep.terms:
            rows.append(("margin", D, t))
    if scenario.detection is not None:
        for g in scenario.model.index_space():
            rep = detection_bound(scenario.model, g, scenario.detection,
                                  scenario.alpha, scenario.N)
            for t in rep.terms:
                rows.append(("detect", (), t))
    path = out / "exponents.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["theorem", "D", "S", "g", "g_alt", "exponent",
                     "rho_star", "s_star"])
        for theorem, D, t in rows:
            wr.writerow([
                theorem, _join(D), _join(t.S), _join(t.g),
                _join(t.g_other) if t.g_other is not None else "",
                _fmt(t.exponent),
                _fmt(t.rho) if t.rho is not None else "",
                _fmt(t.s),
            ])
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_bound(scenario: Scenario, out: Path, args) -> int:
    cache = ExponentCache(scenario.model, scenario.alpha)
    payload: dict = {"N": scenario.N}
    payload["decode"] = _report_dict(scenario_bound(scenario, cache)) \
        if scenario.decoder != "margin" else None
    optimized, partition = gep_bound_partitioned(
        scenario.model, scenario.region, scenario.alpha, scenario.N,
        cache=cache)
    payload["partitioned"] = _report_dict(optimized)
    payload["partitioned"]["partition"] = [
        {"D": list(D), "region": [list(g) for g in sorted(reg)]}
        for D, reg in partition.items()]
    if scenario.margin or scenario.decoder == "margin":
        D = tuple(range(scenario.model.K))
        payload["margin"] = _report_dict(gep_bound_margin(
            scenario.model, D, scenario.region, scenario.margin,
            scenario.alpha, scenario.N, cache=cache))
    if scenario.detection is not None:
        payload["detection"] = {
            _join(g): _report_dict(detection_bound(
                scenario.model, g, scenario.detection, scenario.alpha,
                scenario.N))
            for g in scenario.model.index_space()}
    path = out / "bounds.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    return 0


def cmd_simulate(scenario: Scenario, out: Path, args) -> int:
    records = montecarlo.run_trials(scenario, scenario.trials, scenario.seed,
                                    threads=args.threads)
    estimate = montecarlo.empirical_gep(records, scenario.alpha, scenario.N)
    bound = scenario_bound(scenario)
    verdict = montecarlo.compare_bound(estimate, bound)
    montecarlo.write_trials_csv(out / "trials.csv", estimate)
    summary = montecarlo.summary_dict(estimate, verdict)
    summary["trials"] = scenario.trials
    summary["seed"] = scenario.seed
    montecarlo.write_summary_json(out / "summary.json", summary)
    print(f"estimate = {_fmt(estimate.point)}  sigma = {_fmt(estimate.se)}  "
          f"bound = {_fmt(bound.value)}  -> "
          f"{'PASS' if verdict.passed else 'FAIL'}")
    return 0 if verdict.passed else 1


def cmd_detect(scenario: Scenario, out: Path, args) -> int:
    if scenario.detection is None:
        raise IntegrityError("$.detection: required for the detect command")
    result = montecarlo.run_detection_trials(scenario, scenario.trials,
                                             scenario.seed)
    path = out / "detect.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["g", "trials", "errors", "p_hat", "bound", "vacuous"])
        for g in sorted(result.per_g):
            n, e, b, vac = result.per_g[g]
            p = e / n if n else float("nan")
            wr.writerow([_join(g), n, e, _fmt(p), _fmt(b), int(vac)])
    payload = {"verdict": "PASS" if result.passed else "FAIL",
               "per_g": {_join(g): {"trials": n, "errors": e,
                                    "bound": _round12(b)}
                         for g, (n, e, b, _v) in result.per_g.items()}}
    montecarlo.write_summary_json(out / "detect_summary.json", payload)
    print(f"wrote {path}; verdict {'PASS' if result.passed else 'FAIL'}")
    return 0 if result.passed else 1


def entropy_gate(scenario: Scenario):
    """The compound-BSC operating-point gate: the code rate must exceed the
    capacity of the worst channel state and stay below the capacity of the
    next-worst distinct state (all in bits/symbol)."""
    if scenario.channel_spec.get("type") != "bsc_compound":
        raise SchemaError(
            "$.channel.type: gate-sec4 needs a bsc_compound channel")
    crossovers = scenario.channel_spec["crossovers"]
    rate_bits = scenario.channel_spec["rate"] / math.log(2.0)
    levels = sorted(set(crossovers))
    if len(levels) < 2:
        raise SchemaError(
            "$.channel.crossovers: gate needs >= 2 distinct values")
    capacities = {p: 1.0 - binary_entropy(p, unit="bits") for p in levels}
    worst, next_worst = levels[-1], levels[-2]
    passed = capacities[worst] < rate_bits < capacities[next_worst]
    return capacities, rate_bits, worst, next_worst, passed


def cmd_gate(scenario: Scenario, out: Path, args) -> int:
    capacities, rate_bits, worst, next_worst, passed = entropy_gate(scenario)
    for p in sorted(capacities):
        print(f"1 - H({_fmt(p)}) = {_fmt(capacities[p])} bits")
    print(f"rate = {_fmt(rate_bits)} bits/symbol")
    print(f"gate: 1 - H({_fmt(worst)}) < r < 1 - H({_fmt(next_worst)}): "
          f"{'PASS' if passed else 'FAIL'}")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_COMMANDS = {
    "exponents": cmd_exponents,
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "gate-sec4": cmd_gate,
}


def dispatch(subcommand: str, scenario: Scenario, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[subcommand](scenario, out, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gepkit",
        description="Error-exponent bounds and decoder simulation for "
                    "distributed channel coding with collision detection.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("exponents", "write the per-pair exponent breakdown CSV"),
        ("bound", "write analytic bound reports"),
        ("simulate", "run decoder trials and compare against the bound"),
        ("detect", "run region-detection trials against their bound"),
        ("gate-sec4", "check the compound-BSC entropy-margin gate"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True, help="scenario JSON path")
        p.add_argument("--threads", type=int, default=0,
                       help="worker threads for trials (0 = auto)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--trials", type=int, default=None,
                       help="override the scenario trial count")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.trials is not None:
            if args.trials < 1:
                raise SchemaError("--trials: must be >= 1")
            scenario.trials = args.trials
        if args.seed is not None:
            scenario.seed = args.seed
        return dispatch(args.command, scenario, args)
    except (ParseError, SchemaError, IntegrityError, GepkitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
