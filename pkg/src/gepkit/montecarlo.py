"""Trial runner and empirical weighted-error estimation.

Each trial draws a fresh codebook realization (ensemble-average semantics),
a code index vector g, uniform messages, transmits through the channel and
decodes with the scenario's decoder.  Per-trial randomness is derived
deterministically from (master_seed, trial index), so runs reproduce bit
for bit regardless of thread count, and integer error counters make the
aggregation order-independent.

The error estimator samples messages uniformly and averages, which lower
bounds the worst-case-over-messages definition; for the random ensembles
shipped here the error event is symmetric across messages, so the average
equals the worst case in expectation.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import SystemModel
from .decoder import (
    DecodeOutcome,
    build_thresholds,
    decode_margin,
    decode_receiver,
    decode_with_detection,
    detect_region,
)
from .ensemble import message_count, sample_codebook, sample_from_pmf, stream
from .errors import DomainError, MismatchedParameters, ShapeMismatch
from .exponents import BoundReport, WeightFunction, detection_bound

RELAXED = "relaxed"
STRICT = "strict"
MARGIN = "margin"
ERROR_MODELS = (RELAXED, STRICT, MARGIN)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    g: tuple
    w: tuple
    kind: str          # "decoded" | "collision"
    w1: int | None
    g1: int | None
    error: bool

    @property
    def decoded_correct(self) -> bool:
        return self.kind == "decoded" and self.w1 == self.w[0] \
            and self.g1 == self.g[0]

    @property
    def decoded_wrong(self) -> bool:
        return self.kind == "decoded" and not self.decoded_correct


def classify_error(error_model: str, region, margin, g, w,
                   outcome: DecodeOutcome) -> bool:
    """Pure error classification of one trial under the active definition.

    relaxed: inside R anything but correct decoding errs; outside R only a
    wrong decoding errs.  strict: outside R anything but a collision errs.
    margin: inside R as above, inside the margin only wrong decodings err,
    outside both anything but a collision errs.
    """
    if error_model not in ERROR_MODELS:
        raise DomainError(f"unknown error model {error_model!r}")
    g = tuple(g)
    correct = outcome.decoded and outcome.w1 == w[0] and outcome.g1 == g[0]
    wrong = outcome.decoded and not correct
    if g in region:
        return not correct
    if error_model == RELAXED:
        return wrong
    if error_model == STRICT:
        return outcome.decoded
    if margin is not None and g in margin:
        return wrong
    return outcome.decoded


# ---------------------------------------------------------------------------
# trial running
# ---------------------------------------------------------------------------

def _g_sampler(scenario, model: SystemModel):
    rule = getattr(scenario, "g_sampling", "uniform")
    if rule == "uniform":
        g_set = getattr(scenario, "g_set", None)
        g_list = [model.check_g(g) for g in g_set] if g_set \
            else list(model.index_space())
        return g_list, None
    if rule == "alpha_prior":
        g_list = list(model.index_space())
        probs = scenario.alpha.prior(scenario.N).reshape(-1)
        return g_list, probs
    raise DomainError(f"unknown g sampling rule {rule!r}")


def _channel_sampler(model: SystemModel):
    """Flattened per-joint-input cumulative output table."""
    flat = model.dmc.pmf.reshape(-1, model.dmc.output_size)
    cum = np.cumsum(flat, axis=1)
    cum[:, -1] = 1.0
    sizes = np.asarray(model.dmc.input_sizes, dtype=np.int64)
    return cum, sizes


def _prepare_decoder(scenario, model):
    variant = getattr(scenario, "decoder", "plain")
    alpha = scenario.alpha
    if variant == "margin":
        D = tuple(range(model.K))
        table = build_thresholds(model, D, scenario.region, alpha,
                                 margin=scenario.margin)

        def run(codebooks, y, truth):
            return decode_margin(model, D, scenario.region, scenario.margin,
                                 alpha, codebooks, y, table, truth=truth)

        return run
    partition = dict(scenario.partition.items())
    tables = {D: build_thresholds(model, D, reg, alpha)
              for D, reg in partition.items()}
    if variant == "plain":
        def run(codebooks, y, truth):
            return decode_receiver(model, partition, alpha, codebooks, y,
                                   tables, truth=truth)

        return run
    if variant == "detect":
        regions = scenario.detection

        def run(codebooks, y, truth):
            return decode_with_detection(model, regions, partition, alpha,
                                         codebooks, y, tables, truth=truth)

        return run
    raise DomainError(f"unknown decoder variant {variant!r}")


def run_trials(scenario, trials: int, master_seed: int,
               threads: int = 0, trace_path=None,
               fixed_codebook=None) -> list[TrialRecord]:
    """Simulate ``trials`` independent slots of the scenario.

    ``scenario`` provides: model, N, alpha, region, margin, error_model,
    decoder ("plain" | "margin" | "detect"), partition (decoded-subset ->
    region mapping for plain/detect), detection (cell list, detect only),
    and optionally g_sampling / g_set.

    ``trace_path`` writes one JSON line per trial: transmitted (w, g),
    per-subset winners and candidate-independent thresholds, and the
    outcome.

    Default semantics resample the codebook every trial (the bounds are
    ensemble averages).  Passing ``fixed_codebook`` freezes one
    realization across all trials; that mode is for decoder debugging and
    its estimates must not be compared against the ensemble bounds.
    """
    if trials < 1:
        raise ShapeMismatch(f"need at least 1 trial, got {trials}")
    model: SystemModel = scenario.model
    N = scenario.N
    g_list, g_probs = _g_sampler(scenario, model)
    cum, _sizes = _channel_sampler(scenario.model)
    run_decoder = _prepare_decoder(scenario, model)
    counts = {(k, gk): message_count(model.rate(k, gk), N)
              for k in range(model.K)
              for gk in range(len(model.libraries[k]))}
    radix = np.asarray(model.dmc.input_sizes, dtype=np.int64)

    def one(t: int):
        rng = stream((master_seed, t, 1))
        if g_probs is None:
            g = g_list[int(rng.integers(0, len(g_list)))]
        else:
            g = g_list[int(rng.choice(len(g_list), p=g_probs))]
        codebooks = sample_codebook(model, N, (master_seed, t, 0))
        w = tuple(int(rng.integers(1, counts[(k, g[k])] + 1))
                  for k in range(model.K))
        x = np.empty((model.n_users, N), dtype=np.int64)
        for k in range(model.K):
            x[k] = codebooks.codeword(k, g[k], w[k])
        for k in range(model.K, model.n_users):
            x[k] = sample_from_pmf(rng, model.input_pmf(k, g[k]), N)
        flat = np.zeros(N, dtype=np.int64)
        for k in range(model.n_users):
            flat = flat * radix[k] + x[k]
        u = rng.random(N)
        y = (cum[flat] <= u[:, None]).sum(axis=1).astype(np.int64)
        outcome = run_decoder(codebooks, y, (w, g))
        err = classify_error(scenario.error_model, scenario.region,
                             scenario.margin, g, w, outcome)
        rec = TrialRecord(trial=t, g=g, w=w, kind=outcome.kind,
                          w1=outcome.w1, g1=outcome.g1, error=err)
        return rec, outcome

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(t) for t in range(trials)]
    results.sort(key=lambda pair: pair[0].trial)
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            for rec, outcome in results:
                fh.write(json.dumps(_trace_line(rec, outcome),
                                    sort_keys=True))
                fh.write("\n")
    return [rec for rec, _ in results]


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else repr(v)
    return value


def _trace_line(rec: TrialRecord, outcome: DecodeOutcome) -> dict:
    diag = outcome.diagnostics
    per_s = diag.get("per_S")
    if per_s is None and "per_D" in diag:
        per_s = {str(D): sub.diagnostics.get("per_S", {})
                 for D, sub in diag["per_D"].items()}
    return {
        "trial": rec.trial,
        "g": list(rec.g),
        "w": list(rec.w),
        "outcome": rec.kind,
        "w1": rec.w1,
        "g1": rec.g1,
        "error": rec.error,
        "per_S": _jsonable(per_s or {}),
        "margin_checks": _jsonable(diag.get("margin_checks", {})),
    }


# ---------------------------------------------------------------------------
# estimation and bound comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GepEstimate:
    point: float
    se: float
    N: int
    alpha_key: bytes
    per_g: dict = field(repr=False)  # g -> (trials, errors)
    unestimated: tuple = ()

    @property
    def stderr(self) -> float:
        return self.se


def empirical_gep(records, alpha: WeightFunction, N: int,
                  weighting=None) -> GepEstimate:
    """Weighted average of per-g empirical error rates with weights
    e^{-N alpha(g)}; the standard error propagates per-stratum binomial
    variance.  Strata in the weighting with no trials contribute zero and
    are flagged unestimated.
    """
    g_all = [tuple(g) for g in weighting] if weighting is not None \
        else list(alpha.model.index_space())
    tallies = {g: [0, 0] for g in g_all}
    for r in records:
        if r.g in tallies:
            tallies[r.g][0] += 1
            tallies[r.g][1] += int(r.error)
    logw = np.array([-N * alpha(g) for g in g_all])
    w = np.exp(logw - logw.max())
    w /= w.sum()
    point = 0.0
    var = 0.0
    missing = []
    for wi, g in zip(w, g_all):
        n, e = tallies[g]
        if n == 0:
            missing.append(g)
            continue
        p = e / n
        point += wi * p
        var += wi * wi * p * (1.0 - p) / n
    return GepEstimate(point=float(point), se=float(np.sqrt(var)), N=N,
                       alpha_key=alpha.key(), per_g=tallies,
                       unestimated=tuple(missing))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    estimate: float
    se: float
    bound: float
    slack: float  # bound + 3 se - estimate


def compare_bound(estimate: GepEstimate, bound: BoundReport) -> Verdict:
    """PASS iff the point estimate does not exceed the bound by more than
    three standard errors."""
    if estimate.N != bound.N:
        raise MismatchedParameters(
            f"estimate at N={estimate.N}, bound at N={bound.N}")
    if estimate.alpha_key != bound.alpha_key:
        raise MismatchedParameters("estimate and bound use different alpha")
    limit = bound.value + 3.0 * estimate.se
    return Verdict(passed=estimate.point <= limit, estimate=estimate.point,
                   se=estimate.se, bound=bound.value,
                   slack=limit - estimate.point)


# ---------------------------------------------------------------------------
# region-detection trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionResult:
    per_g: dict            # g -> (trials, errors, bound_value, vacuous)
    passed: bool


def run_detection_trials(scenario, trials: int, master_seed: int,
                         settings=None) -> DetectionResult:
    """Empirical region-detection error per true g versus its analytic
    bound; PASS iff every g's frequency is within 3 binomial sigmas of its
    bound."""
    from .optimize import DEFAULT_SETTINGS
    settings = settings or DEFAULT_SETTINGS
    model: SystemModel = scenario.model
    N = scenario.N
    alpha = scenario.alpha
    regions = scenario.detection
    g_list, g_probs = _g_sampler(scenario, model)
    cum, _ = _channel_sampler(model)
    radix = np.asarray(model.dmc.input_sizes, dtype=np.int64)
    cells = {}
    for i, reg in enumerate(regions):
        for g in reg:
            cells[tuple(g)] = i
    tallies = {g: [0, 0] for g in g_list}
    for t in range(trials):
        rng = stream((master_seed, t, 2))
        if g_probs is None:
            g = g_list[int(rng.integers(0, len(g_list)))]
        else:
            g = g_list[int(rng.choice(len(g_list), p=g_probs))]
        x = np.empty((model.n_users, N), dtype=np.int64)
        for k in range(model.n_users):
            x[k] = sample_from_pmf(rng, model.input_pmf(k, g[k]), N)
        flat = np.zeros(N, dtype=np.int64)
        for k in range(model.n_users):
            flat = flat * radix[k] + x[k]
        u = rng.random(N)
        y = (cum[flat] <= u[:, None]).sum(axis=1).astype(np.int64)
        cell, _ghat = detect_region(model, regions, alpha, y)
        tallies[g][0] += 1
        tallies[g][1] += int(cell != cells[g])
    per_g = {}
    ok = True
    for g, (n, e) in tallies.items():
        rep = detection_bound(model, g, regions, alpha, N, settings)
        if n == 0:
            per_g[g] = (0, 0, rep.value, rep.vacuous)
            continue
        p = e / n
        sigma = float(np.sqrt(p * (1.0 - p) / n))
        good = p <= rep.value + 3.0 * sigma
        ok = ok and good
        per_g[g] = (n, e, rep.value, rep.vacuous)
    return DetectionResult(per_g=per_g, passed=ok)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def write_trials_csv(path, estimate: GepEstimate) -> None:
    """One row per code index vector: (g, trials, errors, p_hat)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["g", "trials", "errors", "p_hat"])
        for g in sorted(estimate.per_g):
            n, e = estimate.per_g[g]
            p = e / n if n else float("nan")
            wr.writerow([" ".join(map(str, g)), n, e, f"{p:.12g}"])


def summary_dict(estimate: GepEstimate, verdict: Verdict | None) -> dict:
    out = {
        "estimate": float(f"{estimate.point:.12g}"),
        "sigma": float(f"{estimate.se:.12g}"),
    }
    if verdict is not None:
        out["bound"] = float(f"{verdict.bound:.12g}")
        out["verdict"] = "PASS" if verdict.passed else "FAIL"
    return out


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
