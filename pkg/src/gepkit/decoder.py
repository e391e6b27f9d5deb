"""Operational decoders: weighted-likelihood decoding with per-subset
typicality thresholds, cross-subset agreement, the operation-margin variant,
and output-distribution region detection.

A decoder instance is parametrized by a :class:`ThresholdTable` built once
per (model, D, R_D[, margin], alpha): for every in-region code vector and
every relevant user subset S it stores the auxiliary exponents
(rho_t, s2, s1) and the worst excluded vector used by the threshold.  The
auxiliary triple is the exact image of the optimized false-acceptance
exponent's (rho, s) under the variable change rho_t = rho/(1-s),
s2 = rho_t * s/(s+rho), s1 = 1 - s2/rho_t, which equalizes the
missed-detection and false-acceptance bound expressions; this is also what
keeps the analytic bounds valid for the decoder actually simulated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import SystemModel, marginalize_out, output_marginal
from .ensemble import CodebookRealization, ensemble_log_expectation
from .errors import (
    MissingCodebook,
    OverlappingMargin,
    ShapeMismatch,
    UserOneMissing,
)
from .exponents import (
    DEFAULT_SETTINGS,
    ExponentCache,
    SearchSettings,
    WeightFunction,
    check_detection_partition,
    proper_subsets,
    validate_region,
)

INF = float("inf")


# ---------------------------------------------------------------------------
# competitor relation
# ---------------------------------------------------------------------------

def competitor_match(S, D, pair_a, pair_b, n_users: int) -> bool:
    """Whether (w_D, g) and (w~_D, g~) are S-competitors: messages and codes
    agree on S inside D, codes agree on S outside D, (w_k, g_k) differs for
    every k in D outside S, and codes differ for every k outside both."""
    S, D = set(S), set(D)
    w_a, g_a = pair_a
    w_b, g_b = pair_b
    Ds = sorted(D)
    wa = dict(zip(Ds, w_a))
    wb = dict(zip(Ds, w_b))
    for k in range(n_users):
        if k in S and k in D:
            if wa[k] != wb[k] or g_a[k] != g_b[k]:
                return False
        elif k in S:
            if g_a[k] != g_b[k]:
                return False
        elif k in D:
            if wa[k] == wb[k] and g_a[k] == g_b[k]:
                return False
        else:
            if g_a[k] == g_b[k]:
                return False
    return True


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdParams:
    """Auxiliary values behind one (g, S) typicality threshold.  ``gstar``
    is None when no excluded vector is compatible with S, in which case the
    threshold is +inf (no constraint: the corresponding bound terms vanish).
    """

    rho_t: float
    s2: float
    s1: float
    gstar: tuple | None
    exponent: float  # optimized false-acceptance exponent against gstar

    def __post_init__(self):
        if self.gstar is not None:
            if not (0.0 < self.rho_t <= 1.0 and 0.0 < self.s2 < self.rho_t):
                raise ValueError(f"inadmissible threshold params {self}")
            if not 0.0 < self.s1 < 1.0:
                raise ValueError(f"s1 = {self.s1} outside (0, 1)")


NO_CONSTRAINT = None  # sentinel meaning tau* = +inf


def params_from_exponent(gstar, result) -> ThresholdParams:
    """Map the optimized (rho, s) of the false-acceptance exponent to the
    auxiliary triple that balances the two bound expressions."""
    rho, s = result.rho, result.s
    rho_t = min(1.0, rho / (1.0 - s))
    s2 = rho_t * s / (s + rho)
    s1 = 1.0 - s2 / rho_t
    return ThresholdParams(rho_t=rho_t, s2=s2, s1=s1, gstar=tuple(gstar),
                           exponent=result.value)


def select_gstar(model: SystemModel, D, S, g, excluded_from,
                 alpha: WeightFunction,
                 settings: SearchSettings = DEFAULT_SETTINGS,
                 cache: ExponentCache | None = None,
                 allow_empty_difference: bool = False):
    """Excluded vector minimizing the false-acceptance exponent among
    {g' outside excluded_from with g'_S = g_S}; (None, None) when empty."""
    cache = cache or ExponentCache(model, alpha, settings)
    best = cache.best_excluded(D, S, g, frozenset(excluded_from),
                               allow_empty_difference=allow_empty_difference)
    if best is None:
        return None, None
    gp, res = best
    return gp, res


def typicality_threshold(model: SystemModel, D, S, g,
                         params: ThresholdParams, x_fixed, y,
                         alpha: WeightFunction) -> float:
    """Per-symbol typicality threshold tau* for candidate vector g and
    subset S at output y, with the candidate's symbols on S cap D fixed.

    Solves the balance between the missed-detection expression (exponent
    1 - s1 on the candidate's weighted likelihood) and the false-acceptance
    expression (exponent s2/rho_t plus the excluded vector's expected
    likelihood and the D\\S rate factor).  May be negative; +inf when the
    threshold is unconstrained.
    """
    if params.gstar is NO_CONSTRAINT:
        return INF
    N = len(y)
    s1, s2, rt = params.s1, params.s2, params.rho_t
    a_g = alpha(g)
    a_star = alpha(params.gstar)
    l1 = ensemble_log_expectation(model, D, S, g, y, x_fixed, 1.0 - s1) \
        - N * (1.0 - s1) * a_g
    l2 = ensemble_log_expectation(model, D, S, g, y, x_fixed, s2 / rt) \
        - N * (s2 / rt) * a_g
    l3 = ensemble_log_expectation(model, D, S, params.gstar, y, x_fixed, 1.0) \
        - N * a_star
    rate_sum = sum(model.rate(k, g[k]) for k in set(D) - set(S))
    return (l1 - rt * l2 - l3) / (N * (s1 + s2)) - rt * rate_sum / (s1 + s2)


@dataclass
class ThresholdTable:
    """Precomputed threshold parameters for one (D, R_D[, margin]) decoder."""

    D: tuple
    region: frozenset
    margin: frozenset | None
    alpha: WeightFunction
    params: dict             # (g, frozenset S) -> ThresholdParams | None
    subsets_decode: tuple    # proper S with D\S nonempty
    subsets_margin: tuple    # proper S covering D (margin mode only)

    def get(self, g, S):
        return self.params[(tuple(g), frozenset(S))]


def build_thresholds(model: SystemModel, D, region, alpha: WeightFunction,
                     margin=None,
                     settings: SearchSettings = DEFAULT_SETTINGS,
                     cache: ExponentCache | None = None) -> ThresholdTable:
    """Select (rho_t, s2, s1, gstar) for every (in-region g, subset S).

    ``margin=None`` builds the plain decoder of the union-bound analysis;
    passing a (possibly empty) margin region additionally equips the
    subsets S covering D, whose excluded-vector search ranges outside
    region union margin.
    """
    D = tuple(sorted(set(int(k) for k in D)))
    if 0 not in D:
        raise UserOneMissing(f"decoded subset {D} must contain user 0")
    region = validate_region(model, region)
    if margin is not None:
        margin = validate_region(model, margin)
        if region & margin:
            raise OverlappingMargin("operation region and margin intersect")
    cache = cache or ExponentCache(model, alpha, settings)
    subsets_decode = tuple(S for S in proper_subsets(model.n_users)
                           if set(D) - S)
    subsets_margin = tuple(S for S in proper_subsets(model.n_users)
                           if not (set(D) - S)) if margin is not None else ()
    params = {}
    for g in sorted(region):
        for S in subsets_decode:
            gp, res = select_gstar(model, D, S, g, region, alpha, settings,
                                   cache)
            params[(g, S)] = None if gp is None \
                else params_from_exponent(gp, res)
        for S in subsets_margin:
            gp, res = select_gstar(model, D, S, g, region | margin, alpha,
                                   settings, cache,
                                   allow_empty_difference=True)
            params[(g, S)] = None if gp is None \
                else params_from_exponent(gp, res)
    # normalize the NO_CONSTRAINT sentinel into ThresholdParams-or-None
    params = {k: (v if v is not None else _unconstrained())
              for k, v in params.items()}
    return ThresholdTable(D=D, region=region, margin=margin, alpha=alpha,
                          params=params, subsets_decode=subsets_decode,
                          subsets_margin=subsets_margin)


def _unconstrained() -> ThresholdParams:
    return ThresholdParams(rho_t=1.0, s2=0.5, s1=0.5, gstar=NO_CONSTRAINT,
                           exponent=INF)


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

@dataclass
class DecodeOutcome:
    """Either a decoded (w1, g1) for transmitter 1 or a collision report."""

    kind: str                # "decoded" | "collision"
    w1: int | None = None
    g1: int | None = None
    winner: tuple | None = None   # (w_D tuple, full g tuple)
    diagnostics: dict = field(default_factory=dict)

    @property
    def decoded(self) -> bool:
        return self.kind == "decoded"


def _collision(diag) -> DecodeOutcome:
    return DecodeOutcome(kind="collision", diagnostics=diag)


@dataclass
class _Candidates:
    """Flattened candidate list for one in-region code vector."""

    g: tuple
    w_tuples: list           # list of per-D message tuples (1-based)
    rows: np.ndarray         # (n_candidates, |D|, N) codeword symbols
    loglik: np.ndarray       # (n_candidates,) log P(y | x_D, g)
    score: np.ndarray        # loglik - N * alpha(g)
    wnll: np.ndarray         # -loglik/N + alpha(g), per-symbol units


def _enumerate_candidates(model, D, g, codebooks: CodebookRealization, y,
                          alpha) -> _Candidates:
    N = len(y)
    lm = marginalize_out(model, D, g).log_pmf()
    tables = []
    for k in D:
        if (k, g[k]) not in codebooks.tables:
            raise MissingCodebook(f"realization lacks user {k} code {g[k]}")
        tables.append(codebooks.tables[(k, g[k])])
    counts = [t.shape[0] for t in tables]
    w_tuples = list(itertools.product(*[range(1, c + 1) for c in counts]))
    n = len(w_tuples)
    rows = np.empty((n, len(D), N), dtype=np.int64)
    for i, w in enumerate(w_tuples):
        for j, k in enumerate(D):
            rows[i, j] = tables[j][w[j] - 1]
    if len(D) == 1:
        loglik = lm[rows[:, 0, :], y[None, :]].sum(axis=1)
    else:
        y_b = np.broadcast_to(y, (n, N))
        idx = tuple(rows[:, j, :] for j in range(len(D))) + (y_b,)
        loglik = lm[idx].sum(axis=1)
    a = alpha(g)
    return _Candidates(g=g, w_tuples=w_tuples, rows=rows, loglik=loglik,
                       score=loglik - N * a, wnll=-loglik / N + a)


def _thresholds_for(model, D, S, cand: _Candidates, params, y, alpha):
    """Per-candidate tau* array for one (g, S); groups candidates sharing
    the same symbols on S cap D so each distinct threshold is solved once."""
    n = len(cand.w_tuples)
    if params.gstar is NO_CONSTRAINT:
        return np.full(n, INF)
    sd = sorted(set(S) & set(D))
    if not sd:
        tau = typicality_threshold(model, D, S, cand.g, params,
                                   np.zeros((0, len(y)), dtype=np.int64), y,
                                   alpha)
        return np.full(n, tau)
    pos = [list(D).index(k) for k in sd]
    taus = np.empty(n)
    seen = {}
    for i, w in enumerate(cand.w_tuples):
        key = tuple(w[p] for p in pos)
        if key not in seen:
            x_fixed = cand.rows[i, pos, :]
            seen[key] = typicality_threshold(model, D, S, cand.g, params,
                                             x_fixed, y, alpha)
        taus[i] = seen[key]
    return taus


def _subset_winner(cands, accepted_masks):
    """Best accepted candidate across all in-region vectors for one S.
    Returns (winner, n_accepted) where winner is (w_D, g), None when the
    candidate set is empty, or "tie" on an exact score tie at the top."""
    best_score = -INF
    best = None
    tie = False
    n_acc = 0
    for cand, mask in zip(cands, accepted_masks):
        if not mask.any():
            continue
        n_acc += int(mask.sum())
        idx = np.flatnonzero(mask)
        scores = cand.score[idx]
        j = int(np.argmax(scores))
        top = float(scores[j])
        n_top = int(np.sum(scores == top))
        if top > best_score:
            best_score = top
            best = (cand.w_tuples[idx[j]], cand.g)
            tie = n_top > 1
        elif top == best_score:
            tie = True
    if best is None:
        return None, 0
    return ("tie" if tie else best), n_acc


def decode_subset(model: SystemModel, D, region, alpha: WeightFunction,
                  codebooks: CodebookRealization, y,
                  thresholds: ThresholdTable, truth=None,
                  restrict_to=None) -> DecodeOutcome:
    """One (D, R_D)-decoder: per subset S (proper, D\\S nonempty) keep the
    candidates whose per-symbol weighted neg-log-likelihood is strictly
    below tau*(g, S); the S-winner is the accepted candidate with maximum
    weighted likelihood.  Decoded iff every subset produced a winner and
    the winners coincide on the full (w_D, g); an empty candidate set for
    any S, a tie, or a disagreement reports a collision.

    Requiring a winner from every subset (not just agreement among the
    subsets that produced one) is what the union-bound analysis charges:
    a wrong output must itself clear the threshold of the subset matching
    its agreement pattern with the transmitted vector, otherwise the
    false-acceptance terms would not cover it.
    """
    D = tuple(sorted(set(int(k) for k in D)))
    if 0 not in D:
        raise UserOneMissing(f"decoded subset {D} must contain user 0")
    if D != thresholds.D or validate_region(model, region) != thresholds.region:
        raise ShapeMismatch(
            "threshold table was built for a different (D, region)")
    y = np.asarray(y, dtype=np.int64)
    members = sorted(thresholds.region)
    if restrict_to is not None:
        members = [g for g in members if g in restrict_to]
    cands = [_enumerate_candidates(model, D, g, codebooks, y, alpha)
             for g in members]
    diag = {"per_S": {}, "candidates_evaluated":
            int(sum(len(c.w_tuples) for c in cands))}

    winners = []
    for S in thresholds.subsets_decode:
        masks = []
        taus = {}
        for cand in cands:
            tau = _thresholds_for(model, D, S, cand,
                                  thresholds.get(cand.g, S), y, alpha)
            # candidate-independent thresholds are worth tracing
            if not (set(S) & set(D)):
                taus[cand.g] = float(tau[0]) if len(tau) else None
            masks.append(cand.wnll < tau)
        winner, n_acc = _subset_winner(cands, masks)
        s_diag = {"winner": winner, "accepted": n_acc, "tau": taus}
        if truth is not None:
            s_diag.update(
                _truth_events(truth, D, cands, masks, winner, members))
        diag["per_S"][tuple(sorted(S))] = s_diag
        winners.append(winner)

    if any(w == "tie" for w in winners):
        diag["reason"] = "tie"
        return _collision(diag)
    if any(w is None for w in winners):
        diag["reason"] = "no_winner"
        return _collision(diag)
    first = winners[0]
    if any(w != first for w in winners[1:]):
        diag["reason"] = "disagreement"
        return _collision(diag)
    w_D, g = first
    return DecodeOutcome(kind="decoded", w1=w_D[D.index(0)], g1=g[0],
                         winner=first, diagnostics=diag)


def _truth_events(truth, D, cands, masks, winner, members):
    """Diagnostic flags for the three analyzed event classes, given the
    transmitted (w over all regular users, g)."""
    w_full, g_true = truth
    g_true = tuple(g_true)
    w_D = tuple(w_full[k] for k in D)
    out = {}
    if g_true in members:
        i = members.index(g_true)
        cand = cands[i]
        try:
            j = cand.w_tuples.index(w_D)
        except ValueError:
            return {"miss": None}
        out["miss"] = not bool(masks[i][j])
        out["lost"] = winner not in (None, "tie") and winner != (w_D, g_true)
    else:
        out["false_accept"] = any(m.any() for m in masks)
    return out


def decode_receiver(model: SystemModel, partition, alpha: WeightFunction,
                    codebooks: CodebookRealization, y, thresholds_by_D,
                    truth=None, restrict_to=None) -> DecodeOutcome:
    """Run every (D, R_D)-decoder of the partition; output (w1, g1) iff at
    least one decoded and all decoded outputs agree on (w1, g1)."""
    y = np.asarray(y, dtype=np.int64)
    sub_outcomes = {}
    pairs = []
    evaluated = 0
    for D, region in partition.items():
        out = decode_subset(model, D, region, alpha, codebooks, y,
                            thresholds_by_D[D], truth=truth,
                            restrict_to=restrict_to)
        sub_outcomes[D] = out
        evaluated += out.diagnostics.get("candidates_evaluated", 0)
        if out.decoded:
            pairs.append((out.w1, out.g1, out.winner))
    diag = {"per_D": sub_outcomes, "candidates_evaluated": evaluated}
    if not pairs:
        diag["reason"] = "no_decoder_decoded"
        return _collision(diag)
    first = pairs[0]
    if any(p[:2] != first[:2] for p in pairs[1:]):
        diag["reason"] = "cross_D_disagreement"
        return _collision(diag)
    return DecodeOutcome(kind="decoded", w1=first[0], g1=first[1],
                         winner=first[2], diagnostics=diag)


def decode_margin(model: SystemModel, D, region, margin,
                  alpha: WeightFunction, codebooks: CodebookRealization, y,
                  thresholds: ThresholdTable, truth=None) -> DecodeOutcome:
    """Margin decoder: the plain (D, R_D) rule plus, for every proper subset
    S covering D, the requirement that the agreed output itself passes
    tau*(g, S) (thresholds built with the excluded-vector search outside
    region union margin).  Anything else reports a collision."""
    region = validate_region(model, region)
    margin = validate_region(model, margin)
    if region & margin:
        raise OverlappingMargin("operation region and margin intersect")
    if thresholds.margin is None:
        raise OverlappingMargin(
            "thresholds were built without a margin; use build_thresholds("
            "..., margin=...)")
    out = decode_subset(model, D, region, alpha, codebooks, y, thresholds,
                        truth=truth)
    if not out.decoded:
        return out
    w_D, g = out.winner
    D_sorted = tuple(sorted(set(int(k) for k in D)))
    cand_rows = np.stack([codebooks.codeword(k, g[k], w_D[i])
                          for i, k in enumerate(D_sorted)])
    y = np.asarray(y, dtype=np.int64)
    lm = marginalize_out(model, D_sorted, g).log_pmf()
    idx = tuple(cand_rows[j] for j in range(len(D_sorted))) + (y,)
    wnll = float(-lm[idx].sum() / len(y) + alpha(g))
    for S in thresholds.subsets_margin:
        params = thresholds.get(g, S)
        sd = sorted(set(S) & set(D_sorted))
        pos = [D_sorted.index(k) for k in sd]
        tau = typicality_threshold(model, D_sorted, S, g, params,
                                   cand_rows[pos, :], y, alpha)
        out.diagnostics.setdefault("margin_checks", {})[
            tuple(sorted(S))] = tau
        if not wnll < tau:
            out.diagnostics["reason"] = "margin_reject"
            return _collision(out.diagnostics)
    return out


# ---------------------------------------------------------------------------
# region detection
# ---------------------------------------------------------------------------

def detect_region(model: SystemModel, regions, alpha: WeightFunction, y):
    """Maximum weighted output-marginal likelihood estimate of the code
    index vector, and the index of the partition cell containing it.  Ties
    break toward the lexicographically smallest vector."""
    cleaned = check_detection_partition(model, regions)
    y = np.asarray(y, dtype=np.int64)
    N = len(y)
    best_g, best_score = None, -INF
    for g in model.index_space():
        with np.errstate(divide="ignore"):
            lp = np.log(output_marginal(model, g))
        score = float(lp[y].sum() - N * alpha(g))
        if score > best_score:
            best_g, best_score = g, score
    cell = next(i for i, r in enumerate(cleaned) if best_g in r)
    return cell, best_g


def decode_with_detection(model: SystemModel, regions, partition,
                          alpha: WeightFunction,
                          codebooks: CodebookRealization, y, thresholds_by_D,
                          truth=None) -> DecodeOutcome:
    """Detect the code-index region first, then run the receiver restricted
    to candidates inside the detected cell (thresholds stay those of the
    unrestricted regions)."""
    cell_idx, ghat = detect_region(model, regions, alpha, y)
    restrict = validate_region(model, regions[cell_idx])
    out = decode_receiver(model, partition, alpha, codebooks, y,
                          thresholds_by_D, truth=truth, restrict_to=restrict)
    out.diagnostics["detected_region"] = cell_idx
    out.diagnostics["ghat"] = ghat
    return out
