"""Error-exponent functionals and finite-blocklength bound assembly.

Three per-letter exponents drive everything:

* the message-confusion exponent (a two-parameter Gallager-style functional
  comparing a transmitted code vector against an in-region competitor),
* the false-acceptance exponent (transmitted vs. an excluded code vector,
  with the auxiliary parameters coupled by s + rho <= 1), and
* the output-marginal discrimination exponent (a Chernoff quantity between
  two hypotheses' output distributions, used by region detection).

All sums over outputs and input symbols run in log domain with max-shift
accumulation; the e^{-N alpha} weighting would underflow linear-domain sums
already for N around 100.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import SystemModel, output_marginal
from scipy.special import logsumexp

from .ensemble import (
    marginal_log_table,
    message_count,
    scale_log,
    subset_weights_log,
)
from .errors import (
    DomainError,
    EmptyDifferenceSet,
    NotAPartition,
    OverlappingMargin,
    ShapeMismatch,
    UserOneMissing,
)
from .optimize import DEFAULT_SETTINGS, SearchSettings, maximize_rho_s, maximize_scalar


# ---------------------------------------------------------------------------
# weighting, regions, partitions
# ---------------------------------------------------------------------------

class WeightFunction:
    """Nonnegative per-code-vector weight exponent alpha(g), nats/symbol."""

    def __init__(self, model: SystemModel, values=None):
        self.model = model
        shape = model.code_counts
        if values is None:
            arr = np.zeros(shape)
        elif isinstance(values, dict):
            arr = np.zeros(shape)
            for g, v in values.items():
                arr[model.check_g(g)] = float(v)
        else:
            arr = np.asarray(values, dtype=float)
            if arr.shape != shape:
                raise ShapeMismatch(
                    f"alpha table shape {arr.shape} != index space {shape}")
        if np.any(arr < 0):
            raise DomainError("alpha(g) must be >= 0 for all g")
        arr.setflags(write=False)
        self.array = arr

    @classmethod
    def zero(cls, model: SystemModel) -> "WeightFunction":
        return cls(model)

    def __call__(self, g) -> float:
        return float(self.array[tuple(g)])

    def shifted(self, c: float) -> "WeightFunction":
        return WeightFunction(self.model, self.array + float(c))

    def log_total(self, N: int) -> float:
        """log sum_g e^{-N alpha(g)} over the full index space."""
        return float(logsumexp((-N * self.array).reshape(-1), axis=0))

    def prior(self, N: int) -> np.ndarray:
        """Normalized e^{-N alpha(g)} prior over the index space."""
        logp = -N * self.array - self.log_total(N)
        return np.exp(logp)

    def key(self) -> bytes:
        return self.array.tobytes()


def validate_region(model: SystemModel, members) -> frozenset:
    """Region of code index vectors: members valid, duplicates forbidden."""
    members = [model.check_g(g) for g in members]
    if len(members) != len(set(members)):
        raise ShapeMismatch("region contains duplicate code index vectors")
    return frozenset(members)


@dataclass(frozen=True)
class RegionPartition:
    """Assignment of each operation-region vector to one decoded subset D
    (every D contains user 0); the per-D regions are disjoint and cover R."""

    parts: tuple  # ((D tuple, frozenset of g), ...) sorted by D

    @classmethod
    def build(cls, model: SystemModel, mapping, region=None) -> "RegionPartition":
        seen = set()
        parts = []
        for D, members in mapping.items():
            D = tuple(sorted(set(int(k) for k in D)))
            if 0 not in D:
                raise UserOneMissing(f"decoded subset {D} must contain user 0")
            if any(k >= model.K for k in D):
                raise ShapeMismatch(f"decoded subset {D} has non-regular users")
            reg = validate_region(model, members)
            if reg & seen:
                raise ShapeMismatch("partition regions overlap")
            seen |= reg
            if reg:
                parts.append((D, reg))
        if region is not None:
            region = validate_region(model, region)
            if seen != region:
                raise ShapeMismatch("partition does not cover the region")
        return cls(tuple(sorted(parts, key=lambda t: t[0])))

    def items(self):
        return self.parts

    def union(self) -> frozenset:
        out = frozenset()
        for _, reg in self.parts:
            out |= reg
        return out


def proper_subsets(n_users: int):
    """All proper subsets S of the user set, smallest first (deterministic)."""
    for r in range(n_users):
        for combo in itertools.combinations(range(n_users), r):
            yield frozenset(combo)


def sub(g, S):
    """g restricted to sorted S."""
    return tuple(g[k] for k in sorted(S))


# ---------------------------------------------------------------------------
# exponent functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentResult:
    value: float
    rho: float | None
    s: float
    grid_resolution: tuple


def _check_DS(model: SystemModel, D, S, require_diff=True):
    D = tuple(sorted(set(int(k) for k in D)))
    if not D:
        raise EmptyDifferenceSet("decoded subset D is empty")
    if any(not 0 <= k < model.K for k in D):
        raise ShapeMismatch(f"D={D} must contain regular users only")
    S = frozenset(int(k) for k in S)
    if any(not 0 <= k < model.n_users for k in S):
        raise ShapeMismatch(f"S={sorted(S)} outside the user range")
    if require_diff and not (set(D) - S):
        raise EmptyDifferenceSet(f"D\\S is empty for D={D}, S={sorted(S)}")
    return D, S


def _pair_factors(model, D, S, g):
    """Tables for one side of an exponent: channel log-table arranged
    (Y, fixed=S&D flat, free=D\\S flat) plus the free users' log weights."""
    fixed = sorted(set(D) & set(S))
    free = sorted(set(D) - set(S))
    lm = marginal_log_table(model, D, g, fixed, free)
    logw_free = subset_weights_log(model, free, g)
    return lm, logw_free


def emd_objective(model: SystemModel, D, S, g, g_tilde, alpha: WeightFunction):
    """Objective (rho, s_array) -> values for the message-confusion
    exponent; maximize over rho in (0,1], s in (0,1]."""
    D, S = _check_DS(model, D, S, require_diff=False)
    g = model.check_g(g)
    gt = model.check_g(g_tilde)
    fixed = sorted(set(D) & set(S))
    lm_g, lw_g = _pair_factors(model, D, S, g)
    lm_t, lw_t = _pair_factors(model, D, S, gt)
    lw_fixed = subset_weights_log(model, fixed, g)
    a_g = lm_g - alpha(g)
    a_t = lm_t - alpha(gt)
    rate_sum = sum(model.rate(k, gt[k]) for k in set(D) - set(S))

    def objective(rho, s):
        s = np.asarray(s, dtype=float).reshape(-1, 1, 1, 1)
        t1 = logsumexp(lw_g[None, None, None, :] + scale_log(1.0 - s, a_g[None]),
                        axis=3)
        t2 = logsumexp(lw_t[None, None, None, :] + scale_log(s / rho, a_t[None]),
                        axis=3)
        combined = lw_fixed[None, None, :] + t1 + rho * t2
        total = logsumexp(combined.reshape(combined.shape[0], -1), axis=1)
        return -rho * rate_sum - total

    return objective


def eid_objective(model: SystemModel, D, S, g, g_prime, alpha: WeightFunction,
                  allow_empty_difference=False):
    """Objective (rho, s_array) -> values for the false-acceptance exponent;
    maximize over rho in (0,1], s in (0, 1-rho]."""
    D, S = _check_DS(model, D, S, require_diff=not allow_empty_difference)
    g = model.check_g(g)
    gp = model.check_g(g_prime)
    fixed = sorted(set(D) & set(S))
    lm_g, lw_g = _pair_factors(model, D, S, g)
    lm_p, lw_p = _pair_factors(model, D, S, gp)
    lw_fixed = subset_weights_log(model, fixed, g)
    a_g = lm_g - alpha(g)
    a_p = lm_p - alpha(gp)
    # the excluded-vector factor carries exponent 1: s-independent
    t2c = logsumexp(lw_p[None, None, :] + a_p, axis=2)  # (Y, F)
    rate_sum = sum(model.rate(k, g[k]) for k in set(D) - set(S))

    def objective(rho, s):
        s = np.asarray(s, dtype=float).reshape(-1, 1, 1, 1)
        t1 = logsumexp(
            lw_g[None, None, None, :] + scale_log(s / (s + rho), a_g[None]),
            axis=3)
        s2 = s.reshape(-1, 1, 1)
        combined = (lw_fixed[None, None, :] + scale_log(s2 + rho, t1)
                    + scale_log(1.0 - s2, t2c[None]))
        total = logsumexp(combined.reshape(combined.shape[0], -1), axis=1)
        return -rho * rate_sum - total

    return objective


def ec_objective(model: SystemModel, g, g_tilde, alpha: WeightFunction):
    """Objective s_array -> values for the output-marginal discrimination
    exponent; maximize over s in (0, 1]."""
    g = model.check_g(g)
    gt = model.check_g(g_tilde)
    with np.errstate(divide="ignore"):
        lp = np.log(output_marginal(model, g)) - alpha(g)
        lq = np.log(output_marginal(model, gt)) - alpha(gt)

    def objective(s):
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        terms = scale_log(s, lp[None, :]) + scale_log(1.0 - s, lq[None, :])
        return -logsumexp(terms, axis=1)

    return objective


def exponent_EmD(model: SystemModel, D, S, g, g_tilde, alpha: WeightFunction,
                 settings: SearchSettings = DEFAULT_SETTINGS) -> ExponentResult:
    """Message-confusion exponent for subset S, transmitted g, competitor
    g_tilde; the (rho, s) maximization runs over (0,1] x (0,1]."""
    _check_DS(model, D, S)  # EmptyDifferenceSet on D\S == empty
    f = emd_objective(model, D, S, g, g_tilde, alpha)
    res = maximize_rho_s(f, rho_hi=1.0, s_cap=None, settings=settings)
    return ExponentResult(res.value, res.argmax[0], res.argmax[1],
                          res.grid_shape)


def exponent_EiD(model: SystemModel, D, S, g, g_prime, alpha: WeightFunction,
                 settings: SearchSettings = DEFAULT_SETTINGS,
                 allow_empty_difference: bool = False) -> ExponentResult:
    """False-acceptance exponent for subset S, in-region g, excluded
    g_prime; s is constrained to (0, 1-rho].

    ``allow_empty_difference`` admits D\\S empty (needed by the margin
    bound, where the functional degenerates to a conditional Chernoff
    quantity); the public contract without the flag rejects that case.
    """
    f = eid_objective(model, D, S, g, g_prime, alpha,
                      allow_empty_difference=allow_empty_difference)
    res = maximize_rho_s(f, rho_hi=1.0, s_cap=lambda r: 1.0 - r,
                         settings=settings)
    return ExponentResult(res.value, res.argmax[0], res.argmax[1],
                          res.grid_shape)


def exponent_Ec(model: SystemModel, g, g_tilde, alpha: WeightFunction,
                settings: SearchSettings = DEFAULT_SETTINGS) -> ExponentResult:
    """Output-marginal discrimination exponent between hypotheses g and
    g_tilde (region detection); maximized over s in (0, 1]."""
    f = ec_objective(model, g, g_tilde, alpha)
    res = maximize_scalar(f, settings.eps, 1.0, settings=settings)
    return ExponentResult(res.value, None, res.argmax[0], res.grid_shape)


class ExponentCache:
    """Memoizes exponent maximizations for one (model, alpha, settings)."""

    def __init__(self, model: SystemModel, alpha: WeightFunction,
                 settings: SearchSettings = DEFAULT_SETTINGS):
        self.model = model
        self.alpha = alpha
        self.settings = settings
        self._emd: dict = {}
        self._eid: dict = {}

    def emd(self, D, S, g, gt) -> ExponentResult:
        key = (tuple(sorted(D)), frozenset(S), tuple(g), tuple(gt))
        if key not in self._emd:
            self._emd[key] = exponent_EmD(self.model, D, S, g, gt, self.alpha,
                                          self.settings)
        return self._emd[key]

    def eid(self, D, S, g, gp, allow_empty_difference=False) -> ExponentResult:
        key = (tuple(sorted(D)), frozenset(S), tuple(g), tuple(gp))
        if key not in self._eid:
            self._eid[key] = exponent_EiD(
                self.model, D, S, g, gp, self.alpha, self.settings,
                allow_empty_difference=allow_empty_difference)
        return self._eid[key]

    def best_excluded(self, D, S, g, excluded_from,
                      allow_empty_difference=False):
        """Excluded vector g' minimizing the false-acceptance exponent among
        {g' not in excluded_from, g'_S = g_S}; None when the set is empty.
        Ties break lexicographically for determinism."""
        gs = sub(g, S)
        best = None
        for gp in self.model.index_space():
            if gp in excluded_from or sub(gp, S) != gs:
                continue
            res = self.eid(D, S, g, gp,
                           allow_empty_difference=allow_empty_difference)
            if best is None or res.value < best[1].value:
                best = (gp, res)
        return best


# ---------------------------------------------------------------------------
# bound assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundTerm:
    kind: str              # "miss" | "confusion" | "false_accept" | "detect"
    S: tuple
    g: tuple
    g_other: tuple | None  # competitor (confusion/detect) or excluded vector
    exponent: float
    rho: float | None
    s: float
    log_term: float


VACUITY_TOL = 1e-9  # optimizer noise in a zero exponent scales by N


@dataclass(frozen=True)
class BoundReport:
    value: float           # clamped to [0, 1]
    raw: float             # assembled sum before clamping
    log_raw: float
    N: int
    terms: tuple
    vacuous: bool
    alpha_key: bytes
    heuristic: bool = False
    components: dict = field(default_factory=dict)


def _report(terms, log_norm, N, alpha, heuristic=False, components=None):
    logs = np.array([t.log_term for t in terms], dtype=float)
    log_raw = float(logsumexp(logs, axis=0) - log_norm) if len(logs) \
        else float("-inf")
    raw = float(np.exp(log_raw))
    return BoundReport(value=min(1.0, raw), raw=raw, log_raw=log_raw, N=N,
                       terms=tuple(terms), vacuous=raw >= 1.0 - VACUITY_TOL,
                       alpha_key=alpha.key(), heuristic=heuristic,
                       components=components or {})


def confusion_feasible(model: SystemModel, N: int, D, S, g, gt) -> bool:
    """Whether the S-competitor relation between code vectors g (transmitted)
    and gt admits at least one message assignment: agreement on S, different
    codes off S outside D, and off S inside D either a different code or a
    code with at least two messages."""
    D, S = set(D), set(S)
    for k in range(model.n_users):
        if k in S:
            if g[k] != gt[k]:
                return False
        elif k in D:
            if g[k] == gt[k] and \
                    message_count(model.rate(k, g[k]), N) < 2:
                return False
        else:
            if g[k] == gt[k]:
                return False
    return True


def _decode_terms(model, D, region, alpha, N, cache):
    """Union-bound terms for one (D, R_D)-decoder over all proper subsets S
    with D\\S nonempty: per in-region g a threshold-miss term (the worst
    excluded vector's false-acceptance exponent) and message-confusion terms
    against in-region competitors; per excluded transmitted vector, the same
    worst-case false-acceptance term for every S-compatible in-region g."""
    terms = []
    region_sorted = sorted(region)
    outside = [gt for gt in model.index_space() if gt not in region]
    for S in proper_subsets(model.n_users):
        if not (set(D) - S):
            continue
        miss = {}
        for g in region_sorted:
            best = cache.best_excluded(D, S, g, region)
            if best is not None:
                gp, res = best
                miss[g] = (gp, res)
                terms.append(BoundTerm(
                    kind="miss", S=tuple(sorted(S)), g=g, g_other=gp,
                    exponent=res.value, rho=res.rho, s=res.s,
                    log_term=-N * res.value))
            for gt in region_sorted:
                if sub(gt, S) != sub(g, S):
                    continue
                if not confusion_feasible(model, N, D, S, g, gt):
                    continue
                res = cache.emd(D, S, g, gt)
                terms.append(BoundTerm(
                    kind="confusion", S=tuple(sorted(S)), g=g, g_other=gt,
                    exponent=res.value, rho=res.rho, s=res.s,
                    log_term=-N * res.value))
        for gt in outside:
            for g in region_sorted:
                if sub(g, S) != sub(gt, S) or g not in miss:
                    continue
                gp, res = miss[g]
                terms.append(BoundTerm(
                    kind="false_accept", S=tuple(sorted(S)), g=g, g_other=gp,
                    exponent=res.value, rho=res.rho, s=res.s,
                    log_term=-N * res.value))
    return terms


def gep_bound_D(model: SystemModel, D, region, alpha: WeightFunction, N: int,
                settings: SearchSettings = DEFAULT_SETTINGS,
                cache: ExponentCache | None = None) -> BoundReport:
    """Achievable weighted-error bound for a single (D, R_D)-decoder."""
    D = tuple(sorted(set(int(k) for k in D)))
    if 0 not in D:
        raise UserOneMissing(f"decoded subset {D} must contain user 0")
    region = validate_region(model, region)
    cache = cache or ExponentCache(model, alpha, settings)
    terms = _decode_terms(model, D, region, alpha, N, cache)
    return _report(terms, alpha.log_total(N), N, alpha)


def gep_bound_partitioned(model: SystemModel, region, alpha: WeightFunction,
                          N: int, partition_cap: int = 4096,
                          settings: SearchSettings = DEFAULT_SETTINGS,
                          cache: ExponentCache | None = None):
    """Receiver-level bound: minimum over assignments of region vectors to
    decoded subsets D (all containing user 0) of the per-D bound sum.

    Exhaustive when the assignment count fits in ``partition_cap``;
    otherwise only the all-into-{0..K-1} assignment is evaluated and the
    report is flagged heuristic.
    """
    region = validate_region(model, region)
    cache = cache or ExponentCache(model, alpha, settings)
    others = list(range(1, model.K))
    subsets = sorted(tuple(sorted({0, *combo}))
                     for r in range(len(others) + 1)
                     for combo in itertools.combinations(others, r))
    members = sorted(region)
    n_assign = len(subsets) ** len(members)
    heuristic = n_assign > partition_cap
    if heuristic:
        assignments = [tuple([tuple(range(model.K))] * len(members))]
    else:
        assignments = itertools.product(subsets, repeat=len(members))

    best = None
    for assign in assignments:
        mapping = {}
        for g, D in zip(members, assign):
            mapping.setdefault(D, []).append(g)
        reports = {D: gep_bound_D(model, D, regs, alpha, N, settings, cache)
                   for D, regs in mapping.items()}
        raw = sum(r.raw for r in reports.values())
        if best is None or raw < best[0]:
            best = (raw, mapping, reports)
    if best is None:  # empty region
        part = RegionPartition.build(model, {}, region)
        empty = _report([], alpha.log_total(N), N, alpha, heuristic=heuristic)
        return empty, part
    raw, mapping, reports = best
    part = RegionPartition.build(model, mapping, region)
    terms = [t for r in reports.values() for t in r.terms]
    log_raw = float(np.log(raw)) if raw > 0 else float("-inf")
    report = BoundReport(
        value=min(1.0, raw), raw=raw, log_raw=log_raw, N=N,
        terms=tuple(terms), vacuous=raw >= 1.0 - VACUITY_TOL,
        alpha_key=alpha.key(),
        heuristic=heuristic,
        components={str(D): r.raw for D, r in reports.items()})
    return report, part


def gep_bound_margin(model: SystemModel, D, region, margin,
                     alpha: WeightFunction, N: int,
                     settings: SearchSettings = DEFAULT_SETTINGS,
                     cache: ExponentCache | None = None) -> BoundReport:
    """Bound for the margin decoder: the plain (D, R_D) terms plus, for every
    proper subset S covering D, threshold-miss terms for in-region vectors
    and false-acceptance terms for vectors outside region and margin, all
    with the excluded-vector search ranging outside region union margin.
    Margin vectors themselves are charged no collision-failure term."""
    D = tuple(sorted(set(int(k) for k in D)))
    if 0 not in D:
        raise UserOneMissing(f"decoded subset {D} must contain user 0")
    region = validate_region(model, region)
    margin = validate_region(model, margin)
    if region & margin:
        raise OverlappingMargin("operation region and margin intersect")
    cache = cache or ExponentCache(model, alpha, settings)
    terms = _decode_terms(model, D, region, alpha, N, cache)
    excluded = region | margin
    outside = [gt for gt in model.index_space() if gt not in excluded]
    for S in proper_subsets(model.n_users):
        if set(D) - S:
            continue
        miss = {}
        for g in sorted(region):
            best = cache.best_excluded(D, S, g, excluded,
                                       allow_empty_difference=True)
            if best is not None:
                gp, res = best
                miss[g] = (gp, res)
                terms.append(BoundTerm(
                    kind="miss", S=tuple(sorted(S)), g=g, g_other=gp,
                    exponent=res.value, rho=res.rho, s=res.s,
                    log_term=-N * res.value))
        for gt in outside:
            for g in sorted(region):
                if sub(g, S) != sub(gt, S) or g not in miss:
                    continue
                gp, res = miss[g]
                terms.append(BoundTerm(
                    kind="false_accept", S=tuple(sorted(S)), g=g, g_other=gp,
                    exponent=res.value, rho=res.rho, s=res.s,
                    log_term=-N * res.value))
    return _report(terms, alpha.log_total(N), N, alpha)


def check_detection_partition(model: SystemModel, regions):
    """Validate that regions cover the code-index space disjointly."""
    cleaned = [validate_region(model, r) for r in regions]
    total = sum(len(r) for r in cleaned)
    union = frozenset().union(*cleaned) if cleaned else frozenset()
    if total != len(union) or len(union) != model.space_size:
        raise NotAPartition(
            "detection regions must partition the code-index space")
    return cleaned


def detection_bound(model: SystemModel, g, regions, alpha: WeightFunction,
                    N: int,
                    settings: SearchSettings = DEFAULT_SETTINGS) -> BoundReport:
    """Bound on the weighted region-detection error for true vector g:
    the sum over hypotheses outside g's cell of e^{-N E_c}.

    The raw sum bounds Pr{detected cell wrong | g} * e^{-N alpha(g)}; it is
    reported clamped as a probability only when alpha(g) = 0, and flagged
    vacuous whenever it reaches 1.
    """
    g = model.check_g(g)
    cleaned = check_detection_partition(model, regions)
    cell = next((r for r in cleaned if g in r), None)
    if cell is None:
        raise NotAPartition(f"no detection region contains {g}")
    terms = []
    for gt in model.index_space():
        if gt in cell:
            continue
        res = exponent_Ec(model, g, gt, alpha, settings)
        terms.append(BoundTerm(
            kind="detect", S=(), g=g, g_other=gt, exponent=res.value,
            rho=None, s=res.s, log_term=-N * res.value))
    logs = np.array([t.log_term for t in terms], dtype=float)
    log_raw = float(logsumexp(logs, axis=0)) if len(logs) else float("-inf")
    raw = float(np.exp(log_raw))
    clamp = alpha(g) == 0.0
    return BoundReport(value=min(1.0, raw) if clamp else raw, raw=raw,
                       log_raw=log_raw, N=N, terms=tuple(terms),
                       vacuous=raw >= 1.0 - VACUITY_TOL,
                       alpha_key=alpha.key())
