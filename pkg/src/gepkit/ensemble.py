"""Random-coding ensemble: message spaces, codebook sampling, and the
per-symbol codebook-ensemble expectations used by thresholds and exponents.

Seeding rule (fixed so that trials parallelize deterministically): every
stream is a ``numpy.random.Philox`` generator keyed by a ``SeedSequence``
whose entropy is the tuple ``(master_seed..., user_index, code_index)``.
Message and symbol positions enter through the draw order inside the
stream, so a fixed (master_seed, user, code) always reproduces the same
codeword table bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import SystemModel, marginalize_out
from .errors import CodeOutOfRange, MessageOutOfRange, ShapeMismatch

_NEG_INF = float("-inf")


def message_count(rate: float, N: int) -> int:
    """Number of messages of a rate-``rate`` (nats/symbol) code at
    blocklength N: floor(e^{N r}), floored at 1 so zero-rate codes exist.

    The floor carries a 1e-12 relative slack so rates given as float logs
    of integers (e.g. log 2) yield the exact integer count.
    """
    if rate < 0:
        raise ShapeMismatch(f"rate must be >= 0, got {rate}")
    if N < 1:
        raise ShapeMismatch(f"blocklength must be >= 1, got {N}")
    return max(1, int(math.floor(math.exp(N * rate) * (1.0 + 1e-12))))


def _as_entropy(master_seed) -> tuple[int, ...]:
    if isinstance(master_seed, (tuple, list)):
        return tuple(int(x) for x in master_seed)
    return (int(master_seed),)


def stream(master_seed, *path: int) -> np.random.Generator:
    """Deterministic generator for (master_seed, *path)."""
    ss = np.random.SeedSequence(_as_entropy(master_seed) + tuple(path))
    return np.random.Generator(np.random.Philox(ss))


def sample_from_pmf(rng: np.random.Generator, pmf: np.ndarray, shape):
    """i.i.d. draws from a finite pmf by inverse CDF (bit-reproducible)."""
    cum = np.cumsum(pmf)
    cum[-1] = 1.0
    u = rng.random(shape)
    return np.searchsorted(cum, u, side="right").astype(np.int64)


@dataclass
class CodebookRealization:
    """One sampled draw of every regular user's codebook library.

    ``tables[(k, g_k)]`` is an integer array of shape
    (message_count(r_k(g_k), N), N); interfering users have no tables (the
    receiver only knows their input distributions).
    """

    N: int
    master_seed: tuple[int, ...]
    tables: dict = field(repr=False)
    counts: dict = field(repr=False)

    def n_messages(self, k: int, g_k: int) -> int:
        try:
            return self.counts[(k, g_k)]
        except KeyError:
            raise CodeOutOfRange(f"no code ({k}, {g_k}) in realization")

    def codeword(self, k: int, g_k: int, w: int) -> np.ndarray:
        """Codeword of message w (1-based) of code g_k of user k."""
        if (k, g_k) not in self.tables:
            raise CodeOutOfRange(f"no code ({k}, {g_k}) in realization")
        n = self.counts[(k, g_k)]
        if not 1 <= w <= n:
            raise MessageOutOfRange(
                f"message {w} outside 1..{n} for user {k} code {g_k}")
        return self.tables[(k, g_k)][w - 1]


def sample_codebook(model: SystemModel, N: int, master_seed) -> CodebookRealization:
    """Draw a fresh codebook realization: every symbol of every codeword of
    code g_k of regular user k is i.i.d. from that code's input pmf."""
    if N < 1:
        raise ShapeMismatch(f"blocklength must be >= 1, got {N}")
    seed = _as_entropy(master_seed)
    tables, counts = {}, {}
    for k in range(model.K):
        for g_k, spec in enumerate(model.libraries[k]):
            n_msgs = message_count(spec.rate, N)
            rng = stream(seed, k, g_k)
            tables[(k, g_k)] = sample_from_pmf(rng, spec.input_pmf, (n_msgs, N))
            counts[(k, g_k)] = n_msgs
    return CodebookRealization(N=N, master_seed=seed, tables=tables,
                               counts=counts)


def encode(codebook: CodebookRealization, w: int, g, k: int) -> np.ndarray:
    """Look up the codeword for (w, g_k) of user k; pure table read."""
    g_k = g[k] if isinstance(g, (tuple, list)) else int(g)
    return codebook.codeword(k, g_k, w)


def scale_log(c, logs):
    """c * logs with the x^0 = 1 convention: a zero coefficient wipes a
    -inf log-probability instead of producing nan."""
    c = np.asarray(c, dtype=float)
    logs = np.asarray(logs, dtype=float)
    with np.errstate(invalid="ignore"):
        out = c * logs
    neg = np.isneginf(logs) & (np.broadcast_to(c, out.shape) == 0.0)
    if np.any(neg):
        out = np.where(neg, 0.0, out)
    return out


def subset_weights_log(model: SystemModel, users, g) -> np.ndarray:
    """Flattened log prod_k P_{X|g_k}(x_k) over the sorted user list; the
    empty list yields the single weight log 1 = 0."""
    users = sorted(users)
    w = np.zeros(1)
    for k in users:
        with np.errstate(divide="ignore"):
            lw = np.log(model.input_pmf(k, g[k]))
        w = (w[:, None] + lw[None, :]).reshape(-1)
    return w


def marginal_log_table(model: SystemModel, D, g, fixed, free) -> np.ndarray:
    """Log P(Y | X_D, g) with the D axes split and flattened into
    (|Y|, prod fixed sizes, prod free sizes); ``fixed``/``free`` partition D
    (each sorted ascending)."""
    D = sorted(set(fixed) | set(free))
    marg = marginalize_out(model, D, g)
    lm = marg.log_pmf()  # axes: (*sorted D, Y)
    order = [D.index(k) for k in sorted(fixed)] + \
            [D.index(k) for k in sorted(free)]
    lm = np.moveaxis(lm, -1, 0)  # (Y, *sorted D)
    lm = np.transpose(lm, axes=[0] + [1 + i for i in order])
    n_fixed = int(np.prod([model.dmc.input_sizes[k] for k in sorted(fixed)])) \
        if fixed else 1
    n_free = int(np.prod([model.dmc.input_sizes[k] for k in sorted(free)])) \
        if free else 1
    return np.ascontiguousarray(lm.reshape(lm.shape[0], n_fixed, n_free))


def flatten_symbols(model: SystemModel, users, rows: np.ndarray) -> np.ndarray:
    """Mixed-radix flatten of per-user symbol rows (len(users), N) into flat
    indices matching :func:`marginal_log_table`'s fixed axis."""
    users = sorted(users)
    if not users:
        return np.zeros(rows.shape[-1] if rows.ndim else 0, dtype=np.int64)
    sizes = [model.dmc.input_sizes[k] for k in users]
    flat = np.zeros(rows.shape[1], dtype=np.int64)
    for i, _k in enumerate(users):
        flat = flat * sizes[i] + rows[i]
    return flat


def ensemble_log_expectation(model: SystemModel, D, S, g, y: np.ndarray,
                             x_fixed, a: float) -> float:
    """Log of the codebook-ensemble expectation of the candidate sequence
    likelihood raised to ``a``:

        sum_j log sum_{X_{D\\S}} prod_{k in D\\S} P_{X|g_k}(X_k)
                  * P(y_j | x_{S cap D, j}, X_{D\\S}, g)^a

    ``x_fixed`` holds the fixed symbols of users sorted(S cap D), shape
    (|S cap D|, N).  The free users D\\S are averaged under their code-g
    input pmfs.  Returns -inf when the inner sum vanishes (possible for
    a > 0 on channels with zeros); never raises for that.
    """
    D = sorted(set(D))
    S = set(S)
    fixed = sorted(set(D) & S)
    free = sorted(set(D) - S)
    y = np.asarray(y, dtype=np.int64)
    lm = marginal_log_table(model, D, g, fixed, free)  # (Y, F, R)
    logw = subset_weights_log(model, free, g)          # (R,)
    x_fixed = np.asarray(x_fixed, dtype=np.int64).reshape(len(fixed), len(y)) \
        if len(fixed) else np.zeros((0, len(y)), dtype=np.int64)
    fixed_flat = flatten_symbols(model, fixed, x_fixed)
    per_symbol = lm[y, fixed_flat, :]                  # (N, R)
    terms = logw[None, :] + scale_log(a, per_symbol)
    return float(np.sum(logsumexp(terms, axis=1)))
