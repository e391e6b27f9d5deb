"""Scenario files: the JSON surface describing a model, weighting, regions,
decoder and trial plan.

Schema (all code index vectors are 0-based lists, one entry per user):

    {
      "channel": {"type": "bsc_compound", "crossovers": [..],
                  "rate": 0.31, "rate_unit": "bits",
                  "input_pmf": [0.5, 0.5]}
               | {"type": "table", "pmf": [...nested, last axis = output]},
      "users":  [{"kind": "regular" | "interfering",
                  "codes": [{"rate": r, "rate_unit": "nats" | "bits",
                             "input_pmf": [..]}]}],   # table channels only
      "N": 16,
      "alpha": {"default": 0.0, "entries": [{"g": [..], "value": v}]},
      "region": [[..], ..],
      "margin": [[..], ..],                  # optional
      "partition": [{"D": [0], "region": [[..]]}],    # optional
      "detection": [[[..], ..], [[..], ..]],          # optional cell list
      "error_model": "relaxed" | "strict" | "margin",
      "decoder": "plain" | "margin" | "detect-then-decode",
      "g_sampling": "uniform" | "alpha_prior",        # optional
      "g_set": [[..], ..],                            # optional
      "trials": 10000,
      "seed": 7
    }

Rates are converted to nats on load; ``emit`` writes the canonical form
(rates in nats), which reloads to an identical scenario.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import CodeSpec, SystemModel, make_compound_bsc, make_dmc
from .errors import GepkitError, IntegrityError, ParseError, SchemaError
from .exponents import (
    RegionPartition,
    WeightFunction,
    check_detection_partition,
    validate_region,
)

DECODERS = {"plain": "plain", "margin": "margin",
            "detect-then-decode": "detect"}
ERROR_MODELS = ("relaxed", "strict", "margin")
LN2 = math.log(2.0)


@dataclass
class Scenario:
    model: SystemModel
    N: int
    alpha: WeightFunction
    region: frozenset
    margin: frozenset
    partition: RegionPartition
    detection: list | None
    error_model: str
    decoder: str            # "plain" | "margin" | "detect"
    decoder_name: str       # schema spelling
    g_sampling: str
    g_set: list | None
    trials: int
    seed: int
    channel_spec: dict = field(repr=False)


def _need(obj: dict, key: str, types, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}: missing")
    val = obj[key]
    if types is not None and not isinstance(val, types):
        raise SchemaError(
            f"{path}.{key}: expected {types}, got {type(val).__name__}")
    return val


def _rate_nats(entry: dict, path: str) -> float:
    rate = _need(entry, "rate", (int, float), path)
    unit = _need(entry, "rate_unit", str, path)
    if unit == "nats":
        return float(rate)
    if unit == "bits":
        return float(rate) * LN2
    raise SchemaError(f"{path}.rate_unit: must be 'nats' or 'bits'")


def _build_model(doc: dict) -> tuple[SystemModel, dict]:
    channel = _need(doc, "channel", dict, "$")
    ctype = _need(channel, "type", str, "$.channel")
    if ctype == "bsc_compound":
        crossovers = _need(channel, "crossovers", list, "$.channel")
        rate = _rate_nats(channel, "$.channel")
        input_pmf = channel.get("input_pmf", [0.5, 0.5])
        if "users" in doc:
            raise SchemaError(
                "$.users: not allowed with a bsc_compound channel")
        model = make_compound_bsc(crossovers, input_pmf, rate)
        spec = {"type": "bsc_compound",
                "crossovers": [float(p) for p in crossovers],
                "rate": rate, "rate_unit": "nats",
                "input_pmf": [float(p) for p in input_pmf]}
        return model, spec
    if ctype == "table":
        pmf = _need(channel, "pmf", list, "$.channel")
        users = _need(doc, "users", list, "$")
        if not users:
            raise SchemaError("$.users: at least one user required")
        libraries = []
        K = 0
        seen_interfering = False
        for i, user in enumerate(users):
            path = f"$.users[{i}]"
            kind = _need(user, "kind", str, path)
            if kind not in ("regular", "interfering"):
                raise SchemaError(f"{path}.kind: must be regular|interfering")
            if kind == "regular":
                if seen_interfering:
                    raise SchemaError(
                        f"{path}: regular users must precede interfering")
                K += 1
            else:
                seen_interfering = True
            codes = _need(user, "codes", list, path)
            if not codes:
                raise SchemaError(f"{path}.codes: must be nonempty")
            lib = []
            for j, code in enumerate(codes):
                cpath = f"{path}.codes[{j}]"
                r = _rate_nats(code, cpath)
                pmf_in = _need(code, "input_pmf", list, cpath)
                try:
                    lib.append(CodeSpec(rate=r, input_pmf=np.asarray(pmf_in)))
                except GepkitError as exc:
                    raise SchemaError(f"{cpath}: {exc}") from exc
            libraries.append(tuple(lib))
        M = len(users) - K
        if K < 1:
            raise SchemaError("$.users: need at least one regular user")
        try:
            dmc = make_dmc(np.asarray(pmf, dtype=float))
            model = SystemModel(dmc=dmc, K=K, M=M,
                                libraries=tuple(libraries))
        except GepkitError as exc:
            raise SchemaError(f"$.channel/users: {exc}") from exc
        spec = {"type": "table", "pmf": np.asarray(pmf, float).tolist()}
        return model, spec
    raise SchemaError("$.channel.type: must be 'table' or 'bsc_compound'")


def _g_list(model, doc_val, path: str):
    out = []
    for i, g in enumerate(doc_val):
        if not isinstance(g, list):
            raise SchemaError(f"{path}[{i}]: expected a list of indices")
        try:
            out.append(model.check_g(g))
        except GepkitError as exc:
            raise IntegrityError(f"{path}[{i}]: {exc}") from exc
    return out


def parse_scenario(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("$: top level must be an object")
    model, channel_spec = _build_model(doc)
    N = _need(doc, "N", int, "$")
    if N < 1:
        raise SchemaError("$.N: must be >= 1")
    trials = _need(doc, "trials", int, "$")
    if trials < 1:
        raise SchemaError("$.trials: must be >= 1")
    seed = _need(doc, "seed", int, "$")

    alpha_doc = doc.get("alpha", {})
    if not isinstance(alpha_doc, dict):
        raise SchemaError("$.alpha: expected an object")
    default = alpha_doc.get("default", 0.0)
    if not isinstance(default, (int, float)) or default < 0:
        raise SchemaError("$.alpha.default: must be a number >= 0")
    table = np.full(model.code_counts, float(default))
    for i, entry in enumerate(alpha_doc.get("entries", [])):
        path = f"$.alpha.entries[{i}]"
        g = _g_list(model, [_need(entry, "g", list, path)], path)[0]
        val = _need(entry, "value", (int, float), path)
        if val < 0:
            raise SchemaError(f"{path}.value: must be >= 0")
        table[g] = float(val)
    alpha = WeightFunction(model, table)

    region_members = _g_list(model, _need(doc, "region", list, "$"),
                             "$.region")
    try:
        region = validate_region(model, region_members)
    except GepkitError as exc:
        raise IntegrityError(f"$.region: {exc}") from exc

    margin_members = _g_list(model, doc.get("margin", []), "$.margin")
    margin = frozenset(margin_members)
    if len(margin) != len(margin_members):
        raise IntegrityError("$.margin: duplicate code index vectors")
    if region & margin:
        raise IntegrityError("$.margin: overlaps the operation region")

    if "partition" in doc:
        mapping = {}
        for i, part in enumerate(doc["partition"]):
            path = f"$.partition[{i}]"
            D = tuple(sorted(_need(part, "D", list, path)))
            members = _g_list(model, _need(part, "region", list, path),
                              f"{path}.region")
            mapping[D] = mapping.get(D, []) + members
        try:
            partition = RegionPartition.build(model, mapping, region)
        except GepkitError as exc:
            raise IntegrityError(f"$.partition: {exc}") from exc
    else:
        partition = RegionPartition.build(
            model, {tuple(range(model.K)): region}, region)

    detection = None
    if "detection" in doc:
        cells = [
            _g_list(model, cell, f"$.detection[{i}]")
            for i, cell in enumerate(_need(doc, "detection", list, "$"))]
        try:
            detection = [frozenset(c) for c in
                         check_detection_partition(model, cells)]
        except GepkitError as exc:
            raise IntegrityError(f"$.detection: {exc}") from exc

    error_model = doc.get("error_model", "relaxed")
    if error_model not in ERROR_MODELS:
        raise SchemaError(
            f"$.error_model: must be one of {ERROR_MODELS}")
    decoder_name = doc.get("decoder", "plain")
    if decoder_name not in DECODERS:
        raise SchemaError(
            f"$.decoder: must be one of {sorted(DECODERS)}")
    decoder = DECODERS[decoder_name]
    if decoder == "detect" and detection is None:
        raise IntegrityError(
            "$.detection: required for the detect-then-decode decoder")

    g_sampling = doc.get("g_sampling", "uniform")
    if g_sampling not in ("uniform", "alpha_prior"):
        raise SchemaError("$.g_sampling: must be uniform|alpha_prior")
    g_set = None
    if "g_set" in doc:
        g_set = _g_list(model, _need(doc, "g_set", list, "$"), "$.g_set")

    return Scenario(model=model, N=N, alpha=alpha, region=region,
                    margin=margin, partition=partition, detection=detection,
                    error_model=error_model, decoder=decoder,
                    decoder_name=decoder_name, g_sampling=g_sampling,
                    g_set=g_set, trials=trials, seed=seed,
                    channel_spec=channel_spec)


def load_scenario(path) -> Scenario:
    """Read, parse and validate a scenario JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return parse_scenario(doc)


def emit(scenario: Scenario) -> dict:
    """Canonical JSON form of a scenario (rates in nats); reloading the
    emitted document reproduces the scenario exactly."""
    doc: dict = {"channel": scenario.channel_spec}
    if scenario.channel_spec["type"] == "table":
        users = []
        model = scenario.model
        for k in range(model.n_users):
            users.append({
                "kind": "regular" if k < model.K else "interfering",
                "codes": [{"rate": spec.rate, "rate_unit": "nats",
                           "input_pmf": spec.input_pmf.tolist()}
                          for spec in model.libraries[k]],
            })
        doc["users"] = users
    doc["N"] = scenario.N
    arr = scenario.alpha.array
    doc["alpha"] = {"default": 0.0,
                    "entries": [{"g": list(g), "value": float(arr[g])}
                                for g in scenario.model.index_space()
                                if arr[g] != 0.0]}
    doc["region"] = [list(g) for g in sorted(scenario.region)]
    if scenario.margin:
        doc["margin"] = [list(g) for g in sorted(scenario.margin)]
    if len(scenario.partition.items()) != 1 or \
            scenario.partition.items()[0][0] != tuple(range(scenario.model.K)):
        doc["partition"] = [
            {"D": list(D), "region": [list(g) for g in sorted(reg)]}
            for D, reg in scenario.partition.items()]
    if scenario.detection is not None:
        doc["detection"] = [[list(g) for g in sorted(cell)]
                            for cell in scenario.detection]
    doc["error_model"] = scenario.error_model
    doc["decoder"] = scenario.decoder_name
    doc["g_sampling"] = scenario.g_sampling
    if scenario.g_set is not None:
        doc["g_set"] = [list(g) for g in scenario.g_set]
    doc["trials"] = scenario.trials
    doc["seed"] = scenario.seed
    return doc
