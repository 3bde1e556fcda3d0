"""Scenario JSON reader/writer.

Bidders are numbered from 1 in files (coordinate ``i`` is bidder ``i``,
coordinate 0 the residual state); profiles are written with state labels,
and value entries may use ``"*"`` to mean every state of a coordinate.
"""
from __future__ import annotations

import json
import logging
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (JointPrior, Scenario, SignalingScheme, StateSpace, TypePrior, ValueKernel,
                    scheme_from_kernel, validate_scheme)

log = logging.getLogger(__name__)

BUNDLED = ("example1", "example2", "example3", "negative_control")


class ScenarioError(ValueError):
    def __init__(self, where: str, message: str, source: str = ""):
        self.where = where
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{where}: {message}")


def _req(obj, key, where, src):
    if not isinstance(obj, dict) or key not in obj:
        raise ScenarioError(where, f"missing field {key!r}", src)
    return obj[key]


def _resolve_profile(raw, labels, where, src, wildcard=False):
    if not isinstance(raw, list) or len(raw) != len(labels):
        raise ScenarioError(where, f"profile must list {len(labels)} states", src)
    out = []
    for c, (item, lab) in enumerate(zip(raw, labels)):
        key = str(item)
        if wildcard and key == "*":
            out.append(None)
        elif key in lab:
            out.append(lab.index(key))
        else:
            raise ScenarioError(f"{where}[{c}]", f"unknown state {item!r} (labels {list(lab)})", src)
    return out


def _bidder(raw, n, where, src) -> int:
    if not isinstance(raw, int) or not 1 <= raw <= n:
        raise ScenarioError(where, f"bidder must be an integer in 1..{n}", src)
    return raw - 1


def scenario_from_dict(data: dict, source: str = "") -> Scenario:
    src = source
    ss = _req(data, "state_space", "$", src)
    sizes = _req(ss, "sizes", "$.state_space", src)
    if not isinstance(sizes, list) or not all(isinstance(s, int) for s in sizes):
        raise ScenarioError("$.state_space.sizes", "must be a list of integers", src)
    try:
        space = StateSpace(tuple(sizes), tuple(tuple(l) for l in ss.get("labels", ())))
    except ValueError as exc:
        raise ScenarioError("$.state_space", str(exc), src) from None
    n = space.n_bidders

    probs = np.zeros(space.sizes)
    entries = _req(data, "joint_prior", "$", src)
    for k, ent in enumerate(entries):
        where = f"$.joint_prior[{k}]"
        prof = _resolve_profile(_req(ent, "profile", where, src), space.labels,
                                f"{where}.profile", src)
        pr = _req(ent, "prob", where, src)
        if not isinstance(pr, (int, float)) or pr < 0:
            raise ScenarioError(f"{where}.prob", "must be a nonnegative number", src)
        probs[tuple(prof)] += pr
    try:
        prior = JointPrior(space, probs)
    except ValueError as exc:
        raise ScenarioError("$.joint_prior", str(exc), src) from None

    raw_types = _req(data, "type_priors", "$", src)
    if not isinstance(raw_types, list) or len(raw_types) != n:
        raise ScenarioError("$.type_priors", f"need one entry per bidder ({n})", src)
    supports, masses = [None] * n, [None] * n
    for k, ent in enumerate(raw_types):
        where = f"$.type_priors[{k}]"
        i = _bidder(ent.get("bidder", k + 1), n, f"{where}.bidder", src)
        sup = [str(t) for t in _req(ent, "support", where, src)]
        h = np.asarray(_req(ent, "probs", where, src), dtype=float)
        if len(sup) != h.size or len(set(sup)) != len(sup):
            raise ScenarioError(where, "support and probs must align, labels unique", src)
        if np.any(h < 0):
            raise ScenarioError(f"{where}.probs", "must be nonnegative", src)
        keep = h > 0
        if not keep.all():
            log.info("bidder %d: dropping zero-mass types %s", i + 1,
                     [s for s, kp in zip(sup, keep) if not kp])
        supports[i] = tuple(s for s, kp in zip(sup, keep) if kp)
        masses[i] = h[keep]
    if any(s is None for s in supports):
        raise ScenarioError("$.type_priors", "every bidder needs a type prior", src)
    try:
        types = TypePrior(tuple(supports), tuple(masses))
    except ValueError as exc:
        raise ScenarioError("$.type_priors", str(exc), src) from None

    kernel = _read_values(_req(data, "values", "$", src), space, types, src)

    schemes = {}
    for k, ent in enumerate(data.get("schemes", [])):
        where = f"$.schemes[{k}]"
        i = _bidder(_req(ent, "bidder", where, src), n, f"{where}.bidder", src)
        name = str(ent.get("name", f"scheme{k}"))
        if "kernel" in ent:
            try:
                sch = scheme_from_kernel(i, ent["kernel"], prior, name)
            except ValueError as exc:
                raise ScenarioError(f"{where}.kernel", str(exc), src) from None
        else:
            sigs = _req(ent, "signals", where, src)
            w = [_req(s, "weight", f"{where}.signals[{j}]", src) for j, s in enumerate(sigs)]
            post = [_req(s, "posterior", f"{where}.signals[{j}]", src) for j, s in enumerate(sigs)]
            try:
                sch = SignalingScheme(i, w, post, name)
            except ValueError as exc:
                raise ScenarioError(where, str(exc), src) from None
        verdict = validate_scheme(sch, prior)
        if not verdict:
            raise ScenarioError(where, f"invalid scheme: {verdict.reason} "
                                       f"(violation {verdict.violation:.3g})", src)
        schemes[(i, name)] = sch

    try:
        return Scenario(space, prior, types, kernel, str(data.get("name", "")),
                        str(data.get("description", "")), schemes)
    except ValueError as exc:
        raise ScenarioError("$", str(exc), src) from None


def _read_values(vals, space, types, src) -> ValueKernel:
    n = space.n_bidders
    tables = [np.full((len(types.supports[i]),) + space.sizes, np.nan) for i in range(n)]
    if "separable" in vals:
        factors = [None] * n
        for k, ent in enumerate(vals["separable"]):
            where = f"$.values.separable[{k}]"
            i = _bidder(_req(ent, "bidder", where, src), n, f"{where}.bidder", src)
            base_raw = _req(ent, "base", where, src)
            cvr_raw = _req(ent, "cvr", where, src)
            base = np.full(len(types.supports[i]), np.nan)
            for t, val in base_raw.items():
                # unknown labels are zero-mass types dropped above
                if str(t) in types.supports[i]:
                    base[types.supports[i].index(str(t))] = val
            cvr = np.full(space.sizes[i + 1], np.nan)
            for s, val in cvr_raw.items():
                lab = space.labels[i + 1]
                if str(s) not in lab:
                    raise ScenarioError(f"{where}.cvr", f"unknown state {s!r}", src)
                cvr[lab.index(str(s))] = val
            if np.isnan(base).any():
                raise ScenarioError(f"{where}.base", "missing a value for some type", src)
            if np.isnan(cvr).any():
                raise ScenarioError(f"{where}.cvr", "missing a value for some state", src)
            shape = [1] * (len(space.sizes) + 1)
            shape[0] = base.size
            own = [1] * (len(space.sizes) + 1)
            own[i + 2] = cvr.size
            tables[i] = np.broadcast_to(base.reshape(shape) * cvr.reshape(own),
                                        tables[i].shape).copy()
            factors[i] = (base, cvr)
        private = True
        separable = tuple(factors)
    else:
        entries = _req(vals, "entries", "$.values", src)
        for k, ent in enumerate(entries):
            where = f"$.values.entries[{k}]"
            i = _bidder(_req(ent, "bidder", where, src), n, f"{where}.bidder", src)
            t = str(_req(ent, "type", where, src))
            if t not in types.supports[i]:
                continue
            prof = _resolve_profile(_req(ent, "profile", where, src), space.labels,
                                    f"{where}.profile", src, wildcard=True)
            v = _req(ent, "value", where, src)
            if not isinstance(v, (int, float)) or v < 0:
                raise ScenarioError(f"{where}.value", "must be a nonnegative number", src)
            idx = (types.supports[i].index(t),) + tuple(slice(None) if p is None else p for p in prof)
            tables[i][idx] = v
        private = bool(vals.get("private_value", False))
        separable = None
    for i, tab in enumerate(tables):
        if np.isnan(tab).any():
            missing = np.argwhere(np.isnan(tab))[0]
            raise ScenarioError("$.values", f"bidder {i + 1}: no value for type "
                                            f"{types.supports[i][missing[0]]!r} at profile "
                                            f"{tuple(int(a) for a in missing[1:])}", src)
    try:
        return ValueKernel(tuple(tables), private_value=private, separable=separable)
    except ValueError as exc:
        raise ScenarioError("$.values", str(exc), src) from None


def load_scenario(path) -> Scenario:
    """Load a scenario file, or a bundled fixture by name (``example1`` ...)."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        return bundled(str(path))
    text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", exc.msg, str(p)) from None
    return scenario_from_dict(data, str(p))


def bundled(name: str) -> Scenario:
    if name not in BUNDLED:
        raise KeyError(f"no bundled scenario {name!r}; choose from {BUNDLED}")
    text = resources.files("reticent").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return scenario_from_dict(json.loads(text), f"<bundled {name}>")


def scenario_to_dict(sc: Scenario) -> dict:
    """Dense-entry JSON form of a scenario (round-trips through the loader)."""
    space = sc.space
    labels = space.labels
    prior = [{"profile": [labels[c][s] for c, s in enumerate(prof)], "prob": float(sc.prior.probs[prof])}
             for prof in space.profiles() if sc.prior.probs[prof] > 0]
    types = [{"bidder": i + 1, "support": list(sup), "probs": [float(h) for h in sc.types.probs[i]]}
             for i, sup in enumerate(sc.types.supports)]
    entries = []
    for i, tab in enumerate(sc.kernel.tables):
        for t, lab in enumerate(sc.types.supports[i]):
            for prof in space.profiles():
                entries.append({"bidder": i + 1, "type": lab,
                                "profile": [labels[c][s] for c, s in enumerate(prof)],
                                "value": float(tab[(t,) + prof])})
    return {
        "name": sc.name,
        "description": sc.description,
        "state_space": {"sizes": list(space.sizes), "labels": [list(l) for l in labels]},
        "joint_prior": prior,
        "type_priors": types,
        "values": {"private_value": sc.kernel.private_value, "entries": entries},
        "schemes": [{"bidder": i + 1, "name": name,
                     "signals": [{"weight": float(w), "posterior": [float(x) for x in post]}
                                 for w, post in zip(sch.weights, sch.posteriors)]}
                    for (i, name), sch in sc.schemes.items()],
    }
