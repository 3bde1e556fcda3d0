"""Incentive, rationality and performance checks for reticent mechanisms.

Every incentive check quantifies over a finite :class:`DeviationFamily`, so a
PASS means no profitable deviation was found in the family, while a FAIL
carries a concrete witness that :func:`replay` reproduces exactly.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .mechanisms import TIE_TOL, ClassicMechanism, ValueContext, state_outcomes
from .meta import ReticentMechanism, auctioneer_posterior
from .model import (InconsistentSignals, Scenario, SignalingScheme, make_scheme, marginal,
                    regulated_kernel)

PROFIT_TOL = 1e-7
IR_TOL = 1e-9
JENSEN_TOL = 1e-9
COV_TOL = 1e-9
MONO_TOL = 1e-12
WELFARE_TOL = 1e-9
REPLAY_TOL = 1e-10

TOLERANCES = {
    "profitable_deviation": PROFIT_TOL,
    "individual_rationality": IR_TOL,
    "jensen": JENSEN_TOL,
    "covariance": COV_TOL,
    "monotone_allocation": MONO_TOL,
    "welfare": WELFARE_TOL,
}


# ---------------------------------------------------------------- strategies

@dataclass(frozen=True, eq=False)
class BidderStrategy:
    """A committed scheme plus a reporting map (true type index -> bid index)."""

    scheme: SignalingScheme
    report: tuple[int, ...]

    @classmethod
    def truthful(cls, scenario: Scenario, bidder: int) -> "BidderStrategy":
        scheme = make_scheme("full_revelation", bidder, scenario.prior)
        return cls(scheme, tuple(range(len(scenario.types.supports[bidder]))))

    def check(self, scenario: Scenario) -> None:
        n_types = len(scenario.types.supports[self.scheme.bidder])
        if len(self.report) != n_types or not all(0 <= b < n_types for b in self.report):
            raise ValueError(f"bidder {self.scheme.bidder}: reporting map must cover every type")


def strategy_from_spec(scenario: Scenario, bidder: int, spec: str) -> BidderStrategy:
    """Parse ``truthful``, ``no-info``, ``pool:a,b|c`` or ``random:seed[:count]``.

    Pool cells name states of the bidder's own coordinate by label.  Types
    are always reported truthfully.
    """
    prior = scenario.prior
    identity = tuple(range(len(scenario.types.supports[bidder])))
    spec = spec.strip()
    if spec in ("truthful", "full"):
        return BidderStrategy(make_scheme("full_revelation", bidder, prior), identity)
    if spec in ("no-info", "none"):
        return BidderStrategy(make_scheme("no_information", bidder, prior), identity)
    kind, _, rest = spec.partition(":")
    labels = scenario.space.labels[bidder + 1]
    if kind == "pool":
        cells = []
        for cell in rest.split("|"):
            idx = []
            for lab in cell.split(","):
                lab = lab.strip()
                if lab not in labels:
                    raise ValueError(f"bidder {bidder + 1}: unknown state {lab!r} in {spec!r}")
                idx.append(labels.index(lab))
            cells.append(idx)
        return BidderStrategy(make_scheme("pooling", bidder, prior, partition=cells), identity)
    if kind == "random":
        parts = rest.split(":")
        try:
            seed = int(parts[0])
            count = int(parts[1]) if len(parts) > 1 else 2
        except ValueError:
            raise ValueError(f"random strategy needs integers: {spec!r}") from None
        return BidderStrategy(make_scheme("random", bidder, prior, seed=seed, count=count), identity)
    raise ValueError(f"unknown strategy {spec!r}")


def truthful_profile(scenario: Scenario) -> list[BidderStrategy]:
    return [BidderStrategy.truthful(scenario, i) for i in range(scenario.n_bidders)]


# ---------------------------------------------------------------- signal grids

def _ratio_rows(scenario: Scenario, bidder: int, posteriors) -> np.ndarray:
    """Rows of s(theta_i) / g_i(theta_i), expanded over flat profiles."""
    g_i = marginal(scenario.prior, bidder + 1)
    post = np.atleast_2d(np.asarray(posteriors, dtype=float))
    if np.any((post > 0) & (g_i[None, :] <= 0)):
        raise InconsistentSignals(f"bidder {bidder}: signal puts mass on a zero-probability state")
    r = np.divide(post, g_i[None, :], out=np.zeros_like(post), where=g_i[None, :] > 0)
    return r[:, scenario.space.coords[bidder + 1]]


@dataclass(frozen=True, eq=False)
class _SignalGrid:
    weights: np.ndarray     # (S,) product of scheme weights
    nature: np.ndarray      # (S, |Theta|) g(theta) * prod_j s_j(theta_j) / g_j(theta_j)
    posteriors: np.ndarray  # (S, |Theta|) what the auctioneer infers

    @property
    def mass(self) -> np.ndarray:
        return self.nature.sum(axis=1)


def _signal_grid(scenario: Scenario, choices, regulated: bool) -> _SignalGrid:
    """All signal profiles from per-bidder ``(weights, posteriors)`` choices, C order."""
    coords = scenario.space.coords
    nature = scenario.prior.flat[None, :]
    prod = marginal(scenario.prior, 0)[coords[0]][None, :]
    weights = np.ones(1)
    for j, (w, post) in enumerate(choices):
        post = np.atleast_2d(np.asarray(post, dtype=float))
        R = _ratio_rows(scenario, j, post)
        nature = (nature[:, None, :] * R[None]).reshape(-1, nature.shape[1])
        prod = (prod[:, None, :] * post[:, coords[j + 1]][None]).reshape(-1, prod.shape[1])
        weights = np.outer(weights, np.asarray(w, dtype=float)).reshape(-1)
    mass = nature.sum(axis=1)
    keep = (mass > 0) & (weights > 0)
    nature, prod, weights, mass = nature[keep], prod[keep], weights[keep], mass[keep]
    posteriors = prod if regulated else nature / mass[:, None]
    return _SignalGrid(weights, nature, posteriors)


def _type_profiles(scenario: Scenario, fixed=None):
    """Yield (type index profile, probability), with some bidders' types pinned."""
    fixed = fixed or {}
    axes = []
    for j, h in enumerate(scenario.types.probs):
        axes.append([(int(fixed[j]), 1.0)] if j in fixed else list(enumerate(h)))
    for combo in itertools.product(*axes):
        yield tuple(t for t, _ in combo), math.prod(pr for _, pr in combo)


# ---------------------------------------------------------------- utilities

def utility(scenario: Scenario, mechanism: ReticentMechanism, strategies, realized,
            signals) -> np.ndarray:
    """Per-bidder utility at realized ``(types, states)`` and a signal profile.

    ``states`` lists every bidder's state, optionally preceded by the residual
    state; without it, values are averaged over the residual state.
    """
    types, states = realized
    n = scenario.n_bidders
    states = tuple(int(s) for s in states)
    if len(states) not in (n, n + 1):
        raise ValueError(f"need {n} bidder states (optionally with the residual state first)")
    own = states[-n:]
    for j, s in enumerate(signals):
        if np.asarray(s, dtype=float)[own[j]] <= 0:
            raise InconsistentSignals(f"bidder {j}'s signal excludes its realized state")
    post = auctioneer_posterior(scenario, signals, mechanism.regulated)
    bids = tuple(strategies[j].report[types[j]] for j in range(n))
    out = mechanism.outcome(bids, post)
    g0 = marginal(scenario.prior, 0)
    vals = np.empty(n)
    for j in range(n):
        tab = scenario.kernel.tables[j][types[j]]
        vals[j] = tab[states] if len(states) == n + 1 else g0 @ tab[(slice(None),) + own]
    return out.x * vals - out.p


def expected_utility(scenario: Scenario, mechanism: ReticentMechanism, strategies, bidder: int,
                     types=None, opponent_signals=None) -> float:
    """Expected utility of ``bidder`` over signals, states and types.

    ``types`` pins true type indices (``{bidder: t}``); ``opponent_signals``
    conditions on realized opponent signals (``{j: posterior}``).
    """
    cond = dict(opponent_signals or {})
    if bidder in cond:
        raise ValueError("cannot condition on the evaluated bidder's own signal")
    for s in strategies:
        s.check(scenario)
    choices = []
    for j, strat in enumerate(strategies):
        if j in cond:
            choices.append(([1.0], [cond[j]]))
        else:
            choices.append((strat.scheme.weights, strat.scheme.posteriors))
    grid = _signal_grid(scenario, choices, mechanism.regulated)
    z = scenario.prior.flat.copy()
    for j, s in cond.items():
        z *= _ratio_rows(scenario, j, s)[0]
    z = z.sum()
    if not z > 0:
        raise InconsistentSignals("conditioning signals have zero probability")
    run = mechanism.prepare(grid.posteriors)
    V = scenario.kernel.flat(bidder)
    mass = grid.mass
    total = 0.0
    for prof, pr in _type_profiles(scenario, types):
        bids = tuple(strategies[j].report[prof[j]] for j in range(scenario.n_bidders))
        x, p = run(bids)
        vals = grid.nature @ V[prof[bidder]]
        total += pr * float(grid.weights @ (x[:, bidder] * vals - p[:, bidder] * mass))
    return total / z


def _expected_totals(scenario: Scenario, mechanism: ReticentMechanism, strategies):
    """(expected revenue, expected welfare) under ``strategies`` with true types drawn."""
    grid = _signal_grid(scenario, [(s.scheme.weights, s.scheme.posteriors) for s in strategies],
                        mechanism.regulated)
    run = mechanism.prepare(grid.posteriors)
    mass = grid.mass
    lam = grid.weights * mass
    Vs = [scenario.kernel.flat(j) for j in range(scenario.n_bidders)]
    revenue = welfare = 0.0
    for prof, pr in _type_profiles(scenario):
        bids = tuple(strategies[j].report[prof[j]] for j in range(scenario.n_bidders))
        x, p = run(bids)
        revenue += pr * float(lam @ p.sum(axis=1))
        for j, V in enumerate(Vs):
            welfare += pr * float(grid.weights @ (x[:, j] * (grid.nature @ V[prof[j]])))
    return revenue, welfare


def revenue_metrics(scenario: Scenario, mechanism: ReticentMechanism, mask=None) -> float:
    """Expected revenue at truthful play when only bidders in ``mask`` reveal (0-based)."""
    n = scenario.n_bidders
    mask = set(range(n)) if mask is None else {int(i) for i in mask}
    if not mask <= set(range(n)):
        raise ValueError(f"mask {sorted(mask)} is not a subset of bidders 0..{n - 1}")
    strategies = []
    for i in range(n):
        kind = "full_revelation" if i in mask else "no_information"
        strategies.append(BidderStrategy(make_scheme(kind, i, scenario.prior),
                                         tuple(range(len(scenario.types.supports[i])))))
    return _expected_totals(scenario, mechanism, strategies)[0]


def best_elicitation_mask(scenario: Scenario, mechanism: ReticentMechanism):
    """Exhaustive search over which bidders to elicit from; returns (mask, revenue)."""
    n = scenario.n_bidders
    best = None
    for r in range(n + 1):
        for mask in itertools.combinations(range(n), r):
            rev = revenue_metrics(scenario, mechanism, mask)
            if best is None or rev > best[1] + 1e-12:
                best = (mask, rev)
    return best


def welfare_metrics(scenario: Scenario, mechanism: ReticentMechanism) -> dict:
    """Welfare at truthful play and the best welfare attainable from bidder states."""
    _, welfare = _expected_totals(scenario, mechanism, truthful_profile(scenario))
    g0 = marginal(scenario.prior, 0)
    g_rest = scenario.prior.probs.sum(axis=0)
    best = 0.0
    for prof, pr in _type_profiles(scenario):
        # residual state integrated out before taking the max
        vals = np.stack([np.tensordot(g0, scenario.kernel.tables[j][prof[j]], axes=(0, 0))
                         for j in range(scenario.n_bidders)])
        best += pr * float((vals.max(axis=0) * g_rest).sum())
    return {"welfare": welfare, "max_welfare": best}


def forced_report_utility(scenario: Scenario, mechanism: ReticentMechanism, bidder: int,
                          strategies=None) -> float:
    """Expected utility when ``bidder`` must name a single state, truthful or not.

    The bidder picks the best announcement for each true state; opponents
    follow ``strategies`` (truthful by default).  Announcements the
    auctioneer would find impossible are not available.
    """
    strategies = list(strategies or truthful_profile(scenario))
    n = scenario.n_bidders
    m = scenario.space.sizes[bidder + 1]
    eye = np.eye(m)
    coords = scenario.space.coords
    g_i = marginal(scenario.prior, bidder + 1)
    V = scenario.kernel.flat(bidder)
    opp = [j for j in range(n) if j != bidder]
    total = 0.0
    for true in np.flatnonzero(g_i > 0):
        best = -np.inf
        for announced in np.flatnonzero(g_i > 0):
            u = 0.0
            feasible = True
            for combo in itertools.product(*(range(len(strategies[j].scheme)) for j in opp)):
                w = scenario.prior.flat * (coords[bidder + 1] == true)
                signals = [None] * n
                signals[bidder] = eye[announced]
                weight = 1.0
                for j, k in zip(opp, combo):
                    s = strategies[j].scheme.posteriors[k]
                    signals[j] = s
                    weight *= strategies[j].scheme.weights[k]
                    w = w * _ratio_rows(scenario, j, s)[0]
                if not w.sum() > 0:
                    continue
                try:
                    post = auctioneer_posterior(scenario, signals, mechanism.regulated)
                except InconsistentSignals:
                    feasible = False
                    break
                for tprof, pr in _type_profiles(scenario):
                    bids = tuple(strategies[j].report[tprof[j]] for j in range(n))
                    out = mechanism.outcome(bids, post)
                    u += pr * weight * (out.x[bidder] * float(w @ V[tprof[bidder]])
                                        - out.p[bidder] * float(w.sum()))
            if feasible:
                best = max(best, u / g_i[true])
        total += g_i[true] * best
    return total


# ---------------------------------------------------------------- deviation family

def _two_cell_partitions(m: int):
    for mask in range(1, 2 ** (m - 1)):
        a = [s for s in range(m - 1) if mask >> s & 1]
        yield [a, [s for s in range(m) if s not in a]]


def _pair_merges(m: int):
    for a, b in itertools.combinations(range(m), 2):
        yield [[a, b]] + [[s] for s in range(m) if s not in (a, b)]


@dataclass(frozen=True, eq=False)
class DeviationFamily:
    """Candidate schemes per bidder; entry 0 is always full revelation.

    ``core[i]`` indexes the deterministic members (full, none, poolings,
    merges); the rest are seeded random schemes.  Pure type misreports are
    enumerated by the checks themselves.
    """

    schemes: tuple
    core: tuple
    k: int = 64
    seed: int = 0
    opponent_samples: int = 16

    @classmethod
    def build(cls, scenario: Scenario, k: int = 64, seed: int = 0,
              opponent_samples: int = 16) -> "DeviationFamily":
        prior = scenario.prior
        per, cores = [], []
        for i in range(scenario.n_bidders):
            m = scenario.space.sizes[i + 1]
            members = [make_scheme("full_revelation", i, prior),
                       make_scheme("no_information", i, prior)]
            members += [make_scheme("pooling", i, prior, partition=c) for c in _two_cell_partitions(m)]
            members += [make_scheme("pooling", i, prior, partition=c) for c in _pair_merges(m)]
            members = _dedupe(members)
            n_core = len(members)
            if m > 1 and int((marginal(prior, i + 1) > 0).sum()) > 1:
                rng = np.random.default_rng([seed, i])
                for _ in range(k):
                    count = int(rng.integers(2, m + 2))
                    members.append(make_scheme("random", i, prior, seed=int(rng.integers(2 ** 31)),
                                               count=count))
                members = _dedupe(members)
            per.append(tuple(members))
            cores.append(tuple(range(n_core)))
        return cls(tuple(per), tuple(cores), k, seed, opponent_samples)

    @classmethod
    def from_schemes(cls, scenario: Scenario, schemes, opponent_samples: int = 0) -> "DeviationFamily":
        """Explicit family; full revelation is prepended where missing."""
        per = []
        for i, lst in enumerate(schemes):
            full = make_scheme("full_revelation", i, scenario.prior)
            per.append(tuple(_dedupe([full] + list(lst))))
        return cls(tuple(per), tuple(tuple(range(len(p))) for p in per), 0, 0, opponent_samples)

    def sizes(self) -> list[int]:
        return [len(s) for s in self.schemes]

    def opponent_profiles(self, bidder: int) -> list[tuple[int, ...]]:
        """Core products for all opponents plus seeded samples over the whole family."""
        opp = [j for j in range(len(self.schemes)) if j != bidder]
        out = list(itertools.product(*(self.core[j] for j in opp)))
        if self.opponent_samples and opp:
            rng = np.random.default_rng([self.seed, bidder, 7])
            for _ in range(self.opponent_samples):
                out.append(tuple(int(rng.integers(len(self.schemes[j]))) for j in opp))
        seen, uniq = set(), []
        for prof in out:
            if prof not in seen:
                seen.add(prof)
                uniq.append(prof)
        return uniq


def _dedupe(schemes):
    seen, out = set(), []
    for s in schemes:
        sig = s.signature()
        if sig not in seen:
            seen.add(sig)
            out.append(s)
    return out


# ---------------------------------------------------------------- check results

@dataclass(frozen=True)
class Deviation:
    """Best deviation found at one configuration, with what is needed to replay it.

    Opponent entries are ``(bidder, value)`` pairs.  Empty opponent signals
    mean opponents were integrated out at truthful full revelation.
    """

    check: str
    bidder: int
    true_type: int
    bid: int
    scheme_index: int
    scheme: str
    truthful_utility: float
    deviation_utility: float
    opponent_schemes: tuple = ()
    opponent_signals: tuple = ()
    opponent_bids: tuple = ()

    @property
    def gain(self) -> float:
        return self.deviation_utility - self.truthful_utility

    def to_dict(self, scenario: Scenario) -> dict:
        sup = scenario.types.supports
        signals = dict(self.opponent_signals)
        bids = dict(self.opponent_bids)
        return {
            "bidder": self.bidder + 1,
            "true_type": sup[self.bidder][self.true_type],
            "bid": sup[self.bidder][self.bid],
            "scheme": self.scheme,
            "gain": self.gain,
            "truthful_utility": self.truthful_utility,
            "deviation_utility": self.deviation_utility,
            "opponents": [{"bidder": j + 1, "scheme": name,
                           "signal": list(signals[j]) if j in signals else None,
                           "bid": sup[j][bids[j]] if j in bids else None}
                          for j, name in self.opponent_schemes],
        }

    def describe(self, scenario: Scenario) -> str:
        d = self.to_dict(scenario)
        opp = ", ".join(f"{o['bidder']}:{o['scheme']}" for o in d["opponents"]) or "integrated"
        return (f"bidder {d['bidder']} type {d['true_type']} bids {d['bid']} with {d['scheme']} "
                f"(opponents {opp}) gains {self.gain:.6g}")


@dataclass(frozen=True)
class CheckResult:
    name: str
    holds: bool | None
    margin: float = math.inf
    detail: str = ""
    witness: object = None
    per_bidder: tuple = ()

    def __post_init__(self):
        if self.holds is not None:
            object.__setattr__(self, "holds", bool(self.holds))
        object.__setattr__(self, "margin", float(self.margin))

    @property
    def status(self) -> str:
        return "SKIP" if self.holds is None else ("PASS" if self.holds else "FAIL")

    def __bool__(self):
        return bool(self.holds)

    def to_dict(self, scenario: Scenario) -> dict:
        wit = self.witness
        if isinstance(wit, Deviation):
            wit = wit.to_dict(scenario) if not self.holds else None
        return {"name": self.name, "status": self.status,
                "margin": None if not math.isfinite(self.margin) else float(self.margin) + 0.0,
                "detail": self.detail, "witness": wit}


class _Tracker:
    """Keeps the first configuration attaining the smallest margin."""

    def __init__(self):
        self.margin = math.inf
        self.item = None

    def offer(self, margin: float, make):
        if margin < self.margin - 1e-12:
            self.margin = margin
            self.item = make()


def _iic_result(name: str, trackers, scenario: Scenario, tol: float = PROFIT_TOL) -> CheckResult:
    worst = _Tracker()
    for tr in trackers:
        worst.offer(tr.margin, lambda tr=tr: tr.item)
    holds = worst.margin >= -tol
    detail = "no profitable deviation in family" if holds else worst.item.describe(scenario)
    per = tuple(tr.item if tr.item is not None and tr.item.gain > tol else None for tr in trackers)
    return CheckResult(name, holds, worst.margin, detail, worst.item, per)


# ---------------------------------------------------------------- deviation tables

class _BidderTables:
    """Utilities of every (bid, family scheme) for one bidder, batched over own signals."""

    def __init__(self, mechanism: ReticentMechanism, family: DeviationFamily, bidder: int):
        sc = mechanism.scenario
        self.mechanism, self.scenario, self.i = mechanism, sc, bidder
        self.schemes = family.schemes[bidder]
        bank = np.vstack([s.posteriors for s in self.schemes])
        self.A = np.zeros((len(self.schemes), bank.shape[0]))
        r = 0
        for k, s in enumerate(self.schemes):
            self.A[k, r:r + len(s)] = s.weights
            r += len(s)
        coords = sc.space.coords
        self.R = _ratio_rows(sc, bidder, bank)
        self.own_product = bank[:, coords[bidder + 1]] * marginal(sc.prior, 0)[coords[0]][None, :]
        self.V = sc.kernel.flat(bidder)
        self.n_types = self.V.shape[0]

    def evaluate(self, opp_signals: dict, opp_bid_profiles, own_bids=None):
        """Yield ``(opp bids, table[bid, scheme, type], Pr(opp signals))``.

        Tables are conditional on the opponents' realized signals.
        """
        sc, i = self.scenario, self.i
        coords = sc.space.coords
        w = sc.prior.flat.copy()
        prod = np.ones_like(w)
        for j, s in opp_signals.items():
            s = np.asarray(s, dtype=float)
            w *= _ratio_rows(sc, j, s)[0]
            prod *= s[coords[j + 1]]
        zopp = w.sum()
        if not zopp > 0:
            return
        M = self.R * w[None, :]
        Z = M.sum(axis=1)
        if self.mechanism.regulated:
            P = self.own_product * prod[None, :]
        else:
            # rows with zero mass never contribute; any distribution will do
            P = np.divide(M, Z[:, None], out=np.tile(sc.prior.flat, (M.shape[0], 1)),
                          where=Z[:, None] > 0)
        run = self.mechanism.prepare(P)
        MV = M @ self.V.T
        own_bids = range(self.n_types) if own_bids is None else own_bids
        for b_opp in opp_bid_profiles:
            table = np.full((self.n_types, len(self.schemes), self.n_types), -np.inf)
            for b in own_bids:
                x, p = run(tuple(b_opp[:i]) + (b,) + tuple(b_opp[i:]))
                U = x[:, i, None] * MV - p[:, i, None] * Z[:, None]
                table[b] = self.A @ U
            yield tuple(b_opp), table / zopp, zopp


def _opponents(scenario: Scenario, bidder: int) -> list[int]:
    return [j for j in range(scenario.n_bidders) if j != bidder]


def _opp_type_profiles(scenario: Scenario, bidder: int):
    opp = _opponents(scenario, bidder)
    for combo in itertools.product(*(list(enumerate(scenario.types.probs[j])) for j in opp)):
        yield tuple(t for t, _ in combo), math.prod(pr for _, pr in combo)


def _offer_table(tracker, table, name, bidder, schemes, opp_meta, fd: bool):
    """Compare truthful play with the best deviation, for every own type."""
    n_types = table.shape[0]
    for t in range(n_types):
        truthful = table[t, 0, t]
        sub = table[t:t + 1, :, t] if fd else table[:, :, t]
        top = sub.max()
        # earliest family member within float noise of the best
        flat = int(np.argmax(sub.reshape(-1) >= top - 1e-12 * max(1.0, abs(top))))
        b, s = divmod(flat, sub.shape[1])
        if fd:
            b = t
        dev = sub.reshape(-1)[flat]
        tracker.offer(truthful - dev, lambda: Deviation(
            name, bidder, t, b, s, schemes[s].name or f"scheme{s}", float(truthful), float(dev),
            *opp_meta))


def _scan_truthful_opponents(mechanism: ReticentMechanism, family: DeviationFamily,
                             bidder: int, nature: str = "conditional"):
    """Ex-post trackers and Bayesian accumulators for one bidder.

    Opponents reveal fully and bid truthfully; their states are enumerated.
    ``nature="marginal"`` draws the own state from its marginal instead of
    conditioning it on the opponents' states.
    """
    sc = mechanism.scenario
    opp = _opponents(sc, bidder)
    tabs = _BidderTables(mechanism, family, bidder)
    g_opp = sc.prior.probs.sum(axis=(0, bidder + 1))
    opp_types = list(_opp_type_profiles(sc, bidder))
    h_opp = dict(opp_types)
    bids = [t for t, _ in opp_types]
    eyes = {j: np.eye(sc.space.sizes[j + 1]) for j in opp}
    tracker = _Tracker()
    acc = np.zeros((tabs.n_types, len(tabs.schemes), tabs.n_types))
    for theta in np.ndindex(*g_opp.shape):
        if g_opp[theta] <= 0:
            continue
        signals = {j: eyes[j][theta[k]] for k, j in enumerate(opp)}
        if nature == "marginal":
            evaluated = _marginal_nature_tables(tabs, signals, bids)
        else:
            evaluated = tabs.evaluate(signals, bids)
        for b_opp, table, z in evaluated:
            acc += h_opp[b_opp] * z * table
            meta = (tuple((j, "full") for j in opp),
                    tuple((j, tuple(signals[j].tolist())) for j in opp),
                    tuple(zip(opp, b_opp)))
            _offer_table(tracker, table, "expost-iic", bidder, tabs.schemes, meta, fd=False)
    return tracker, acc, tabs.schemes


def _marginal_nature_tables(tabs: _BidderTables, signals: dict, bids):
    """Own state drawn from its marginal, independent of the opponents' point states."""
    sc, i = tabs.scenario, tabs.i
    coords = sc.space.coords
    g_i = marginal(sc.prior, i + 1)
    nat = marginal(sc.prior, 0)[coords[0]] * g_i[coords[i + 1]]
    prod = np.ones(sc.space.n_profiles)
    for j, s in signals.items():
        prod *= np.asarray(s)[coords[j + 1]]
    nat = nat * prod
    M = tabs.R * nat[None, :]
    Z = M.sum(axis=1)
    if tabs.mechanism.regulated:
        P = tabs.own_product * prod[None, :]
    else:
        rows = []
        for k in range(M.shape[0]):
            own = tabs.R[k] * sc.prior.flat * prod
            if not own.sum() > 0:
                raise InconsistentSignals("own signal is impossible given the opponents' states")
            rows.append(own / own.sum())
        P = np.array(rows)
    run = tabs.mechanism.prepare(P)
    MV = M @ tabs.V.T
    for b_opp in bids:
        table = np.empty((tabs.n_types, len(tabs.schemes), tabs.n_types))
        for b in range(tabs.n_types):
            x, p = run(tuple(b_opp[:i]) + (b,) + tuple(b_opp[i:]))
            table[b] = tabs.A @ (x[:, i, None] * MV - p[:, i, None] * Z[:, None])
        yield tuple(b_opp), table, 1.0


def _truthful_scan(mechanism, family, nature="conditional"):
    sc = mechanism.scenario
    expost, bayes = [], []
    for i in range(sc.n_bidders):
        tracker, acc, schemes = _scan_truthful_opponents(mechanism, family, i, nature)
        expost.append(tracker)
        bt = _Tracker()
        opp = _opponents(sc, i)
        meta = (tuple((j, "full") for j in opp), (), ())
        _offer_table(bt, acc, "bayesian-iic", i, schemes, meta, fd=False)
        bayes.append(bt)
    return (_iic_result("expost-iic", expost, sc), _iic_result("bayesian-iic", bayes, sc))


def _dominant_scan(mechanism, family):
    sc = mechanism.scenario
    dom, fd = [], []
    for i in range(sc.n_bidders):
        opp = _opponents(sc, i)
        tabs = _BidderTables(mechanism, family, i)
        bids = list(itertools.product(*(range(len(sc.types.supports[j])) for j in opp)))
        td, tf = _Tracker(), _Tracker()
        for prof in family.opponent_profiles(i):
            schemes = [family.schemes[j][k] for j, k in zip(opp, prof)]
            names = tuple((j, s.name or f"scheme{k}") for j, s, k in zip(opp, schemes, prof))
            for combo in itertools.product(*(range(len(s)) for s in schemes)):
                signals = {j: s.posteriors[c] for j, s, c in zip(opp, schemes, combo)}
                sig_meta = tuple((j, tuple(signals[j].tolist())) for j in opp)
                for b_opp, table, _z in tabs.evaluate(signals, bids):
                    meta = (names, sig_meta, tuple(zip(opp, b_opp)))
                    _offer_table(td, table, "dominant-iic", i, tabs.schemes, meta, fd=False)
                    _offer_table(tf, table, "fd", i, tabs.schemes, meta, fd=True)
        dom.append(td)
        fd.append(tf)
    return _iic_result("dominant-iic", dom, sc), _iic_result("fd", fd, sc)


def check_expost_iic(scenario: Scenario, mechanism: ReticentMechanism,
                     family: DeviationFamily, nature: str = "conditional") -> CheckResult:
    """Truthful full revelation against every family deviation, opponents at point signals.

    The own state is conditioned on the opponents' states; ``nature="marginal"``
    switches to drawing it from its marginal.
    """
    _same(scenario, mechanism)
    return _truthful_scan(mechanism, family, nature)[0]


def check_bayesian_iic(scenario: Scenario, mechanism: ReticentMechanism,
                       family: DeviationFamily) -> CheckResult:
    _same(scenario, mechanism)
    return _truthful_scan(mechanism, family)[1]


def check_dominant_iic(scenario: Scenario, mechanism: ReticentMechanism,
                       family: DeviationFamily) -> CheckResult:
    """Opponents range over family strategy profiles and arbitrary bids.

    Utilities are compared conditional on each realized opponent signal profile.
    """
    _same(scenario, mechanism)
    return _dominant_scan(mechanism, family)[0]


def check_fd(scenario: Scenario, mechanism: ReticentMechanism,
             family: DeviationFamily) -> CheckResult:
    """Full revelation against family schemes, with every type reported truthfully."""
    _same(scenario, mechanism)
    return _dominant_scan(mechanism, family)[1]


def _same(scenario, mechanism):
    if mechanism.scenario is not scenario:
        raise ValueError("mechanism was built for a different scenario")


def replay(scenario: Scenario, mechanism: ReticentMechanism, family: DeviationFamily,
           dev: Deviation) -> tuple[float, float]:
    """Recompute (truthful, deviation) utilities of a witness through expected_utility."""
    i = dev.bidder
    n = scenario.n_bidders
    schemes_by_name = {}
    for j in range(n):
        schemes_by_name[j] = {s.name: s for s in family.schemes[j]}
    strategies = truthful_profile(scenario)
    for j, name in dev.opponent_schemes:
        if name in schemes_by_name[j]:
            strategies[j] = BidderStrategy(schemes_by_name[j][name], strategies[j].report)
    types = {i: dev.true_type}
    types.update({j: b for j, b in dev.opponent_bids})
    cond = {j: np.array(s) for j, s in dev.opponent_signals}
    truthful = expected_utility(scenario, mechanism, strategies, i, types, cond)
    report = list(range(len(scenario.types.supports[i])))
    report[dev.true_type] = dev.bid
    strategies[i] = BidderStrategy(family.schemes[i][dev.scheme_index], tuple(report))
    deviation = expected_utility(scenario, mechanism, strategies, i, types, cond)
    return float(truthful), float(deviation)


# ---------------------------------------------------------------- rationality

def _point_profiles(scenario: Scenario):
    """Bidder-state profiles with positive mass, their masses and point posteriors."""
    sc = scenario
    g_rest = sc.prior.probs.sum(axis=0)
    coords = sc.space.coords
    g0 = marginal(sc.prior, 0)[coords[0]]
    profs = [th for th in np.ndindex(*g_rest.shape) if g_rest[th] > 0]
    P = np.empty((len(profs), sc.space.n_profiles))
    for r, th in enumerate(profs):
        hit = np.ones(sc.space.n_profiles, dtype=bool)
        for j, s in enumerate(th):
            hit &= coords[j + 1] == s
        P[r] = g0 * hit
    return profs, np.array([g_rest[th] for th in profs]), P


def check_ir(scenario: Scenario, mechanism: ReticentMechanism, mode: str = "ex-post") -> CheckResult:
    """Truthful play never loses money: at every profile, or on average over opponents."""
    if mode not in ("ex-post", "interim"):
        raise ValueError("mode must be 'ex-post' or 'interim'")
    _same(scenario, mechanism)
    sc = scenario
    n = sc.n_bidders
    profs, mass, P = _point_profiles(sc)
    run = mechanism.prepare(P)
    Vs = [sc.kernel.flat(j) for j in range(n)]
    worst = _Tracker()
    acc = [np.zeros((len(sc.types.supports[j]), sc.space.sizes[j + 1])) for j in range(n)]
    for tprof, pr in _type_profiles(sc):
        x, p = run(tprof)
        for j in range(n):
            u = x[:, j] * (P @ Vs[j][tprof[j]]) - p[:, j]
            if mode == "ex-post":
                r = int(np.argmin(u))
                worst.offer(float(u[r]), lambda: {
                    "bidder": j + 1, "types": [sc.types.supports[k][t] for k, t in enumerate(tprof)],
                    "states": [sc.space.labels[k + 1][s] for k, s in enumerate(profs[r])],
                    "utility": float(u[r])})
            else:
                own = np.array([th[j] for th in profs])
                h_own = sc.types.probs[j][tprof[j]]
                np.add.at(acc[j][tprof[j]], own, pr / h_own * mass * u)
    if mode == "interim":
        for j in range(n):
            g_j = marginal(sc.prior, j + 1)
            cond = np.divide(acc[j], g_j[None, :], out=np.zeros_like(acc[j]), where=g_j[None, :] > 0)
            cond[:, g_j <= 0] = np.inf
            t, s = np.unravel_index(int(np.argmin(cond)), cond.shape)
            worst.offer(float(cond[t, s]), lambda: {
                "bidder": j + 1, "type": sc.types.supports[j][t],
                "state": sc.space.labels[j + 1][s], "utility": float(cond[t, s])})
    holds = worst.margin >= -IR_TOL
    name = "expost-ir" if mode == "ex-post" else "interim-ir"
    detail = "all utilities nonnegative" if holds else f"negative utility {worst.margin:.6g}"
    return CheckResult(name, holds, worst.margin, detail, worst.item)


# ---------------------------------------------------------------- structural preconditions

def _base_utility(base: ClassicMechanism, kernel, probs, bids, rows, bidder):
    """Bidder's utility when ``base`` runs on posterior-expected values, per row."""
    levels = [rows @ kernel.flat(j).T for j in range(kernel.n_bidders)]
    x, p = base(ValueContext(levels, probs, tuple(bids), {}))
    return x[:, bidder] * levels[bidder][:, bids[bidder]] - p[:, bidder]


def check_convex_utility(scenario: Scenario, base: ClassicMechanism, samples: int = 200,
                         seed: int = 0, regulated: bool = False) -> CheckResult:
    """Jensen test of a bidder's utility over beliefs about its own state.

    Beliefs are the own-state simplex with opponents at point states and the
    residual state at its prior.  Each sample tests a random chord and the
    vertex inequality ``U(q) <= sum_s q(s) U(delta_s)``.
    """
    sc = scenario
    kernel = regulated_kernel(sc.kernel, sc.prior) if regulated else sc.kernel
    n = sc.n_bidders
    bidders = [i for i in range(n) if sc.space.sizes[i + 1] > 1]
    if not bidders:
        return CheckResult("convex-utility", True, math.inf, "vacuous: no bidder has a state to reveal")
    rng = np.random.default_rng(seed)
    coords = sc.space.coords
    g0 = marginal(sc.prior, 0)[coords[0]]
    worst = _Tracker()
    for i in bidders:
        m = sc.space.sizes[i + 1]
        opp = _opponents(sc, i)
        g_opp = sc.prior.probs.sum(axis=(0, i + 1))
        opp_states = [th for th in np.ndindex(*g_opp.shape) if g_opp[th] > 0]
        for k in range(samples):
            bids = tuple(int(rng.integers(len(sc.types.supports[j]))) for j in range(n))
            th = opp_states[int(rng.integers(len(opp_states)))]
            conc = 1.0 if k % 2 == 0 else 0.3
            q1, q2 = rng.dirichlet(np.full(m, conc)), rng.dirichlet(np.full(m, conc))
            a = float(rng.uniform())
            mix = a * q1 + (1 - a) * q2
            beliefs = np.vstack([q1, q2, mix, np.eye(m)])
            base_row = g0.copy()
            for j, s in zip(opp, th):
                base_row = base_row * (coords[j + 1] == s)
            rows = beliefs[:, coords[i + 1]] * base_row[None, :]
            u = _base_utility(base, kernel, sc.types.probs, bids, rows, i)
            chord = u[2] - (a * u[0] + (1 - a) * u[1])
            vertex = max(u[0] - q1 @ u[3:], u[1] - q2 @ u[3:])
            viol = max(chord, vertex)
            worst.offer(-viol, lambda: {
                "bidder": i + 1, "bids": [sc.types.supports[j][b] for j, b in enumerate(bids)],
                "opponent_states": [sc.space.labels[j + 1][s] for j, s in zip(opp, th)],
                "q1": q1.tolist(), "q2": q2.tolist(), "alpha": a, "violation": float(viol)})
    holds = worst.margin >= -JENSEN_TOL
    detail = ("no Jensen violation found" if holds
              else f"bidder {worst.item['bidder']}: violation {-worst.margin:.6g}")
    return CheckResult("convex-utility", holds, worst.margin, detail, worst.item)


def check_monotone_allocation(scenario: Scenario, base: ClassicMechanism,
                              family: DeviationFamily | None = None) -> CheckResult:
    """Higher value never means a lower allocation, opponents and residual state fixed.

    With a family, also requires ``Cov[value, allocation] >= 0`` under every
    own posterior in the family.
    """
    sc = scenario
    n = sc.n_bidders
    tshape = tuple(len(s) for s in sc.types.supports)
    sizes = sc.space.sizes
    X = np.empty(tshape + sizes + (n,))
    cache: dict = {}
    for tprof in np.ndindex(*tshape):
        x, _p = state_outcomes(base, sc.kernel, sc.types, tprof, cache)
        X[tprof] = x.reshape(sizes + (n,))
    worst = _Tracker()
    cov_worst = _Tracker()
    for i in range(n):
        xi = X[..., i]
        vi = sc.kernel.tables[i]
        # broadcast values over opponents' type axes
        shape = [1] * n + list(sizes)
        shape[i] = tshape[i]
        vi = np.broadcast_to(vi.reshape(shape), xi.shape)
        t_ax, s_ax = i, n + i + 1
        xi_m = np.moveaxis(xi, (t_ax, s_ax), (-2, -1))
        vi_m = np.moveaxis(vi, (t_ax, s_ax), (-2, -1))
        ctx_shape = xi_m.shape[:-2]
        xs = xi_m.reshape(-1, tshape[i] * sizes[i + 1])
        vs = vi_m.reshape(-1, tshape[i] * sizes[i + 1])
        tol = TIE_TOL * np.maximum(1.0, np.abs(vs))
        ge = vs[:, :, None] >= vs[:, None, :] - tol[:, :, None]
        gap = np.where(ge, xs[:, None, :] - xs[:, :, None], -np.inf)
        c = int(np.argmax(gap.max(axis=(1, 2))))
        viol = float(gap[c].max())
        worst.offer(-viol, lambda: _mono_witness(sc, i, c, ctx_shape, gap[c], viol))
        if family is not None:
            bank = np.vstack([s.posteriors for s in family.schemes[i]])
            xr = xi_m.reshape(-1, tshape[i], sizes[i + 1])
            vr = vi_m.reshape(-1, tshape[i], sizes[i + 1])
            exy = (xr * vr) @ bank.T
            cov = exy - (xr @ bank.T) * (vr @ bank.T)
            worst_cov = float(cov.min())
            cov_worst.offer(worst_cov, lambda: {"bidder": i + 1, "covariance": worst_cov})
    holds = worst.margin >= -MONO_TOL and cov_worst.margin >= -COV_TOL
    if holds:
        detail = "allocation monotone in value"
    elif worst.margin < -MONO_TOL:
        detail = worst.item["detail"]
    else:
        detail = f"negative covariance {cov_worst.margin:.6g} for bidder {cov_worst.item['bidder']}"
    wit = worst.item if worst.margin < -MONO_TOL else cov_worst.item
    return CheckResult("monotone-allocation", holds, min(worst.margin, cov_worst.margin), detail, wit)


def _mono_witness(sc, i, c, ctx_shape, gap, viol):
    a, b = np.unravel_index(int(np.argmax(gap)), gap.shape)
    m = sc.space.sizes[i + 1]
    hi_t, hi_s = divmod(int(a), m)
    lo_t, lo_s = divmod(int(b), m)
    ctx = np.unravel_index(c, ctx_shape) if ctx_shape else ()
    sup = sc.types.supports[i]
    lab = sc.space.labels[i + 1]
    return {"bidder": i + 1, "context": [int(v) for v in ctx],
            "higher_value": [sup[hi_t], lab[hi_s]], "lower_value": [sup[lo_t], lab[lo_s]],
            "allocation_drop": viol,
            "detail": f"bidder {i + 1}: ({sup[hi_t]}, {lab[hi_s]}) gets {viol:.3g} less than "
                      f"lower-valued ({sup[lo_t]}, {lab[lo_s]})"}


# ---------------------------------------------------------------- revenue oracle

class OracleSizeError(ValueError):
    pass


MAX_TYPE_PROFILES = 4096
MAX_STATE_PROFILES = 20000
MAX_ENUMERATED_RULES = 2_000_000


def optimal_revenue_at(values, probs, method: str = "lp") -> float:
    """Best expected revenue of a dominant-strategy IC, ex-post IR auction.

    ``values[i]`` lists bidder ``i``'s value per type, ``probs[i]`` the masses.
    ``method="enumerate"`` searches deterministic monotone rules with
    threshold payments (tiny instances only).
    """
    values = [np.asarray(v, dtype=float) for v in values]
    probs = [np.asarray(h, dtype=float) for h in probs]
    shape = tuple(v.size for v in values)
    N = int(np.prod(shape))
    if N > MAX_TYPE_PROFILES:
        raise OracleSizeError(f"{N} type profiles exceed the oracle limit {MAX_TYPE_PROFILES}")
    if method == "lp":
        return _optimal_revenue_lp(values, probs, shape)
    if method == "enumerate":
        return _optimal_revenue_enum(values, probs, shape)
    raise ValueError(f"unknown oracle method {method!r}")


def _optimal_revenue_lp(values, probs, shape) -> float:
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    n = len(values)
    N = int(np.prod(shape))
    prof = np.array(list(np.ndindex(*shape))).reshape(N, n)
    h = np.prod([probs[i][prof[:, i]] for i in range(n)], axis=0)
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(n)])

    def xv(i, k):
        return i * N + k

    def pv(i, k):
        return n * N + i * N + k

    rows, cols, data, rhs = [], [], [], []
    r = 0
    for k in range(N):
        for i in range(n):
            rows.append(r); cols.append(xv(i, k)); data.append(1.0)
        rhs.append(1.0)
        r += 1
    for i in range(n):
        v = values[i]
        for k in range(N):
            t = prof[k, i]
            # ex-post IR
            rows += [r, r]; cols += [pv(i, k), xv(i, k)]; data += [1.0, -v[t]]
            rhs.append(0.0)
            r += 1
            for t2 in range(shape[i]):
                if t2 == t:
                    continue
                k2 = k + (t2 - t) * strides[i]
                # type t must not prefer the outcome of type t2
                rows += [r, r, r, r]
                cols += [xv(i, k2), pv(i, k2), xv(i, k), pv(i, k)]
                data += [v[t], -1.0, -v[t], 1.0]
                rhs.append(0.0)
                r += 1
    A = coo_matrix((data, (rows, cols)), shape=(r, 2 * n * N)).tocsr()
    c = np.concatenate([np.zeros(n * N), -np.tile(h, n)])
    bounds = [(0.0, 1.0)] * (n * N) + [(None, None)] * (n * N)
    res = linprog(c, A_ub=A, b_ub=np.array(rhs), bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"revenue LP failed: {res.message}")
    return float(-res.fun)


def _optimal_revenue_enum(values, probs, shape) -> float:
    n = len(values)
    if n == 1:
        v, h = values[0], probs[0]
        return float(max([0.0] + [v[k] * h[v >= v[k]].sum() for k in range(v.size)]))
    for v in values:
        if np.unique(v).size != v.size:
            raise ValueError("enumeration oracle needs distinct values per bidder")
    N = int(np.prod(shape))
    if (n + 1) ** N > MAX_ENUMERATED_RULES:
        raise OracleSizeError(f"{(n + 1) ** N} allocation rules exceed {MAX_ENUMERATED_RULES}")
    profs = list(np.ndindex(*shape))
    h = np.array([math.prod(probs[i][t[i]] for i in range(n)) for t in profs])
    best = 0.0
    for rule in itertools.product(range(n + 1), repeat=N):
        win = np.array(rule).reshape(shape)  # 0 = unsold, i + 1 = bidder i
        rev = 0.0
        ok = True
        for i in range(n):
            order = np.argsort(values[i])
            ax = np.moveaxis(win == i + 1, i, -1)[..., order]
            # monotone: once winning at some value, win at every higher value
            if np.any(ax[..., :-1] & ~ax[..., 1:]):
                ok = False
                break
            first = np.where(ax.any(axis=-1), np.argmax(ax, axis=-1), -1)
            price = np.where(first >= 0, values[i][order][np.maximum(first, 0)], 0.0)
            pay = np.moveaxis(np.where(ax, price[..., None], 0.0), -1, i)
            inv = np.empty_like(order)
            inv[order] = np.arange(order.size)
            pay = np.take(pay, inv, axis=i)
            rev += float((pay.reshape(-1) * h).sum())
        if ok and rev > best:
            best = rev
    return best


def bruteforce_optimal_revenue(scenario: Scenario, method: str = "lp") -> float:
    """Expected best revenue when the whole information profile is known to the auctioneer."""
    sc = scenario
    if sc.space.n_profiles > MAX_STATE_PROFILES:
        raise OracleSizeError(f"{sc.space.n_profiles} state profiles exceed {MAX_STATE_PROFILES}")
    memo: dict = {}
    total = 0.0
    g = sc.prior.flat
    Vs = [sc.kernel.flat(j) for j in range(sc.n_bidders)]
    for k in np.flatnonzero(g > 0):
        vals = [V[:, k] for V in Vs]
        key = tuple(np.round(np.concatenate(vals), 12))
        got = memo.get(key)
        if got is None:
            got = optimal_revenue_at(vals, sc.types.probs, method)
            memo[key] = got
        total += g[k] * got
    return total


# ---------------------------------------------------------------- reports

CHECKS = ("expost-iic", "bayesian-iic", "dominant-iic", "expost-ir", "interim-ir", "fd",
          "convex-utility", "monotone-allocation", "welfare-optimal")


@dataclass(frozen=True, eq=False)
class VerificationReport:
    scenario: Scenario
    mechanism: str
    family: DeviationFamily
    results: dict
    metrics: dict
    warnings: tuple = ()
    best_deviations: tuple = ()

    @property
    def ok(self) -> bool:
        return all(r.status != "FAIL" for r in self.results.values())

    def to_dict(self) -> dict:
        sc = self.scenario
        return {
            "scenario": sc.name,
            "mechanism": self.mechanism,
            "family": {"k": self.family.k, "seed": self.family.seed,
                       "opponent_samples": self.family.opponent_samples,
                       "schemes_per_bidder": self.family.sizes()},
            "tolerances": dict(TOLERANCES),
            "properties": [self.results[name].to_dict(sc) for name in CHECKS if name in self.results],
            "best_deviations": [
                {"bidder": i + 1, "deviation": None if d is None else d.to_dict(sc)}
                for i, d in enumerate(self.best_deviations)],
            "metrics": dict(self.metrics),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        lines = [f"scenario   {self.scenario.name}", f"mechanism  {self.mechanism}",
                 f"family     k={self.family.k} seed={self.family.seed} "
                 f"schemes={self.family.sizes()}", ""]
        width = max(len(n) for n in CHECKS)
        for name in CHECKS:
            if name not in self.results:
                continue
            r = self.results[name]
            margin = "" if not math.isfinite(r.margin) else f"{r.margin + 0.0: .3e}"
            lines.append(f"{name:<{width}}  {r.status:<4}  {margin:>11}  {r.detail}")
        lines.append("")
        for key, val in self.metrics.items():
            lines.append(f"{key:<{width}}  {'' if val is None else f'{val:.12g}'}")
        for w in self.warnings:
            lines.append(f"warning: {w}")
        return "\n".join(lines)


def _assert_chain(results: dict) -> None:
    """Dominant implies ex-post implies Bayesian, on the same family."""
    order = ("dominant-iic", "expost-iic", "bayesian-iic")
    got = [results[k] for k in order if k in results]
    for strong, weak in zip(got, got[1:]):
        if strong.holds and not weak.holds:
            raise AssertionError(f"{strong.name} passed but {weak.name} failed: {weak.detail}")


def verify_all(scenario: Scenario, mechanism: ReticentMechanism, family: DeviationFamily | None = None,
               checks=None, k: int = 64, seed: int = 0) -> VerificationReport:
    _same(scenario, mechanism)
    family = family or DeviationFamily.build(scenario, k=k, seed=seed)
    checks = tuple(CHECKS if checks is None else checks)
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}; known: {', '.join(CHECKS)}")
    results: dict = {}
    if {"expost-iic", "bayesian-iic"} & set(checks):
        results["expost-iic"], results["bayesian-iic"] = _truthful_scan(mechanism, family)
    if {"dominant-iic", "fd"} & set(checks):
        results["dominant-iic"], results["fd"] = _dominant_scan(mechanism, family)
    if "expost-ir" in checks:
        results["expost-ir"] = check_ir(scenario, mechanism, "ex-post")
    if "interim-ir" in checks:
        results["interim-ir"] = check_ir(scenario, mechanism, "interim")
    if "convex-utility" in checks:
        results["convex-utility"] = check_convex_utility(scenario, mechanism.base, seed=seed,
                                                         regulated=mechanism.regulated)
    if "monotone-allocation" in checks:
        results["monotone-allocation"] = check_monotone_allocation(scenario, mechanism.base, family)
    wm = welfare_metrics(scenario, mechanism)
    revenue = revenue_metrics(scenario, mechanism)
    try:
        max_revenue = bruteforce_optimal_revenue(scenario)
    except OracleSizeError:
        max_revenue = None
    if "welfare-optimal" in checks:
        gap = wm["welfare"] - wm["max_welfare"]
        text = f"welfare {wm['welfare']:.12g} vs max {wm['max_welfare']:.12g}"
        if mechanism.base.name == "vickrey":
            results["welfare-optimal"] = CheckResult("welfare-optimal", gap >= -WELFARE_TOL, gap, text)
        else:
            results["welfare-optimal"] = CheckResult(
                "welfare-optimal", None, gap, f"{text} (claimed only for second-price bases)")
    # only keep what was asked for, but the chain is asserted on everything computed
    _assert_chain(results)
    results = {name: results[name] for name in CHECKS if name in checks and name in results}
    # CheckResult is falsy on FAIL, so pick by key rather than with `or`
    source = next((results[c] for c in ("dominant-iic", "expost-iic", "fd") if c in results), None)
    best = source.per_bidder if source is not None else ()
    metrics = {"welfare": wm["welfare"], "max_welfare": wm["max_welfare"],
               "revenue": revenue, "max_revenue": max_revenue}
    notices = tuple(mechanism.warnings)
    if not scenario.kernel.private_value:
        notices += ("values are not private: welfare and revenue guarantees assume private values",)
    return VerificationReport(scenario, mechanism.name, family, results, metrics, notices, best)
