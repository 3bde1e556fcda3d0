"""Transforms from classic mechanisms to mechanisms for reticent bidders.

A :class:`ReticentMechanism` only ever sees a bid profile and a posterior
over full information profiles.  Turning raw signals into that posterior is
the auctioneer's inference step, :func:`auctioneer_posterior`, which lives
outside the mechanism.
"""
from __future__ import annotations

import re

import numpy as np

from . import mechanisms as mech
from .mechanisms import ClassicMechanism, Outcome, ValueContext
from .model import (PosteriorOverProfiles, Scenario, joint_posterior, product_posterior,
                    regulated_kernel)

KINDS = ("expected", "simulated")


class ReticentMechanism:
    """A classic mechanism lifted by the expected or simulated transform."""

    def __init__(self, base: ClassicMechanism, scenario: Scenario, kind: str,
                 regulated: bool = False):
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.base = base
        self.kind = kind
        self.regulated = regulated
        self.scenario = scenario
        self.kernel = regulated_kernel(scenario.kernel, scenario.prior) if regulated else scenario.kernel
        self.probs = scenario.types.probs
        self._V = [self.kernel.flat(i) for i in range(scenario.n_bidders)]
        self._state_cache: dict = {}
        self._state_ctx_cache: dict = {}
        self.warnings = self._precondition_warnings()

    @property
    def name(self) -> str:
        core = f"{self.kind}-{self.base.name}"
        return f"regulated({core})" if self.regulated else core

    def __repr__(self):
        return f"ReticentMechanism({self.name})"

    def _precondition_warnings(self) -> tuple[str, ...]:
        if self.kind != "simulated" or not self.base.name.startswith("myerson"):
            return ()
        sc = self.scenario
        if self.regulated:
            sc = Scenario(sc.space, sc.prior, sc.types, self.kernel, sc.name)
        out = []
        table = mech.virtual_value_table(sc)
        reg = mech.strong_regularity_check(table, ironed=self.base.name == "myerson")
        if not reg:
            out.append(f"strong regularity fails: {reg.detail}")
        ind = mech.indicative_states_check(self.base, sc)
        if not ind:
            out.append(f"indicative states fail: {ind.detail}")
        return tuple(out)

    # per-profile tables for the simulated transform
    def state_table(self, bids):
        bids = tuple(int(b) for b in bids)
        got = self._state_cache.get(bids)
        if got is None:
            levels = [V.T for V in self._V]
            ctx = ValueContext(levels, self.probs, bids, self._state_ctx_cache)
            got = self.base(ctx)
            self._state_cache[bids] = got
        return got

    def prepare(self, posteriors):
        """Bind a batch of posteriors (rows over flat profiles); returns ``bids -> (x, p)``."""
        P = np.atleast_2d(np.asarray(posteriors, dtype=float))
        if self.kind == "expected":
            levels = [P @ V.T for V in self._V]
            cache: dict = {}

            def run(bids):
                return self.base(ValueContext(levels, self.probs, tuple(bids), cache))
        else:
            def run(bids):
                X, Pay = self.state_table(bids)
                return P @ X, P @ Pay
        return run

    def outcomes(self, bids, posteriors):
        return self.prepare(posteriors)(bids)

    def outcome(self, bids, posterior) -> Outcome:
        q = posterior.flat if isinstance(posterior, PosteriorOverProfiles) else np.ravel(posterior)
        x, p = self.outcomes(bids, q[None, :])
        return Outcome(np.clip(x[0], 0.0, None), p[0], self.warnings)

    def estimated_values(self, bids, posterior) -> np.ndarray:
        """Posterior-expected values this mechanism assigns at ``bids``."""
        q = posterior.flat if isinstance(posterior, PosteriorOverProfiles) else np.ravel(posterior)
        return np.array([V[b] @ q for V, b in zip(self._V, bids)])


def auctioneer_posterior(scenario: Scenario, signals, regulated: bool = False) -> PosteriorOverProfiles:
    """What the auctioneer may infer from a signal profile.

    Unregulated: the joint Bayes posterior.  Regulated: each bidder's own
    signal only, combined as a product with the residual-state prior.
    """
    if regulated:
        return product_posterior(scenario.prior, signals)
    return joint_posterior(scenario.prior, signals)


def expected_meta(base: ClassicMechanism, bids, posterior, scenario: Scenario) -> Outcome:
    return ReticentMechanism(base, scenario, "expected").outcome(bids, posterior)


def simulated_meta(base: ClassicMechanism, bids, posterior, scenario: Scenario) -> Outcome:
    return ReticentMechanism(base, scenario, "simulated").outcome(bids, posterior)


def expected_vickrey(bids, posterior, scenario: Scenario) -> Outcome:
    return expected_meta(mech.VICKREY, bids, posterior, scenario)


def simulated_myerson(bids, posterior, scenario: Scenario) -> Outcome:
    return ReticentMechanism(mech.MYERSON, scenario, "simulated").outcome(bids, posterior)


def regulate(mechanism: ReticentMechanism, scenario: Scenario | None = None) -> ReticentMechanism:
    if mechanism.regulated:
        return mechanism
    return ReticentMechanism(mechanism.base, scenario or mechanism.scenario, mechanism.kind,
                             regulated=True)


_ID = re.compile(r"^(expected|simulated)-([a-z-]+)$")


def by_name(identifier: str, scenario: Scenario, regulated: bool = False) -> ReticentMechanism:
    """Resolve ``expected-vickrey``, ``simulated-myerson``, ``regulated(...)`` and friends."""
    ident = identifier.strip()
    m = re.fullmatch(r"regulated\((.+)\)", ident)
    if m:
        ident, regulated = m.group(1).strip(), True
    m = _ID.match(ident)
    if not m or m.group(2) not in mech.BASES:
        known = ", ".join(f"{k}-{b}" for k in KINDS for b in mech.BASES)
        raise ValueError(f"unknown mechanism {identifier!r}; known: {known}, or regulated(...)")
    return ReticentMechanism(mech.BASES[m.group(2)], scenario, m.group(1), regulated)
