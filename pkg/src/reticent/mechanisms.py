"""Classic (misreport-only) single-item mechanisms.

Every classic mechanism is a rule over a :class:`ValueContext`: a batch of
``m`` value environments, each giving every bidder's value at each of its
types plus the type masses.  Rules return ``(x, p)`` arrays of shape ``(m, n)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import Scenario, TypePrior, ValueKernel

log = logging.getLogger(__name__)

# values closer than this (relative) are treated as ties / merged levels
TIE_TOL = 1e-12
# virtual values at or below this count as non-positive
POS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Outcome:
    x: np.ndarray
    p: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if np.any(x < -1e-12) or x.sum() > 1 + 1e-12:
            raise ValueError(f"infeasible allocation {x}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def winner(self) -> int | None:
        """Index of the bidder holding the item with certainty, if any."""
        hits = np.flatnonzero(np.isclose(self.x, 1.0, atol=1e-12))
        return int(hits[0]) if hits.size else None

    @property
    def revenue(self) -> float:
        return float(self.p.sum())


@dataclass
class ValueContext:
    """Value environments handed to a classic mechanism.

    ``levels[i]`` is ``(m, |T_i|)``: bidder ``i``'s value at every type, per row.
    ``bids[i]`` selects the reported type.
    """

    levels: list
    probs: tuple
    bids: tuple
    cache: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.stack([lv[:, b] for lv, b in zip(self.levels, self.bids)], axis=1)

    @property
    def rows(self) -> int:
        return self.levels[0].shape[0]


@dataclass(frozen=True)
class ClassicMechanism:
    name: str
    rule: Callable[[ValueContext], tuple]
    convex_utility: bool = False
    monotone_allocation: bool = False

    def __call__(self, ctx: ValueContext):
        return self.rule(ctx)

    def single(self, levels, probs, bids) -> Outcome:
        """Run on one environment given per-bidder value vectors over types."""
        ctx = ValueContext([np.asarray(lv, dtype=float)[None, :] for lv in levels],
                           tuple(probs), tuple(bids))
        x, p = self.rule(ctx)
        return Outcome(x[0], p[0])


def _first_max(values: np.ndarray) -> np.ndarray:
    top = values.max(axis=1, keepdims=True)
    tol = TIE_TOL * np.maximum(1.0, np.abs(top))
    return np.argmax(values >= top - tol, axis=1)


def vickrey_batch(values: np.ndarray):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    m, n = values.shape
    rows = np.arange(m)
    win = _first_max(values)
    x = np.zeros((m, n))
    x[rows, win] = 1.0
    p = np.zeros((m, n))
    if n > 1:
        others = values.copy()
        others[rows, win] = -np.inf
        p[rows, win] = others.max(axis=1)
    return x, p


def vickrey(values) -> Outcome:
    """Second-price auction; ties go to the lowest index."""
    x, p = vickrey_batch(np.asarray(values, dtype=float)[None, :])
    return Outcome(x[0], p[0])


def _levels(values: np.ndarray, probs: np.ndarray):
    """Merge equal values: returns (levels ascending, masses, type -> level index)."""
    order = np.argsort(values, kind="stable")
    levels, masses = [], []
    group = np.empty(values.size, dtype=int)
    for t in order:
        v = values[t]
        if levels and abs(v - levels[-1]) <= TIE_TOL * max(1.0, abs(v)):
            masses[-1] += probs[t]
        else:
            levels.append(v)
            masses.append(probs[t])
        group[t] = len(levels) - 1
    return np.array(levels), np.array(masses), group


def virtual_values(values, probs) -> np.ndarray:
    """Discrete virtual values per type, with equal values merged first.

    For ascending levels ``v_1 < ... < v_m`` with masses ``h_k``:
    ``phi_k = v_k - (v_{k+1} - v_k) * P(value > v_k) / h_k`` and ``phi_m = v_m``.
    """
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    lev, mass, group = _levels(values, probs)
    if lev.size < values.size:
        log.debug("merged %d equal value levels", values.size - lev.size)
    tail = np.concatenate([np.cumsum(mass[::-1])[::-1][1:], [0.0]])
    phi = lev.copy()
    phi[:-1] = lev[:-1] - (lev[1:] - lev[:-1]) * tail[:-1] / mass[:-1]
    return phi[group]


def iron_values(values, probs, phi) -> np.ndarray:
    """Ironed virtual values: slopes of the concave hull of the revenue curve.

    The curve walks value levels from the top down, stepping ``h`` in quantile
    and ``h * phi`` in revenue.  Already monotone input comes back unchanged.
    """
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    phi = np.asarray(phi, dtype=float)
    lev, mass, group = _levels(values, probs)
    lphi = np.empty(lev.size)
    for k in range(lev.size):
        lphi[k] = phi[group == k][0]
    if np.all(np.diff(lphi) >= 0):
        return phi.copy()
    # points in quantile order (highest level first)
    hi = np.arange(lev.size)[::-1]
    xs = np.concatenate([[0.0], np.cumsum(mass[hi])])
    ys = np.concatenate([[0.0], np.cumsum(mass[hi] * lphi[hi])])
    hull = [0]
    for j in range(1, xs.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or below the chord a -> j
            cross = (xs[b] - xs[a]) * (ys[j] - ys[a]) - (ys[b] - ys[a]) * (xs[j] - xs[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(j)
    ironed_hi = np.empty(lev.size)
    for a, b in zip(hull[:-1], hull[1:]):
        if b - a == 1:
            ironed_hi[a] = lphi[hi[a]]
        else:
            ironed_hi[a:b] = (ys[b] - ys[a]) / (xs[b] - xs[a])
    out = np.empty(lev.size)
    out[hi] = ironed_hi
    return out[group]


@dataclass(frozen=True, eq=False)
class VirtualValueColumn:
    bidder: int
    profile: tuple
    values: np.ndarray
    probs: np.ndarray
    phi: np.ndarray
    ironed: np.ndarray  # per type: True where ironing changed the entry

    @property
    def monotone(self) -> bool:
        order = np.argsort(self.values, kind="stable")
        return bool(np.all(np.diff(self.phi[order]) >= -TIE_TOL))


def discrete_virtual_values(type_prior: TypePrior, kernel: ValueKernel, bidder: int,
                            profile) -> VirtualValueColumn:
    vals = kernel.tables[bidder][(slice(None),) + tuple(profile)]
    h = type_prior.probs[bidder]
    phi = virtual_values(vals, h)
    return VirtualValueColumn(bidder, tuple(profile), vals.copy(), h, phi,
                              np.zeros(vals.size, dtype=bool))


def iron(column: VirtualValueColumn, type_prior: TypePrior | None = None) -> VirtualValueColumn:
    h = column.probs if type_prior is None else type_prior.probs[column.bidder]
    out = iron_values(column.values, h, column.phi)
    return VirtualValueColumn(column.bidder, column.profile, column.values, h, out,
                              column.ironed | (out != column.phi))


def myerson_batch(phi: np.ndarray):
    """Allocate to the highest positive virtual value and charge it."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    m, n = phi.shape
    rows = np.arange(m)
    masked = np.where(phi > POS_TOL, phi, -np.inf)
    any_pos = np.isfinite(masked).any(axis=1)
    win = _first_max(np.where(np.isfinite(masked), masked, -1e300))
    x = np.zeros((m, n))
    p = np.zeros((m, n))
    r = rows[any_pos]
    w = win[any_pos]
    x[r, w] = 1.0
    p[r, w] = phi[r, w]
    return x, p


def myerson(values, virtual_values) -> Outcome:
    """One Myerson step: winner pays its own virtual value.

    ``values`` is carried for interface symmetry; the rule reads only
    ``virtual_values``.
    """
    if len(values) != len(virtual_values):
        raise ValueError("values and virtual values must align per bidder")
    x, p = myerson_batch(np.asarray(virtual_values, dtype=float)[None, :])
    return Outcome(x[0], p[0])


def phi_matrix(levels: np.ndarray, probs: np.ndarray, ironed: bool = True) -> np.ndarray:
    """Row-wise virtual values for an ``(m, |T|)`` block of value levels."""
    out = np.empty_like(levels)
    memo: dict = {}
    for r in range(levels.shape[0]):
        key = levels[r].tobytes()
        got = memo.get(key)
        if got is None:
            got = virtual_values(levels[r], probs)
            if ironed:
                got = iron_values(levels[r], probs, got)
            memo[key] = got
        out[r] = got
    return out


def _vickrey_rule(ctx: ValueContext):
    return vickrey_batch(ctx.values)


def _myerson_rule(ironed: bool):
    def rule(ctx: ValueContext):
        key = ("phi", ironed)
        table = ctx.cache.get(key)
        if table is None:
            table = [phi_matrix(lv, h, ironed) for lv, h in zip(ctx.levels, ctx.probs)]
            ctx.cache[key] = table
        phi = np.stack([t[:, b] for t, b in zip(table, ctx.bids)], axis=1)
        return myerson_batch(phi)
    return rule


VICKREY = ClassicMechanism("vickrey", _vickrey_rule, convex_utility=True, monotone_allocation=True)
MYERSON = ClassicMechanism("myerson", _myerson_rule(True), convex_utility=False,
                           monotone_allocation=True)
MYERSON_UNIRONED = ClassicMechanism("myerson-unironed", _myerson_rule(False))

BASES = {m.name: m for m in (VICKREY, MYERSON, MYERSON_UNIRONED)}


@dataclass(frozen=True, eq=False)
class VirtualValueTable:
    """``values[i]``, ``phi[i]``, ``phi_ironed[i]`` have shape ``(|T_i|, *sizes)``."""

    values: tuple
    phi: tuple
    phi_ironed: tuple

    def rows(self, scenario: Scenario):
        """Yield flat records (bidder, type, profile, value, phi, phi_ironed)."""
        for i in range(len(self.values)):
            sup = scenario.types.supports[i]
            for t in range(len(sup)):
                for prof in scenario.space.profiles():
                    idx = (t,) + prof
                    yield (i, sup[t], prof, float(self.values[i][idx]),
                           float(self.phi[i][idx]), float(self.phi_ironed[i][idx]))


def virtual_value_table(scenario: Scenario) -> VirtualValueTable:
    vals, phis, ironeds = [], [], []
    for i in range(scenario.n_bidders):
        tab = scenario.kernel.tables[i]
        flat = tab.reshape(tab.shape[0], -1).T  # (|Theta|, |T|)
        h = scenario.types.probs[i]
        raw = phi_matrix(flat, h, ironed=False)
        ir = np.array([iron_values(flat[r], h, raw[r]) for r in range(flat.shape[0])])
        vals.append(tab)
        phis.append(raw.T.reshape(tab.shape))
        ironeds.append(ir.T.reshape(tab.shape))
    return VirtualValueTable(tuple(vals), tuple(phis), tuple(ironeds))


@dataclass(frozen=True)
class Verdict:
    holds: bool
    detail: str = ""
    witness: tuple | None = None

    def __bool__(self):
        return self.holds


def strong_regularity_check(table: VirtualValueTable, ironed: bool = True) -> Verdict:
    """Virtual value must be non-decreasing in value across all (type, profile) pairs.

    Entries with equal value are not compared with each other.
    """
    phis = table.phi_ironed if ironed else table.phi
    for i, (v, phi) in enumerate(zip(table.values, phis)):
        vf, pf = v.reshape(-1), phi.reshape(-1)
        order = np.argsort(vf, kind="stable")
        vs, ps = vf[order], pf[order]
        # compare each value level against the max phi of strictly lower levels
        best_lower = -np.inf
        best_idx = None
        k = 0
        while k < vs.size:
            j = k
            while j + 1 < vs.size and vs[j + 1] - vs[k] <= TIE_TOL * max(1.0, abs(vs[k])):
                j += 1
            lo = k + int(np.argmin(ps[k:j + 1]))
            if best_idx is not None and ps[lo] < best_lower - 1e-12:
                a = np.unravel_index(order[best_idx], v.shape)
                b = np.unravel_index(order[lo], v.shape)
                return Verdict(False, f"bidder {i}: value {vs[best_idx]:.6g} -> phi {best_lower:.6g} "
                                      f"but value {vs[lo]:.6g} -> phi {ps[lo]:.6g}",
                               (i, tuple(map(int, a)), tuple(map(int, b))))
            hi = k + int(np.argmax(ps[k:j + 1]))
            if ps[hi] > best_lower:
                best_lower, best_idx = ps[hi], hi
            k = j + 1
    return Verdict(True)


def state_outcomes(mechanism: ClassicMechanism, kernel: ValueKernel, types: TypePrior,
                   bids, cache: dict | None = None):
    """Run ``mechanism`` at every full profile for one bid profile: (|Theta|, n) x and p."""
    levels = [kernel.flat(i).T for i in range(kernel.n_bidders)]
    ctx = ValueContext(levels, types.probs, tuple(bids), {} if cache is None else cache)
    return mechanism(ctx)


def indicative_states_check(mechanism: ClassicMechanism, scenario: Scenario) -> Verdict:
    """Allocation at every full profile must not depend on the residual state."""
    sizes = scenario.space.sizes
    if sizes[0] == 1:
        return Verdict(True, "single residual state")
    cache: dict = {}
    for bids, _ in scenario.types.profiles():
        x, _p = state_outcomes(mechanism, scenario.kernel, scenario.types, bids, cache)
        x = x.reshape(sizes + (scenario.n_bidders,))
        gap = np.abs(x - x[:1]).max(axis=0)
        if gap.max() > 1e-12:
            loc = np.unravel_index(int(np.argmax(gap)), gap.shape)
            return Verdict(False, f"bids {bids}: allocation of bidder {loc[-1]} at states "
                                  f"{loc[:-1]} varies with the residual state",
                           (tuple(bids), tuple(int(a) for a in loc[:-1]), int(loc[-1])))
    return Verdict(True)
