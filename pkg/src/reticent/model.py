"""Discrete probability substrate for auctions with reticent bidders.

Coordinates of an information profile are numbered ``0..n``: coordinate 0
is the residual state nobody observes, coordinate ``i`` (``1 <= i <= n``)
belongs to bidder ``i - 1`` in 0-based Python indexing.  All arrays over
profiles have the shape ``space.sizes``; "flat" arrays use C order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-9
AGG_TOL = 1e-8


class InconsistentSignals(ValueError):
    """Raised when a signal profile has zero probability under the prior."""


@dataclass(frozen=True)
class StateSpace:
    sizes: tuple[int, ...]
    labels: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) < 2:
            raise ValueError("state space needs the residual coordinate and at least one bidder")
        if any(s < 1 for s in sizes):
            raise ValueError(f"coordinate sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "sizes", sizes)
        if not self.labels:
            labels = tuple(tuple(str(k) for k in range(s)) for s in sizes)
        else:
            labels = tuple(tuple(str(x) for x in lab) for lab in self.labels)
            if len(labels) != len(sizes) or any(len(l) != s for l, s in zip(labels, sizes)):
                raise ValueError("state labels do not match coordinate sizes")
        object.__setattr__(self, "labels", labels)

    @property
    def n_bidders(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_profiles(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def coords(self) -> np.ndarray:
        """(n + 1, |Theta|) array: state index of every coordinate per flat profile."""
        return np.indices(self.sizes).reshape(len(self.sizes), -1)

    def profiles(self):
        return itertools.product(*(range(s) for s in self.sizes))

    def bidder_axis(self, bidder: int) -> int:
        if not 0 <= bidder < self.n_bidders:
            raise IndexError(f"bidder {bidder} out of range for {self.n_bidders} bidders")
        return bidder + 1

    def with_extra_coordinate(self) -> "StateSpace":
        """Append a degenerate (size 1) bidder coordinate."""
        return StateSpace(self.sizes + (1,), self.labels + (("*",),))


@dataclass(frozen=True, eq=False)
class JointPrior:
    """Joint distribution over full information profiles."""

    space: StateSpace
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != self.space.sizes:
            raise ValueError(f"prior shape {probs.shape} != state space {self.space.sizes}")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0):
            raise ValueError("prior entries must be finite and nonnegative")
        total = probs.sum()
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"prior sums to {total!r}, expected 1")
        g0 = probs.sum(axis=tuple(range(1, probs.ndim)))
        rest = probs.sum(axis=0)
        gap = np.max(np.abs(probs - np.multiply.outer(g0, rest)))
        if gap > PROB_TOL:
            raise ValueError(
                f"residual state is not independent of bidder states (max gap {gap:.3g})")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)


@dataclass(frozen=True, eq=False)
class TypePrior:
    """Per-bidder type supports and masses; types are independent of states."""

    supports: tuple[tuple[str, ...], ...]
    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.supports) != len(self.probs):
            raise ValueError("one support and one mass vector per bidder")
        cleaned = []
        for i, (sup, h) in enumerate(zip(self.supports, self.probs)):
            h = np.asarray(h, dtype=float)
            if h.shape != (len(sup),) or len(sup) == 0:
                raise ValueError(f"bidder {i}: type support and masses disagree")
            if np.any(h <= 0) or abs(h.sum() - 1.0) > PROB_TOL:
                raise ValueError(f"bidder {i}: type masses must be positive and sum to 1")
            h = h.copy()
            h.flags.writeable = False
            cleaned.append(h)
        object.__setattr__(self, "supports", tuple(tuple(str(t) for t in s) for s in self.supports))
        object.__setattr__(self, "probs", tuple(cleaned))

    @property
    def n_bidders(self) -> int:
        return len(self.supports)

    def cdf(self, bidder: int) -> np.ndarray:
        return np.cumsum(self.probs[bidder])

    def index(self, bidder: int, label) -> int:
        try:
            return self.supports[bidder].index(str(label))
        except ValueError:
            raise KeyError(f"bidder {bidder} has no type {label!r}") from None

    def profiles(self):
        """Yield (type index profile, probability) for all type profiles."""
        for prof in itertools.product(*(range(len(s)) for s in self.supports)):
            yield prof, float(np.prod([h[t] for h, t in zip(self.probs, prof)]))


@dataclass(frozen=True, eq=False)
class ValueKernel:
    """Per-bidder value tables ``tables[i][t, *profile]``.

    ``separable[i]`` is ``(base, cvr)`` with ``base`` over the bidder's types and
    ``cvr`` over the bidder's own states, or ``None``.
    """

    tables: tuple[np.ndarray, ...]
    private_value: bool = False
    separable: tuple | None = None

    def __post_init__(self):
        tables = []
        for i, tab in enumerate(self.tables):
            tab = np.asarray(tab, dtype=float)
            if np.any(~np.isfinite(tab)) or np.any(tab < 0):
                raise ValueError(f"bidder {i}: values must be finite and nonnegative")
            tab = tab.copy()
            tab.flags.writeable = False
            tables.append(tab)
        object.__setattr__(self, "tables", tuple(tables))
        if self.private_value:
            for i, tab in enumerate(tables):
                own = i + 2  # type axis comes first
                for ax in range(2, tab.ndim):
                    if ax == own:
                        continue
                    ref = np.take(tab, [0], axis=ax)
                    if np.max(np.abs(tab - ref), initial=0.0) > 0:
                        raise ValueError(
                            f"bidder {i}: private-value kernel depends on coordinate {ax - 1}")
        if self.separable is not None:
            for i, fac in enumerate(self.separable):
                if fac is None:
                    continue
                base, cvr = (np.asarray(a, dtype=float) for a in fac)
                tab = tables[i]
                shape = [1] * tab.ndim
                shape[0] = base.size
                own = [1] * tab.ndim
                own[i + 2] = cvr.size
                prod = base.reshape(shape) * cvr.reshape(own)
                if np.max(np.abs(tab - prod)) > PROB_TOL:
                    raise ValueError(f"bidder {i}: table does not match its separable factors")

    @property
    def n_bidders(self) -> int:
        return len(self.tables)

    def flat(self, bidder: int) -> np.ndarray:
        """(|T_i|, |Theta|) view of one bidder's table."""
        tab = self.tables[bidder]
        return tab.reshape(tab.shape[0], -1)


def _normalized(vec, what: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or np.any(vec < -PROB_TOL) or abs(vec.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"{what} must be a probability vector, got {vec}")
    return np.clip(vec, 0.0, None)


@dataclass(frozen=True, eq=False)
class SignalingScheme:
    """A committed partial-revelation policy in posterior form.

    ``posteriors[k]`` is the belief over the bidder's own states induced by
    signal ``k``; ``weights[k]`` is the probability that signal is sent.
    """

    bidder: int
    weights: np.ndarray
    posteriors: np.ndarray
    name: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        post = np.atleast_2d(np.asarray(self.posteriors, dtype=float))
        if post.shape[0] != w.size:
            raise ValueError("one posterior per weight")
        keep = w > 0
        w, post = w[keep].copy(), post[keep].copy()
        w.flags.writeable = False
        post.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "posteriors", post)

    def __len__(self):
        return self.weights.size

    def signals(self):
        return list(self.posteriors)

    def signature(self, digits: int = 12) -> tuple:
        rows = sorted(
            (round(float(w), digits),) + tuple(np.round(p, digits).tolist())
            for w, p in zip(self.weights, self.posteriors))
        return tuple(rows)


@dataclass(frozen=True)
class SchemeVerdict:
    valid: bool
    violation: float
    reason: str = ""

    def __bool__(self):
        return self.valid


@dataclass(frozen=True, eq=False)
class PosteriorOverProfiles:
    probs: np.ndarray
    signals: tuple = ()

    @property
    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything that is common knowledge before bidders commit."""

    space: StateSpace
    prior: JointPrior
    types: TypePrior
    kernel: ValueKernel
    name: str = ""
    description: str = ""
    schemes: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.space.n_bidders
        if self.types.n_bidders != n or self.kernel.n_bidders != n:
            raise ValueError("state space, type prior and kernel disagree on bidder count")
        for i, tab in enumerate(self.kernel.tables):
            want = (len(self.types.supports[i]),) + self.space.sizes
            if tab.shape != want:
                raise ValueError(f"bidder {i}: value table shape {tab.shape} != {want}")

    @property
    def n_bidders(self) -> int:
        return self.space.n_bidders

    def marginal(self, coordinate: int) -> np.ndarray:
        return marginal(self.prior, coordinate)


def marginal(prior: JointPrior, coordinate: int) -> np.ndarray:
    """Marginal distribution of one coordinate (0 = residual state)."""
    nd = prior.probs.ndim
    if not 0 <= coordinate < nd:
        raise IndexError(f"coordinate {coordinate} out of range 0..{nd - 1}")
    axes = tuple(a for a in range(nd) if a != coordinate)
    return prior.probs.sum(axis=axes)


def validate_scheme(scheme: SignalingScheme, prior: JointPrior) -> SchemeVerdict:
    space = prior.space
    if not 0 <= scheme.bidder < space.n_bidders:
        return SchemeVerdict(False, float("inf"), "bidder out of range")
    g_i = marginal(prior, scheme.bidder + 1)
    post = scheme.posteriors
    if post.shape[1] != g_i.size:
        return SchemeVerdict(False, float("inf"), "posterior length != number of states")
    worst = 0.0
    reason = ""
    w = scheme.weights
    if w.size == 0:
        return SchemeVerdict(False, float("inf"), "empty scheme")
    neg = max(0.0, -float(post.min()), -float(w.min()))
    if neg > worst:
        worst, reason = neg, "negative entry"
    row_gap = float(np.max(np.abs(post.sum(axis=1) - 1.0)))
    if row_gap > worst:
        worst, reason = row_gap, "posterior does not sum to 1"
    w_gap = abs(float(w.sum()) - 1.0)
    if w_gap > worst:
        worst, reason = w_gap, "weights do not sum to 1"
    bp_gap = float(np.max(np.abs(w @ post - g_i)))
    if bp_gap > worst:
        worst, reason = bp_gap, "average posterior differs from prior marginal"
    return SchemeVerdict(worst <= PROB_TOL, worst, reason if worst > PROB_TOL else "")


def _likelihood_ratios(prior: JointPrior, signals) -> np.ndarray:
    """Flat array of prod_i s_i(theta_i) / g_i(theta_i)."""
    space = prior.space
    coords = space.coords
    ratio = np.ones(space.n_profiles)
    for i, s in enumerate(signals):
        s = np.asarray(s, dtype=float)
        g_i = marginal(prior, i + 1)
        if s.shape != g_i.shape:
            raise ValueError(f"signal for bidder {i} has {s.size} entries, expected {g_i.size}")
        if np.any((s > 0) & (g_i <= 0)):
            raise ValueError(f"signal for bidder {i} puts mass on a zero-probability state")
        r = np.divide(s, g_i, out=np.zeros_like(s), where=g_i > 0)
        ratio *= r[coords[i + 1]]
    return ratio


def joint_posterior(prior: JointPrior, profile) -> PosteriorOverProfiles:
    """Bayes update of the joint prior on one signal per bidder."""
    if len(profile) != prior.space.n_bidders:
        raise ValueError("need exactly one signal per bidder")
    w = prior.flat * _likelihood_ratios(prior, profile)
    total = w.sum()
    if not total > 0:
        raise InconsistentSignals("signal profile has zero probability under the prior")
    return PosteriorOverProfiles((w / total).reshape(prior.space.sizes),
                                 tuple(np.asarray(s, dtype=float) for s in profile))


def product_posterior(prior: JointPrior, profile) -> PosteriorOverProfiles:
    """Belief that uses each bidder's own signal only: g0 x s_1 x ... x s_n."""
    if len(profile) != prior.space.n_bidders:
        raise ValueError("need exactly one signal per bidder")
    out = marginal(prior, 0)
    for s in profile:
        out = np.multiply.outer(out, np.asarray(s, dtype=float))
    return PosteriorOverProfiles(out, tuple(np.asarray(s, dtype=float) for s in profile))


def signal_profile_probability(prior: JointPrior, schemes, profile) -> float:
    if len(schemes) != len(profile):
        raise ValueError("one scheme and one signal per bidder")
    lam = 1.0
    for sch, s in zip(schemes, profile):
        s = np.asarray(s, dtype=float)
        hits = np.flatnonzero(np.all(np.abs(sch.posteriors - s) <= 1e-12, axis=1))
        if hits.size == 0:
            raise KeyError(f"signal {s} is not in bidder {sch.bidder}'s scheme")
        lam *= float(sch.weights[hits].sum())
    return lam * float(prior.flat @ _likelihood_ratios(prior, profile))


def expected_value(kernel: ValueKernel, bids, posterior: PosteriorOverProfiles) -> np.ndarray:
    """Posterior-expected value of every bidder at the given bid profile."""
    q = posterior.flat
    return np.array([kernel.flat(i)[b] @ q for i, b in enumerate(bids)])


def expected_value_given_state(kernel: ValueKernel, bidder: int, type_index: int,
                               state: int, prior: JointPrior) -> float:
    return float(own_state_values(kernel, prior, bidder)[type_index, state])


def own_state_values(kernel: ValueKernel, prior: JointPrior, bidder: int) -> np.ndarray:
    """(|T_i|, |Theta_i|) table of values expected over everything except own state."""
    tab = kernel.tables[bidder]
    ax = bidder + 2
    g0 = marginal(prior, 0)
    if kernel.private_value:
        # constant in opponents' states: read them at index 0
        idx = [slice(None)] * tab.ndim
        for a in range(2, tab.ndim):
            if a != ax:
                idx[a] = 0
        sub = tab[tuple(idx)]  # (T, Theta0, Theta_i)
        return np.einsum("k,tks->ts", g0, sub)
    g = prior.probs
    g_i = marginal(prior, bidder + 1)
    other = tuple(a for a in range(1, tab.ndim) if a != ax)
    num = (tab * g[None]).sum(axis=other)
    out = np.divide(num, g_i[None, :], out=np.zeros_like(num), where=g_i[None, :] > 0)
    if np.any(g_i <= 0):
        idx = [slice(None)] * tab.ndim
        for a in range(2, tab.ndim):
            if a != ax:
                idx[a] = 0
        fallback = np.einsum("k,tks->ts", g0, tab[tuple(idx)])
        out[:, g_i <= 0] = fallback[:, g_i <= 0]
    return out


def regulated_kernel(kernel: ValueKernel, prior: JointPrior) -> ValueKernel:
    """Average each bidder's values over opponents' states given the own state.

    The residual coordinate is kept, so private-value kernels come back unchanged.
    """
    if kernel.private_value:
        return kernel
    g = prior.probs
    nd = g.ndim
    tables = []
    for i, tab in enumerate(kernel.tables):
        opp = tuple(a for a in range(1, nd) if a not in (i + 1,))
        # g(theta_-i | theta_i); theta_0 is independent so drop it from the weights
        g_rest = g.sum(axis=0, keepdims=True)
        g_i = g_rest.sum(axis=opp, keepdims=True)
        cond = np.divide(g_rest, g_i, out=np.zeros_like(g_rest), where=g_i > 0)
        avg = (tab * cond[None]).sum(axis=tuple(a + 1 for a in opp), keepdims=True)
        # states with zero own mass: fall back to the first opponent slice
        empty = (g_i[None] <= 0)
        if np.any(empty):
            first = tab[(slice(None),) + tuple(slice(0, 1) if a in opp else slice(None)
                                                for a in range(nd))]
            avg = np.where(empty, first, avg)
        tables.append(np.broadcast_to(avg, tab.shape).copy())
    return ValueKernel(tuple(tables), private_value=True, separable=None)


def scheme_from_kernel(bidder: int, likelihood, prior: JointPrior, name: str = "") -> SignalingScheme:
    """Convert ``likelihood[state, signal] = Pr(signal | state)`` into posterior form."""
    lik = np.asarray(likelihood, dtype=float)
    g_i = marginal(prior, bidder + 1)
    if lik.ndim != 2 or lik.shape[0] != g_i.size:
        raise ValueError("likelihood must be a (states, signals) matrix")
    if np.any(lik < 0) or np.max(np.abs(lik.sum(axis=1) - 1.0)) > PROB_TOL:
        raise ValueError("each likelihood row must be a distribution over signals")
    joint = g_i[:, None] * lik
    weights = joint.sum(axis=0)
    keep = weights > 0
    post = (joint[:, keep] / weights[keep]).T
    return SignalingScheme(bidder, weights[keep], post, name)


def make_scheme(kind: str, bidder: int, prior: JointPrior, *, partition=None,
                seed: int | None = None, count: int = 2, max_tries: int = 1000) -> SignalingScheme:
    """Build a Bayes-plausible scheme.

    ``kind`` is one of ``full_revelation``, ``no_information``, ``pooling``
    (``partition`` lists cells of state indices) or ``random`` (``seed``, ``count``).
    """
    g_i = marginal(prior, prior.space.bidder_axis(bidder))
    m = g_i.size
    if kind == "full_revelation":
        support = np.flatnonzero(g_i > 0)
        return SignalingScheme(bidder, g_i[support], np.eye(m)[support], "full")
    if kind == "no_information":
        return SignalingScheme(bidder, [1.0], g_i[None, :], "none")
    if kind == "pooling":
        if partition is None:
            raise ValueError("pooling needs a partition")
        cells = [sorted(int(s) for s in cell) for cell in partition]
        flat = sorted(s for c in cells for s in c)
        if any(len(c) == 0 for c in cells):
            raise ValueError("empty partition cell")
        if flat != list(range(m)):
            raise ValueError(f"partition must cover states 0..{m - 1} exactly once")
        weights, posts = [], []
        for cell in cells:
            mass = g_i[cell].sum()
            if mass <= 0:
                continue
            post = np.zeros(m)
            post[cell] = g_i[cell] / mass
            weights.append(mass)
            posts.append(post)
        label = "|".join(",".join(map(str, c)) for c in cells)
        return SignalingScheme(bidder, weights, posts, f"pool:{label}")
    if kind == "random":
        if count < 1:
            raise ValueError("signal count must be >= 1")
        if count == 1:
            return SignalingScheme(bidder, [1.0], g_i[None, :], f"random:{seed}:1")
        rng = np.random.default_rng(seed)
        support = g_i > 0
        for attempt in range(max_tries):
            shrink = 0.9 ** (attempt // 10)
            w = rng.dirichlet(np.ones(count))
            posts = np.zeros((count, m))
            for k in range(count - 1):
                d = np.zeros(m)
                d[support] = rng.dirichlet(np.ones(support.sum()))
                posts[k] = g_i + shrink * rng.uniform() * (d - g_i)
            last = (g_i - w[:-1] @ posts[:-1]) / w[-1]
            if last.min() < -1e-15:
                continue
            last = np.clip(last, 0.0, None)
            posts[-1] = last
            return SignalingScheme(bidder, w, posts, f"random:{seed}:{count}")
        raise RuntimeError(f"random scheme construction failed after {max_tries} draws (seed {seed})")
    raise ValueError(f"unknown scheme kind {kind!r}")
