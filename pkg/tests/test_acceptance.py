"""Acceptance gate: one test per criterion, each within its tolerance and time budget.

Every criterion also prints a single ``[PASS]`` / ``[FAIL]`` line, both inline
(visible with ``-s``) and in the terminal summary.
"""
import functools
import itertools
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from reticent import bundled, by_name
from reticent import verify as V
from reticent.mechanisms import MYERSON, VICKREY, iron_values, virtual_values
from reticent.meta import auctioneer_posterior, regulate
from reticent.model import joint_posterior, make_scheme, signal_profile_probability
from reticent.synth import random_private_value, random_separable


def criterion(number: int, title: str, budget: float):
    """Record PASS/FAIL for one criterion; failing the time budget fails it too."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            status, detail = "PASS", ""
            try:
                detail = fn(*args, **kwargs) or ""
                secs = time.perf_counter() - start
                assert secs < budget, f"took {secs:.2f}s, budget {budget}s"
            except BaseException as exc:
                status, detail = "FAIL", str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                raise
            finally:
                secs = time.perf_counter() - start
                ACCEPTANCE_LINES.append((number, title, status, secs, detail))
                print(f"[{status}] criterion {number}: {title} ({secs:.2f}s) {detail}")
        return run
    return wrap


@criterion(1, "forced report vs silence in the three-bidder example", budget=1.0)
def test_criterion_1_forced_report_vs_silence():
    sc = bundled("example1")
    ev = by_name("expected-vickrey", sc)
    forced = V.forced_report_utility(sc, ev, 0)
    silent = V.truthful_profile(sc)
    silent[0] = V.strategy_from_spec(sc, 0, "no-info")
    quiet = V.expected_utility(sc, ev, silent, 0)
    assert abs(forced - 0.0) <= 1e-9, forced
    assert abs(quiet - 0.4) <= 1e-9, quiet
    return f"forced={forced:.12g} silent={quiet:.12g}"


@criterion(2, "revenue under elicitation masks all / none / bidder 3", budget=1.0)
def test_criterion_2_elicitation_masks():
    sc = bundled("example2")
    ev = by_name("expected-vickrey", sc)
    got = [V.revenue_metrics(sc, ev), V.revenue_metrics(sc, ev, []), V.revenue_metrics(sc, ev, [2])]
    for g, want in zip(got, (0.082, 0.1, 0.13)):
        assert abs(g - want) <= 1e-9, (got, want)
    return "revenues " + " / ".join(f"{g:.12g}" for g in got)


@criterion(3, "correlated-state example breaks dominant IIC; regulation restores it", budget=10.0)
def test_criterion_3_regulation_restores_dominant_iic():
    sc = bundled("example3")
    ev = by_name("expected-vickrey", sc)
    quiet = [V.strategy_from_spec(sc, i, "no-info") for i in range(3)]
    reveal = list(quiet)
    reveal[0] = V.strategy_from_spec(sc, 0, "truthful")
    u_none = V.expected_utility(sc, ev, quiet, 0)
    u_full = V.expected_utility(sc, ev, reveal, 0)
    assert abs(u_none - 49.5) <= 1e-9 and abs(u_full - 49.25) <= 1e-9, (u_none, u_full)

    family = V.DeviationFamily.build(sc, k=64, seed=0)
    res = V.check_dominant_iic(sc, ev, family)
    assert res.status == "FAIL"
    wit = res.witness
    # the witness is bidder 1 going silent against silent opponents
    assert wit.bidder == 0 and wit.scheme == "none"
    assert dict(wit.opponent_schemes) == {1: "none", 2: "none"}
    assert abs(wit.gain - 0.25) <= 1e-9
    truthful, deviation = V.replay(sc, ev, family, wit)
    assert abs(truthful - 49.25) <= 1e-9 and abs(deviation - 49.5) <= 1e-9

    reg = regulate(ev)
    ok = V.check_dominant_iic(sc, reg, family)
    assert ok.status == "PASS", ok.detail
    return f"unregulated witness gain {wit.gain:.6g}; regulated margin {ok.margin:.3g}"


@criterion(4, "welfare optimality on 50 random private-value scenarios", budget=120.0)
def test_criterion_4_welfare_optimality():
    worst = 0.0
    for seed in range(50):
        sc = random_private_value(seed, max_bidders=4, max_states=3, max_types=3, max_residual=2)
        ev = by_name("expected-vickrey", sc)
        family = V.DeviationFamily.build(sc, seed=seed)
        wm = V.welfare_metrics(sc, ev)
        err = abs(wm["welfare"] - wm["max_welfare"])
        worst = max(worst, err)
        assert err <= 1e-9, (seed, wm)
        iic = V.check_expost_iic(sc, ev, family)
        assert iic.status == "PASS", (seed, iic.detail)
        ir = V.check_ir(sc, ev)
        assert ir.status == "PASS", (seed, ir.detail)
    return f"max welfare error {worst:.3g}"


@criterion(5, "revenue optimality against the brute-force oracle on 25 scenarios", budget=300.0)
def test_criterion_5_revenue_optimality():
    worst = 0.0
    for seed in range(25):
        sc = random_separable(seed)
        sm = by_name("simulated-myerson", sc)
        assert sm.warnings == (), (seed, sm.warnings)
        rev = V.revenue_metrics(sc, sm)
        best = V.bruteforce_optimal_revenue(sc)
        worst = max(worst, abs(rev - best))
        assert abs(rev - best) <= 1e-8, (seed, rev, best)
    return f"max revenue gap {worst:.3g}"


def _linearity(rng, sc):
    sm = by_name("simulated-myerson", sc)
    n = sc.space.n_profiles
    worst = 0.0
    for _ in range(20):
        q1, q2 = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        a = float(rng.uniform())
        bids = tuple(int(rng.integers(len(s))) for s in sc.types.supports)
        mix = sm.outcome(bids, a * q1 + (1 - a) * q2)
        o1, o2 = sm.outcome(bids, q1), sm.outcome(bids, q2)
        worst = max(worst, np.abs(mix.x - (a * o1.x + (1 - a) * o2.x)).max(),
                    np.abs(mix.p - (a * o1.p + (1 - a) * o2.p)).max())
    return worst


def _total_probability(sc, seed):
    # single-state bidders get one signal: repeated identical posteriors are not distinct signals
    schemes = [make_scheme("random", i, sc.prior, seed=seed * 10 + i, count=3)
               if sc.space.sizes[i + 1] > 1 else make_scheme("no_information", i, sc.prior)
               for i in range(sc.n_bidders)]
    acc = np.zeros(sc.space.n_profiles)
    for combo in itertools.product(*(range(len(s)) for s in schemes)):
        signals = [s.posteriors[k] for s, k in zip(schemes, combo)]
        pr = signal_profile_probability(sc.prior, schemes, signals)
        if pr > 0:
            acc += pr * joint_posterior(sc.prior, signals).flat
    return float(np.abs(acc - sc.prior.flat).max())


def _ironing(rng):
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(2, 7))
        vals = np.sort(rng.uniform(0, 10, k))
        h = rng.dirichlet(np.full(k, 0.5))
        phi = virtual_values(vals, h)
        ironed = iron_values(vals, h, phi)
        assert np.all(np.diff(ironed) >= -1e-9)
        worst = max(worst, abs(h @ ironed - h @ phi))
    return worst


def _regulation_noop(sc, seed):
    """Regulated and unregulated outcomes agree over every core signal profile and bid profile."""
    family = V.DeviationFamily.build(sc, k=4, seed=seed)
    diffs = 0
    for kind in ("expected-vickrey", "simulated-myerson", "expected-myerson"):
        plain = by_name(kind, sc)
        reg = regulate(plain)
        for combo in itertools.product(*(range(len(s)) for s in family.schemes)):
            schemes = [family.schemes[i][k] for i, k in enumerate(combo)]
            for signals in itertools.product(*(s.posteriors for s in schemes)):
                if not signal_profile_probability(sc.prior, schemes, signals) > 0:
                    continue
                post = auctioneer_posterior(sc, signals)
                post_r = auctioneer_posterior(sc, signals, regulated=True)
                for bids in itertools.product(*(range(len(s)) for s in sc.types.supports)):
                    a, b = plain.outcome(bids, post), reg.outcome(bids, post_r)
                    if not (np.allclose(a.x, b.x, rtol=0, atol=1e-12)
                            and np.allclose(a.p, b.p, rtol=0, atol=1e-12)):
                        diffs += 1
    return diffs


@criterion(6, "property suite", budget=300.0)
def test_criterion_6_property_suite():
    rng = np.random.default_rng(6)
    lin = max(_linearity(rng, random_private_value(s, max_bidders=3)) for s in range(10))
    assert lin <= 1e-12, lin

    ltp = max(_total_probability(random_private_value(s, max_bidders=3), s) for s in range(10))
    assert ltp <= 1e-8, ltp

    iron = _ironing(rng)
    assert iron <= 1e-9, iron

    # verify_all raises if a stronger IIC flavor passes while a weaker one fails
    chained = 0
    for seed in range(10):
        sc = random_private_value(200 + seed, max_bidders=3)
        for kind in ("expected-vickrey", "expected-myerson"):
            mech = by_name(kind, sc)
            rep = V.verify_all(sc, mech, k=8, seed=seed,
                               checks=("dominant-iic", "expost-iic", "bayesian-iic"))
            flags = [rep.results[c].holds for c in ("dominant-iic", "expost-iic", "bayesian-iic")]
            assert flags == sorted(flags), (seed, kind, flags)
            chained += 1

    # convex base utility implies full disclosure, on independent priors
    convex_cases = 0
    for base in (VICKREY, MYERSON):
        for seed in range(25):
            sc = random_private_value(1000 + seed, max_bidders=3, independent=True)
            mech = by_name(f"expected-{base.name}", sc)
            family = V.DeviationFamily.build(sc, k=16, seed=seed)
            if V.check_convex_utility(sc, base, seed=seed).holds:
                convex_cases += 1
                fd = V.check_fd(sc, mech, family)
                assert fd.holds, (base.name, seed, fd.detail)
    assert convex_cases >= 25

    diffs = sum(_regulation_noop(random_private_value(300 + s, max_bidders=3, max_states=2,
                                                      max_types=2, independent=True), s)
                for s in range(10))
    assert diffs == 0, diffs
    return (f"linearity {lin:.1e}, total probability {ltp:.1e}, ironing {iron:.1e}, "
            f"{chained} chain runs, {convex_cases} convex cases with FD, regulation no-op exact")


@criterion(7, "negative control: expected meta over Myerson fails full disclosure", budget=10.0)
def test_criterion_7_negative_control():
    sc = bundled("negative_control")
    em = by_name("expected-myerson", sc)
    family = V.DeviationFamily.build(sc, k=64, seed=0)
    res = V.check_fd(sc, em, family)
    assert res.status == "FAIL"
    truthful, deviation = V.replay(sc, em, family, res.witness)
    assert deviation - truthful > 1e-7
    assert abs((deviation - truthful) - res.witness.gain) <= 1e-10
    return f"witness gain {res.witness.gain:.6g} ({res.witness.scheme})"
