import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reticent import bundled, by_name, expected_vickrey, regulate, simulated_myerson
from reticent.meta import ReticentMechanism, auctioneer_posterior
from reticent.mechanisms import VICKREY
from reticent.model import make_scheme
from reticent.synth import random_interdependent, random_private_value


def test_by_name_resolves_kinds_bases_and_regulation():
    sc = bundled("example3")
    assert by_name("expected-vickrey", sc).name == "expected-vickrey"
    assert by_name("simulated-myerson", sc).kind == "simulated"
    reg = by_name("regulated(expected-vickrey)", sc)
    assert reg.regulated and reg.name == "regulated(expected-vickrey)"
    assert by_name("expected-vickrey", sc, regulated=True).regulated
    with pytest.raises(ValueError, match="unknown mechanism"):
        by_name("expected-first-price", sc)


def test_regulate_is_idempotent_and_keeps_base():
    sc = bundled("example3")
    ev = by_name("expected-vickrey", sc)
    reg = regulate(ev)
    assert regulate(reg) is reg
    assert reg.base is ev.base and reg.kind == ev.kind


def test_expected_meta_runs_base_on_posterior_expected_values():
    sc = bundled("example3")
    sigs = [sc.marginal(i + 1) for i in range(3)]
    post = auctioneer_posterior(sc, sigs)
    ev = by_name("expected-vickrey", sc)
    bids = (0, 0, 0)
    est = ev.estimated_values(bids, post)
    out = expected_vickrey(bids, post, sc)
    ref = VICKREY.single([e[None] for e in est], sc.types.probs, (0, 0, 0))
    np.testing.assert_allclose(out.x, ref.x)
    np.testing.assert_allclose(out.p, ref.p)


def test_simulated_meta_averages_state_outcomes():
    sc = random_private_value(3, max_bidders=3)
    sm = by_name("simulated-myerson", sc)
    rng = np.random.default_rng(0)
    q = rng.dirichlet(np.ones(sc.space.n_profiles))
    bids = tuple(0 for _ in range(sc.n_bidders))
    X, P = sm.state_table(bids)
    out = sm.outcome(bids, q)
    np.testing.assert_allclose(out.x, q @ X, atol=1e-12)
    np.testing.assert_allclose(out.p, q @ P, atol=1e-12)
    direct = simulated_myerson(bids, q, sc)
    np.testing.assert_allclose(direct.p, out.p, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 5000), a=st.floats(0.0, 1.0))
def test_simulated_meta_is_linear_in_the_posterior(seed, a):
    sc = random_interdependent(seed)
    rng = np.random.default_rng(seed)
    sm = ReticentMechanism(VICKREY, sc, "simulated")
    q1, q2 = rng.dirichlet(np.ones(sc.space.n_profiles), size=2)
    bids = tuple(int(rng.integers(len(s))) for s in sc.types.supports)
    mix = sm.outcome(bids, a * q1 + (1 - a) * q2)
    o1, o2 = sm.outcome(bids, q1), sm.outcome(bids, q2)
    np.testing.assert_allclose(mix.x, a * o1.x + (1 - a) * o2.x, atol=1e-12)
    np.testing.assert_allclose(mix.p, a * o1.p + (1 - a) * o2.p, atol=1e-12)


def test_regulated_posterior_ignores_cross_bidder_correlation():
    sc = bundled("example3")
    eye = np.eye(2)
    sigs = [eye[0], sc.marginal(2), sc.marginal(3)]
    joint = auctioneer_posterior(sc, sigs).probs.sum(axis=0)
    prod = auctioneer_posterior(sc, sigs, regulated=True).probs.sum(axis=0)
    # unregulated inference pins the correlated opponents; regulated keeps them at their prior
    assert joint[0, 0, 1] == pytest.approx(1.0)
    assert prod[0, 0, 1] == pytest.approx(0.25)


def test_regulation_is_a_no_op_on_independent_private_values():
    sc = random_private_value(21, max_bidders=3, independent=True)
    schemes = [make_scheme("no_information", i, sc.prior) for i in range(sc.n_bidders)]
    sigs = [s.posteriors[0] for s in schemes]
    for kind in ("expected-vickrey", "simulated-myerson"):
        plain, reg = by_name(kind, sc), by_name(kind, sc, regulated=True)
        a = plain.outcome((0,) * sc.n_bidders, auctioneer_posterior(sc, sigs))
        b = reg.outcome((0,) * sc.n_bidders, auctioneer_posterior(sc, sigs, regulated=True))
        np.testing.assert_allclose(a.x, b.x, atol=1e-12)
        np.testing.assert_allclose(a.p, b.p, atol=1e-12)


def test_simulated_myerson_warns_when_preconditions_fail():
    sc = bundled("negative_control")
    sm = by_name("simulated-myerson", sc)
    # value 3 (low type, state B) has a lower virtual value than value 2.2 (high type, state A)
    assert any("strong regularity" in w for w in sm.warnings)
    assert by_name("expected-vickrey", sc).warnings == ()
