import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reticent.mechanisms import (MYERSON, VICKREY, indicative_states_check, iron_values, myerson,
                                 phi_matrix, strong_regularity_check, vickrey, vickrey_batch,
                                 virtual_value_table, virtual_values)
from reticent.model import JointPrior, Scenario, StateSpace, TypePrior, ValueKernel
from reticent.synth import random_separable, separable_scenario


def test_vickrey_second_price_and_low_index_ties():
    out = vickrey([3.0, 5.0, 5.0])
    assert out.winner == 1
    assert out.p.tolist() == [0.0, 5.0, 0.0]
    x, p = vickrey_batch(np.array([[1.0, 4.0], [2.0, 0.5]]))
    assert x.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert p.tolist() == [[0.0, 1.0], [0.5, 0.0]]


def test_vickrey_single_bidder_pays_nothing():
    assert vickrey([7.0]).revenue == 0.0


def test_virtual_values_hand_computed():
    # values 1, 2, 3 with masses .5, .1, .4
    phi = virtual_values([1.0, 2.0, 3.0], [0.5, 0.1, 0.4])
    np.testing.assert_allclose(phi, [0.0, -2.0, 3.0], atol=1e-12)


def test_ironing_pools_the_non_monotone_pair():
    vals, h = np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.1, 0.4])
    ironed = iron_values(vals, h, virtual_values(vals, h))
    np.testing.assert_allclose(ironed, [-1 / 3, -1 / 3, 3.0], atol=1e-12)


def test_equal_values_share_a_virtual_value():
    phi = virtual_values([2.0, 1.0, 2.0], [0.25, 0.5, 0.25])
    assert phi[0] == phi[2] == 2.0
    assert phi[1] == pytest.approx(0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 10.0), st.floats(0.01, 1.0)), min_size=1, max_size=7))
def test_ironing_is_monotone_and_conserves_mass_weighted_sum(pairs):
    vals = np.array([v for v, _ in pairs])
    h = np.array([w for _, w in pairs])
    h = h / h.sum()
    phi = virtual_values(vals, h)
    ironed = iron_values(vals, h, phi)
    order = np.argsort(vals, kind="stable")
    assert np.all(np.diff(ironed[order]) >= -1e-9)
    assert abs(h @ ironed - h @ phi) <= 1e-9
    # the top value level is never ironed below its own value
    assert ironed[order[-1]] <= vals[order[-1]] + 1e-9


def test_myerson_charges_winner_its_virtual_value_and_respects_reserve():
    assert myerson([1.0, 2.0], [-0.5, 1.5]).p.tolist() == [0.0, 1.5]
    assert myerson([1.0, 2.0], [-0.5, 0.0]).winner is None


def test_phi_matrix_memoizes_identical_rows():
    levels = np.array([[1.0, 2.0], [1.0, 2.0], [2.0, 4.0]])
    out = phi_matrix(levels, np.array([0.5, 0.5]))
    np.testing.assert_allclose(out[0], out[1])
    np.testing.assert_allclose(out[2], 2 * out[0])


def _one_state(values, probs):
    n = len(values)
    space = StateSpace((1,) * (n + 1))
    prior = JointPrior(space, np.ones((1,) * (n + 1)))
    types = TypePrior(tuple(tuple(f"t{k}" for k in range(len(v))) for v in values),
                      tuple(np.asarray(h, dtype=float) for h in probs))
    return separable_scenario(space, prior, types, values, [[1.0]] * n)


def test_strong_regularity_detects_raw_violation_and_ironing_fixes_it():
    sc = _one_state([[1.0, 2.0, 3.0]], [[0.5, 0.1, 0.4]])
    table = virtual_value_table(sc)
    raw = strong_regularity_check(table, ironed=False)
    assert not raw and raw.witness[0] == 0
    assert strong_regularity_check(table, ironed=True)


def test_indicative_states_fail_when_residual_state_flips_the_winner():
    space = StateSpace((2, 1, 1))
    prior = JointPrior(space, np.full((2, 1, 1), 0.5))
    types = TypePrior((("a",), ("b",)), (np.ones(1), np.ones(1)))
    t1 = np.array([1.0, 3.0]).reshape(1, 2, 1, 1)
    t2 = np.full((1, 2, 1, 1), 2.0)
    sc = Scenario(space, prior, types, ValueKernel((t1, t2), private_value=True))
    assert not indicative_states_check(VICKREY, sc)
    assert indicative_states_check(VICKREY, random_separable(0))


def test_random_separable_meets_revenue_preconditions():
    for seed in range(5):
        sc = random_separable(seed)
        assert strong_regularity_check(virtual_value_table(sc), ironed=True)
        assert indicative_states_check(MYERSON, sc)
