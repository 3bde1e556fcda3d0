import json

import numpy as np
import pytest

from reticent.scenario_io import (BUNDLED, ScenarioError, bundled, load_scenario,
                                  scenario_from_dict, scenario_to_dict)


def _minimal():
    return {
        "name": "tiny",
        "state_space": {"sizes": [1, 2], "labels": [["-"], ["lo", "hi"]]},
        "joint_prior": [{"profile": ["-", "lo"], "prob": 0.25}, {"profile": ["-", "hi"], "prob": 0.75}],
        "type_priors": [{"bidder": 1, "support": ["a", "b"], "probs": [0.5, 0.5]}],
        "values": {"private_value": True, "entries": [
            {"bidder": 1, "type": "a", "profile": ["*", "*"], "value": 1.0},
            {"bidder": 1, "type": "b", "profile": ["*", "lo"], "value": 2.0},
            {"bidder": 1, "type": "b", "profile": ["*", "hi"], "value": 4.0},
        ]},
    }


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_load_and_round_trip(name):
    sc = bundled(name)
    back = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(sc))))
    np.testing.assert_allclose(back.prior.probs, sc.prior.probs)
    for a, b in zip(back.kernel.tables, sc.kernel.tables):
        np.testing.assert_allclose(a, b)
    assert back.types.supports == sc.types.supports
    assert back.kernel.private_value == sc.kernel.private_value


def test_wildcards_fill_every_state():
    sc = scenario_from_dict(_minimal())
    assert sc.kernel.tables[0][0].ravel().tolist() == [1.0, 1.0]
    assert sc.kernel.tables[0][1].ravel().tolist() == [2.0, 4.0]


def test_zero_mass_types_are_dropped():
    data = _minimal()
    data["type_priors"][0]["probs"] = [0.0, 1.0]
    sc = scenario_from_dict(data)
    assert sc.types.supports == (("b",),)


def test_separable_values():
    data = _minimal()
    data["values"] = {"separable": [{"bidder": 1, "base": {"a": 1.0, "b": 3.0},
                                     "cvr": {"lo": 0.5, "hi": 1.0}}]}
    sc = scenario_from_dict(data)
    assert sc.kernel.private_value and sc.kernel.separable is not None
    assert sc.kernel.tables[0][1].ravel().tolist() == [1.5, 3.0]


def test_explicit_schemes_are_validated():
    data = _minimal()
    data["schemes"] = [{"bidder": 1, "name": "half", "kernel": [[1.0, 0.0], [1 / 3, 2 / 3]]}]
    sc = scenario_from_dict(data)
    sch = sc.schemes[(0, "half")]
    assert sch.weights.tolist() == pytest.approx([0.5, 0.5])
    assert sch.posteriors[1].tolist() == pytest.approx([0.0, 1.0])
    data["schemes"] = [{"bidder": 1, "signals": [{"weight": 1.0, "posterior": [0.5, 0.5]}]}]
    with pytest.raises(ScenarioError, match="invalid scheme"):
        scenario_from_dict(data)


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d["joint_prior"][1].update(profile=["-", "mid"]), "$.joint_prior[1].profile[1]"),
    (lambda d: d["joint_prior"][0].update(prob=-1), "$.joint_prior[0].prob"),
    (lambda d: d.pop("type_priors"), "$"),
    (lambda d: d["values"]["entries"].pop(), "$.values"),
    (lambda d: d["type_priors"][0].update(bidder=2), "$.type_priors[0].bidder"),
])
def test_errors_name_the_offending_field(mutate, where):
    data = _minimal()
    mutate(data)
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(data, "x.json")
    assert info.value.where == where
    assert str(info.value).startswith("x.json: ")


def test_load_scenario_reports_json_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"state_space": {"sizes": [1, 2]},\n}')
    with pytest.raises(ScenarioError, match="line 2 column 1"):
        load_scenario(p)


def test_load_scenario_accepts_bundled_names_and_paths(tmp_path):
    assert load_scenario("example2").n_bidders == 3
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(_minimal()))
    assert load_scenario(p).name == "tiny"
