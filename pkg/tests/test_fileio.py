import json

import numpy as np
import pytest

from _support import random_mdp, rng
from qtube.fileio import (
    MDP_SCHEMA,
    example,
    load_mdp,
    mdp_from_dict,
    mdp_to_dict,
    save_mdp,
    toy3x2_q0,
)
from qtube.mdp import MdpValidationError, q_index


def test_round_trip_is_exact(tmp_path, toy):
    path = tmp_path / "toy.json"
    save_mdp(toy, path)
    back = load_mdp(path)
    assert back.name == toy.name and back.gamma == toy.gamma
    assert np.array_equal(back.transitions, toy.transitions)
    assert np.array_equal(back.rewards, toy.rewards)


def test_random_round_trips(tmp_path):
    gen = rng(10)
    for i in range(20):
        mdp = random_mdp(gen, num_states=int(gen.integers(1, 5)),
                         num_actions=int(gen.integers(1, 4)), name=f"m{i}")
        path = tmp_path / f"m{i}.json"
        save_mdp(mdp, path)
        back = load_mdp(path)
        assert np.array_equal(back.transitions, mdp.transitions)
        assert np.array_equal(back.rewards, mdp.rewards)


def test_written_document_has_schema_and_decimal_literals(tmp_path, toy):
    path = tmp_path / "toy.json"
    save_mdp(toy, path)
    text = path.read_text()
    doc = json.loads(text)
    assert doc["schema"] == MDP_SCHEMA
    assert doc["gamma"] == 0.95
    assert doc["transitions"][0][0] == [0.7, 0.2, 0.1]
    assert doc["transitions"][1][1] == [0.4, 0.3, 0.3]
    assert doc["rewards"] == [[1.0, 0.2], [0.6, 0.0], [1.2, 0.3]]
    # short decimals survive as literal text, not float noise
    assert "0.7" in text and "0.95" in text


def test_mdp_to_dict_lists(toy):
    doc = mdp_to_dict(toy)
    assert isinstance(doc["transitions"], list)
    assert doc["num_states"] == 3 and doc["num_actions"] == 2


def test_missing_fields_are_listed():
    with pytest.raises(MdpValidationError, match="missing fields: .*rewards"):
        mdp_from_dict({"name": "x", "gamma": 0.9, "num_states": 1,
                       "num_actions": 1, "transitions": [[[1.0]]]})


def test_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "x", ')
    with pytest.raises(MdpValidationError, match="not valid JSON"):
        load_mdp(path)


def test_top_level_must_be_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(MdpValidationError, match="must be an object"):
        load_mdp(path)


def test_invalid_model_rejected_on_load(tmp_path, toy):
    doc = mdp_to_dict(toy)
    doc["transitions"][0][0][0] = 0.8
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(MdpValidationError, match="sums to"):
        load_mdp(path)


def test_unknown_example_lists_available():
    with pytest.raises(KeyError, match="toy3x2"):
        example("nope")


def test_example_returns_toy():
    mdp = example("toy3x2")
    assert mdp.name == "toy3x2"
    assert mdp.transitions[0, 0, 0] == 0.7


def test_reference_start_layout():
    q0 = toy3x2_q0()
    table = np.array([[19.5495, 16.6292], [17.9460, 17.5438], [18.8213, 17.8696]])
    assert q0.shape == (6,)
    for s in range(3):
        for a in range(2):
            assert q0[q_index(s, a, 3)] == table[s, a]
