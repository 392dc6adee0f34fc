"""JSON input/output for MDPs and the built-in example models.

All documents written by this package carry a ``schema`` string so that
downstream consumers can detect format drift.  Documents without one are
accepted on input.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mdp import MdpSpec, MdpValidationError, ValidatedMdp, validate

MDP_SCHEMA = "qtube.mdp.v1"

_REQUIRED_FIELDS = ("name", "gamma", "num_states", "num_actions", "transitions", "rewards")


def mdp_from_dict(doc: dict) -> ValidatedMdp:
    """Build and validate an MDP from a parsed JSON document."""
    missing = [f for f in _REQUIRED_FIELDS if f not in doc]
    if missing:
        raise MdpValidationError(f"missing fields: {', '.join(missing)}")
    spec = MdpSpec(
        name=doc["name"],
        gamma=doc["gamma"],
        num_states=doc["num_states"],
        num_actions=doc["num_actions"],
        transitions=np.array(doc["transitions"], dtype=float),
        rewards=np.array(doc["rewards"], dtype=float),
    )
    return validate(spec)


def mdp_to_dict(mdp: ValidatedMdp) -> dict:
    return {
        "schema": MDP_SCHEMA,
        "name": mdp.name,
        "gamma": mdp.gamma,
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
    }


def load_mdp(path: str | Path) -> ValidatedMdp:
    """Load and validate an MDP from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise MdpValidationError(f"{path}: not valid JSON ({err})") from err
    if not isinstance(doc, dict):
        raise MdpValidationError(f"{path}: top-level JSON value must be an object")
    return mdp_from_dict(doc)


def save_mdp(mdp: ValidatedMdp, path: str | Path) -> None:
    """Write an MDP to a JSON file."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mdp_to_dict(mdp), fh, indent=2)
        fh.write("\n")


def toy3x2() -> ValidatedMdp:
    """Three-state, two-action example with a unique optimal policy.

    Probabilities and rewards are short decimal literals, so writing the
    model to JSON and reading it back reproduces the numbers exactly.
    """
    transitions = [
        [[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]],
        [[0.2, 0.5, 0.3], [0.4, 0.3, 0.3], [0.3, 0.3, 0.4]],
    ]
    rewards = [[1.0, 0.2], [0.6, 0.0], [1.2, 0.3]]
    spec = MdpSpec(
        name="toy3x2",
        gamma=0.95,
        num_states=3,
        num_actions=2,
        transitions=np.array(transitions),
        rewards=np.array(rewards),
    )
    return validate(spec)


def toy3x2_q0() -> np.ndarray:
    """Reference starting vector of the toy3x2 single-trajectory demo.

    Action-major layout; sits off the optimal line but already inside
    the greedy-optimal set.
    """
    table = np.array([[19.5495, 16.6292], [17.9460, 17.5438], [18.8213, 17.8696]])
    return table.T.reshape(-1)


EXAMPLES = {"toy3x2": toy3x2}


def example(name: str) -> ValidatedMdp:
    """Return a built-in example MDP by name."""
    try:
        builder = EXAMPLES[name]
    except KeyError:
        raise KeyError(
            f"unknown example {name!r}; available: {', '.join(sorted(EXAMPLES))}"
        ) from None
    return builder()
