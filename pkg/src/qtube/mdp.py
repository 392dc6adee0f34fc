"""Tabular MDP data model and vectorized policy operators.

Conventions
-----------
States and actions are zero-based integers.  A Q-function is stored either
as a table of shape ``(num_states, num_actions)`` or flattened to a vector
of length ``n = num_states * num_actions`` in action-major order, so entry
``a * num_states + s`` holds Q(s, a).  Deterministic policies are integer
arrays of shape ``(num_states,)``; stochastic policies are row-stochastic
arrays of shape ``(num_states, num_actions)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

ROW_SUM_ATOL = 1e-12
POLICY_CAP = 4096


class MdpValidationError(ValueError):
    """Raised when an MDP specification violates a structural invariant."""


@dataclass
class MdpSpec:
    """Unvalidated tabular MDP data as supplied by a caller or a file.

    Attributes
    ----------
    name : str
        Free-form identifier.
    gamma : float
        Discount factor, must lie strictly inside (0, 1).
    num_states, num_actions : int
        Sizes of the state and action sets, each at least 1.
    transitions : ndarray, shape (num_actions, num_states, num_states)
        ``transitions[a, s, t]`` is the probability of moving to state t
        when action a is taken in state s.  Rows must be probability
        distributions.
    rewards : ndarray, shape (num_states, num_actions)
        Expected immediate reward for each state-action pair.
    """

    name: str
    gamma: float
    num_states: int
    num_actions: int
    transitions: np.ndarray
    rewards: np.ndarray


@dataclass
class ValidatedMdp:
    """An MDP whose arrays passed :func:`validate`.  Arrays are read-only."""

    name: str
    gamma: float
    num_states: int
    num_actions: int
    transitions: np.ndarray
    rewards: np.ndarray

    @property
    def num_pairs(self) -> int:
        """Number n of state-action pairs."""
        return self.num_states * self.num_actions


def validate(spec: MdpSpec, renormalize: bool = False) -> ValidatedMdp:
    """Check an :class:`MdpSpec` and return a :class:`ValidatedMdp`.

    The first violated invariant is reported with the offending indices.
    Transition rows are required to sum to 1 within ``ROW_SUM_ATOL``;
    rows are rescaled only when ``renormalize`` is set explicitly, never
    silently.

    Raises
    ------
    MdpValidationError
        If any structural invariant fails.
    """
    if not isinstance(spec.num_states, (int, np.integer)) or spec.num_states < 1:
        raise MdpValidationError(f"num_states must be a positive integer, got {spec.num_states!r}")
    if not isinstance(spec.num_actions, (int, np.integer)) or spec.num_actions < 1:
        raise MdpValidationError(f"num_actions must be a positive integer, got {spec.num_actions!r}")
    gamma = float(spec.gamma)
    if not np.isfinite(gamma) or not 0.0 < gamma < 1.0:
        raise MdpValidationError(f"gamma must lie strictly inside (0, 1), got {spec.gamma!r}")

    s_count, a_count = int(spec.num_states), int(spec.num_actions)
    transitions = np.array(spec.transitions, dtype=float)
    rewards = np.array(spec.rewards, dtype=float)
    if transitions.shape != (a_count, s_count, s_count):
        raise MdpValidationError(
            f"transitions shape {transitions.shape} does not match "
            f"(num_actions, num_states, num_states) = {(a_count, s_count, s_count)}"
        )
    if rewards.shape != (s_count, a_count):
        raise MdpValidationError(
            f"rewards shape {rewards.shape} does not match "
            f"(num_states, num_actions) = {(s_count, a_count)}"
        )
    if not np.isfinite(rewards).all():
        s, a = np.argwhere(~np.isfinite(rewards))[0]
        raise MdpValidationError(f"rewards[{s}, {a}] is not finite")
    if not np.isfinite(transitions).all():
        a, s, t = np.argwhere(~np.isfinite(transitions))[0]
        raise MdpValidationError(f"transitions[{a}, {s}, {t}] is not finite")
    if (transitions < 0.0).any():
        a, s, t = np.argwhere(transitions < 0.0)[0]
        raise MdpValidationError(
            f"transitions[{a}, {s}, {t}] = {transitions[a, s, t]} is negative"
        )
    row_sums = transitions.sum(axis=2)
    if renormalize:
        if (row_sums <= 0.0).any():
            a, s = np.argwhere(row_sums <= 0.0)[0]
            raise MdpValidationError(f"transition row (action {a}, state {s}) has zero mass")
        transitions = transitions / row_sums[:, :, None]
    else:
        bad = np.abs(row_sums - 1.0) > ROW_SUM_ATOL
        if bad.any():
            a, s = np.argwhere(bad)[0]
            raise MdpValidationError(
                f"transition row (action {a}, state {s}) sums to {row_sums[a, s]!r}, "
                f"expected 1 within {ROW_SUM_ATOL}"
            )

    transitions.flags.writeable = False
    rewards.flags.writeable = False
    return ValidatedMdp(str(spec.name), gamma, s_count, a_count, transitions, rewards)


def q_index(s: int, a: int, num_states: int) -> int:
    """Flat index of the pair (s, a) under the action-major layout."""
    return a * num_states + s


def q_split(i: int, num_states: int) -> tuple[int, int]:
    """Inverse of :func:`q_index`; returns (s, a)."""
    return i % num_states, i // num_states


def table_to_q(table: np.ndarray) -> np.ndarray:
    """Flatten a (num_states, num_actions) table to an action-major vector."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2:
        raise ValueError(f"expected a 2-d Q table, got shape {table.shape}")
    return table.T.reshape(-1)


def q_to_table(q: np.ndarray, num_states: int, num_actions: int) -> np.ndarray:
    """Reshape an action-major Q vector to a (num_states, num_actions) table."""
    q = np.asarray(q, dtype=float)
    if q.shape != (num_states * num_actions,):
        raise ValueError(
            f"expected a vector of length {num_states * num_actions}, got shape {q.shape}"
        )
    return q.reshape(num_actions, num_states).T


def stack_transitions(mdp: ValidatedMdp) -> np.ndarray:
    """Stack per-action transition matrices into a single (n, num_states) array.

    Row ``a * num_states + s`` is the distribution of the next state after
    taking action a in state s, matching the action-major Q layout.
    """
    return mdp.transitions.reshape(mdp.num_pairs, mdp.num_states)


def rewards_vector(mdp: ValidatedMdp) -> np.ndarray:
    """Expected rewards flattened to the action-major layout."""
    return table_to_q(mdp.rewards)


def greedy_policy(
    q: np.ndarray, num_states: int, num_actions: int, tie_tol: float = 0.0
) -> np.ndarray:
    """Greedy deterministic policy of a Q vector, lowest index on ties.

    An action a is considered maximizing at state s when
    ``Q(s, a) >= max_b Q(s, b) - tie_tol``; the smallest such a is chosen.
    """
    table = q_to_table(q, num_states, num_actions)
    best = table.max(axis=1)
    return np.argmax(table >= (best - tie_tol)[:, None], axis=1)


def as_stochastic(policy: np.ndarray, num_actions: int) -> np.ndarray:
    """Lift a deterministic policy to a one-hot stochastic policy matrix."""
    policy = np.asarray(policy)
    if policy.ndim != 1:
        raise ValueError(f"expected a 1-d deterministic policy, got shape {policy.shape}")
    if (policy < 0).any() or (policy >= num_actions).any():
        s = int(np.flatnonzero((policy < 0) | (policy >= num_actions))[0])
        raise ValueError(f"policy[{s}] = {policy[s]} is outside range(0, {num_actions})")
    out = np.zeros((policy.shape[0], num_actions))
    out[np.arange(policy.shape[0]), policy] = 1.0
    return out


def _coerce_stochastic(policy: np.ndarray, num_states: int, num_actions: int) -> np.ndarray:
    policy = np.asarray(policy)
    if policy.ndim == 1:
        if policy.shape != (num_states,):
            raise ValueError(f"policy shape {policy.shape} does not match ({num_states},)")
        return as_stochastic(policy.astype(int), num_actions)
    if policy.shape != (num_states, num_actions):
        raise ValueError(
            f"policy shape {policy.shape} does not match ({num_states}, {num_actions})"
        )
    policy = policy.astype(float)
    if (policy < 0.0).any():
        raise ValueError("stochastic policy has a negative entry")
    if np.abs(policy.sum(axis=1) - 1.0).max() > ROW_SUM_ATOL:
        s = int(np.argmax(np.abs(policy.sum(axis=1) - 1.0)))
        raise ValueError(f"policy row {s} sums to {policy[s].sum()!r}, expected 1")
    return policy


def action_transition_matrix(
    policy: np.ndarray, num_states: int, num_actions: int
) -> np.ndarray:
    """Action-selection matrix of a policy, shape (num_states, n).

    Row s carries the action probabilities of the policy at s, placed at
    the flat indices of the pairs (s, a); all other entries are zero.
    Left-multiplying an action-major Q vector by this matrix evaluates the
    policy, and right-multiplying the stacked transitions by it closes the
    state-action chain.
    """
    pi = _coerce_stochastic(policy, num_states, num_actions)
    out = np.zeros((num_states, num_states * num_actions))
    cols = np.arange(num_actions)[None, :] * num_states + np.arange(num_states)[:, None]
    out[np.arange(num_states)[:, None], cols] = pi
    return out


def policy_kernel(mdp: ValidatedMdp, policy: np.ndarray) -> np.ndarray:
    """State-action transition kernel B of a policy, shape (n, n).

    B is the product of the stacked transitions and the action-selection
    matrix; it is row-stochastic, and gamma * B is the linear map a greedy
    switching step applies to the Q error.
    """
    pi_mat = action_transition_matrix(policy, mdp.num_states, mdp.num_actions)
    return stack_transitions(mdp) @ pi_mat


def state_kernel(mdp: ValidatedMdp, policy: np.ndarray) -> np.ndarray:
    """Induced state chain of a policy, shape (num_states, num_states)."""
    pi_mat = action_transition_matrix(policy, mdp.num_states, mdp.num_actions)
    return pi_mat @ stack_transitions(mdp)


def enumerate_policies(mdp: ValidatedMdp, cap: int = POLICY_CAP) -> list[np.ndarray]:
    """All deterministic policies in lexicographic order.

    Raises
    ------
    ValueError
        If the count ``num_actions ** num_states`` exceeds ``cap``.
    """
    count = mdp.num_actions**mdp.num_states
    if count > cap:
        raise ValueError(f"{count} deterministic policies exceed the cap of {cap}")
    return [
        np.array(p, dtype=int)
        for p in itertools.product(range(mdp.num_actions), repeat=mdp.num_states)
    ]
