"""Q-value iteration and the optimal-action structure of its fixed point.

The Bellman update is a gamma-contraction in the sup norm, so iterating
from any starting vector converges to the unique fixed point q*.  The
iteration stops once the a-posteriori bound
``gamma / (1 - gamma) * ||Q_{k+1} - Q_k||_inf`` drops below the requested
tolerance, which bounds the true distance ``||Q_{k+1} - q*||_inf``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .mdp import (
    ValidatedMdp,
    greedy_policy,
    q_to_table,
    rewards_vector,
    stack_transitions,
)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000


def value_from_q(q: np.ndarray, num_states: int, num_actions: int) -> np.ndarray:
    """Per-state maximum of an action-major Q vector."""
    return q.reshape(num_actions, num_states).max(axis=0)


def bellman_apply(mdp: ValidatedMdp, q: np.ndarray) -> np.ndarray:
    """One Bellman update R + gamma * P max_a Q applied to a Q vector."""
    v = value_from_q(np.asarray(q, dtype=float), mdp.num_states, mdp.num_actions)
    return rewards_vector(mdp) + mdp.gamma * (stack_transitions(mdp) @ v)


@dataclass
class OptimalityReport:
    """Fixed point of the Bellman update together with its action structure.

    Attributes
    ----------
    q_star : ndarray, shape (n,)
        Approximate fixed point, action-major layout.
    v_star : ndarray, shape (num_states,)
        Per-state optimal values, the row maxima of ``q_star``.
    phi_star : list of tuple of int
        Optimal action set at each state: actions within ``tol_opt`` of
        the state's best value.
    s_sep : tuple of int
        Separating states, where ``phi_star`` is a proper subset of the
        action set.
    delta_bar : float or None
        Smallest optimality gap over the separating states, None when
        there is no separating state.
    delta_bar_per_state : ndarray
        Gap at each separating state, aligned with ``s_sep``.
    iterations : int
        Number of Bellman updates performed.
    residual : float
        Final a-posteriori error bound on ``||q_star - Q*||_inf``.
    tol_opt : float
        Tolerance used to classify actions as optimal.
    """

    gamma: float
    num_states: int
    num_actions: int
    q_star: np.ndarray
    v_star: np.ndarray
    phi_star: list[tuple[int, ...]]
    s_sep: tuple[int, ...]
    delta_bar: float | None
    delta_bar_per_state: np.ndarray
    iterations: int
    residual: float
    tol_opt: float
    pi_star: np.ndarray = field(init=False)

    def __post_init__(self):
        self.pi_star = np.array([acts[0] for acts in self.phi_star], dtype=int)


def optimal_action_sets(
    q_star: np.ndarray, num_states: int, num_actions: int, tol_opt: float
) -> tuple[list[tuple[int, ...]], tuple[int, ...]]:
    """Per-state optimal action sets and the separating states.

    An action is optimal at s when its Q value is within ``tol_opt`` of
    the state maximum.  A state separates when some action is left out.
    A warning is emitted when no state separates, since the optimality
    gap is undefined in that case.
    """
    table = q_to_table(q_star, num_states, num_actions)
    best = table.max(axis=1)
    mask = table >= (best - tol_opt)[:, None]
    phi_star = [tuple(np.flatnonzero(mask[s]).tolist()) for s in range(num_states)]
    s_sep = tuple(s for s in range(num_states) if len(phi_star[s]) < num_actions)
    if not s_sep:
        warnings.warn(
            "every action is optimal at every state; the optimality gap is undefined",
            stacklevel=2,
        )
    return phi_star, s_sep


def solve_qstar(
    mdp: ValidatedMdp,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    tol_opt: float | None = None,
) -> OptimalityReport:
    """Run Q-value iteration from zero until the error bound meets ``tol``.

    Parameters
    ----------
    tol : float
        Target bound on ``||q_star - Q*||_inf``.
    max_iter : int
        Hard iteration limit.
    tol_opt : float, optional
        Optimal-action classification tolerance; defaults to
        ``max(1e-8, 1e-6 * ||q_star||_inf)``.

    Raises
    ------
    RuntimeError
        If the limit is reached before the bound is met; the message
        carries the residual at that point.
    """
    r_vec = rewards_vector(mdp)
    stacked = stack_transitions(mdp)
    factor = mdp.gamma / (1.0 - mdp.gamma)

    q = np.zeros(mdp.num_pairs)
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        v = value_from_q(q, mdp.num_states, mdp.num_actions)
        q_next = r_vec + mdp.gamma * (stacked @ v)
        residual = factor * float(np.abs(q_next - q).max())
        q = q_next
        if residual <= tol:
            break
    else:
        raise RuntimeError(
            f"no convergence within {max_iter} iterations, residual bound {residual:.3e}"
        )

    if tol_opt is None:
        tol_opt = max(1e-8, 1e-6 * float(np.abs(q).max()))
    phi_star, s_sep = optimal_action_sets(q, mdp.num_states, mdp.num_actions, tol_opt)

    table = q_to_table(q, mdp.num_states, mdp.num_actions)
    v_star = table.max(axis=1)
    gaps = []
    for s in s_sep:
        rest = [table[s, a] for a in range(mdp.num_actions) if a not in phi_star[s]]
        gaps.append(v_star[s] - max(rest))
    delta_bar_per_state = np.array(gaps)
    delta_bar = float(delta_bar_per_state.min()) if s_sep else None

    return OptimalityReport(
        gamma=mdp.gamma,
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
        q_star=q,
        v_star=v_star,
        phi_star=phi_star,
        s_sep=s_sep,
        delta_bar=delta_bar,
        delta_bar_per_state=delta_bar_per_state,
        iterations=iterations,
        residual=residual,
        tol_opt=tol_opt,
    )


def poss_contains(report: OptimalityReport, q: np.ndarray) -> bool:
    """Whether the tie-broken greedy policy of ``q`` is optimal.

    Membership in this set is what makes a Bellman update act on the
    error as the optimal switching map; the set is a union of polyhedra
    and contains every sup-norm ball around q* of radius below half the
    optimality gap.
    """
    pol = greedy_policy(q, report.num_states, report.num_actions)
    return all(pol[s] in report.phi_star[s] for s in range(report.num_states))


def enumerate_optimal_policies(report: OptimalityReport, cap: int = 4096) -> list[np.ndarray]:
    """All deterministic policies that select optimal actions everywhere.

    Raises
    ------
    ValueError
        If the product of the optimal-set sizes exceeds ``cap``.
    """
    count = int(np.prod([len(acts) for acts in report.phi_star]))
    if count > cap:
        raise ValueError(f"{count} optimal policies exceed the cap of {cap}")
    return [np.array(p, dtype=int) for p in itertools.product(*report.phi_star)]
