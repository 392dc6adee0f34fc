"""Switching-system view of the Q iteration error.

One Bellman update moves the error e = Q - q* by a linear map
``gamma * B`` drawn from the kernels of a family of policies: there is a
stochastic policy, recoverable in closed form from e itself, whose kernel
reproduces the step exactly.  After projecting out the constant direction
the same products govern the component of the error transverse to the
line q* + span(1), which is the part that decides greedy actions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import ValidatedMdp, policy_kernel, q_to_table
from .solver import OptimalityReport, bellman_apply

HULL_ATOL = 1e-10


def remove_mean(x: np.ndarray) -> np.ndarray:
    """Project a vector onto the orthogonal complement of the constants."""
    x = np.asarray(x, dtype=float)
    return x - x.mean()


def perp_projector(n: int) -> np.ndarray:
    """Orthogonal projector onto the complement of span(1), shape (n, n)."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def restricted_matrix(mdp: ValidatedMdp, policy: np.ndarray) -> np.ndarray:
    """Error map of one policy restricted to the mean-free subspace.

    Equals ``P_perp (gamma B) P_perp`` for the policy kernel B.  Its
    spectrum is that of ``gamma B`` with one eigenvalue ``gamma`` (from
    the Perron vector 1) replaced by zero.
    """
    n = mdp.num_pairs
    proj = perp_projector(n)
    return proj @ (mdp.gamma * policy_kernel(mdp, policy)) @ proj


@dataclass
class ProjectedFamily:
    """Restricted error maps of a set of policies.

    ``policies[i]`` is the tuple of actions that generated
    ``matrices[i]``; deterministic policies keep their lexicographic
    order when built through :func:`projected_family`.
    """

    gamma: float
    num_pairs: int
    projector: np.ndarray
    policies: list[tuple[int, ...]]
    matrices: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.matrices)

    def __iter__(self):
        return iter(zip(self.policies, self.matrices))


def projected_family(mdp: ValidatedMdp, policies: list[np.ndarray]) -> ProjectedFamily:
    """Build the restricted error maps of the given deterministic policies."""
    mats = [restricted_matrix(mdp, pol) for pol in policies]
    return ProjectedFamily(
        gamma=mdp.gamma,
        num_pairs=mdp.num_pairs,
        projector=perp_projector(mdp.num_pairs),
        policies=[tuple(int(a) for a in pol) for pol in policies],
        matrices=mats,
    )


@dataclass
class StochasticWitness:
    """Stochastic policy reproducing one Bellman step on the error.

    ``mu`` has at most two supported actions per state; ``delta`` is the
    per-state value shift ``max_a Q(s, a) - max_a q*(s, a)`` the witness
    realizes; ``residual`` is the sup-norm defect of that realization.
    """

    mu: np.ndarray
    delta: np.ndarray
    residual: float


def stochastic_witness(report: OptimalityReport, q: np.ndarray) -> StochasticWitness:
    """Closed-form witness policy for the step from ``q``.

    At each state the shift delta lies between the smallest and largest
    error entry, so it is met by mixing the two extreme actions: weight
    ``t = (delta - min) / (max - min)`` on the argmax of the error and
    ``1 - t`` on the argmin.  When all error entries coincide the witness
    is one-hot on action 0.

    Raises
    ------
    ValueError
        If delta falls outside the error hull by more than an absolute
        ``1e-10`` margin, which indicates an inconsistent q*.
    """
    s_count, a_count = report.num_states, report.num_actions
    e_table = q_to_table(np.asarray(q, dtype=float) - report.q_star, s_count, a_count)
    q_table = q_to_table(np.asarray(q, dtype=float), s_count, a_count)
    qstar_table = q_to_table(report.q_star, s_count, a_count)

    delta = q_table.max(axis=1) - qstar_table.max(axis=1)
    e_min, e_max = e_table.min(axis=1), e_table.max(axis=1)
    if (delta < e_min - HULL_ATOL).any() or (delta > e_max + HULL_ATOL).any():
        s = int(np.argmax(np.maximum(e_min - delta, delta - e_max)))
        raise ValueError(
            f"value shift {delta[s]!r} at state {s} falls outside the error hull "
            f"[{e_min[s]!r}, {e_max[s]!r}]"
        )

    mu = np.zeros((s_count, a_count))
    for s in range(s_count):
        if e_max[s] == e_min[s]:
            mu[s, 0] = 1.0
            continue
        t = (delta[s] - e_min[s]) / (e_max[s] - e_min[s])
        t = min(max(t, 0.0), 1.0)
        mu[s, int(np.argmax(e_table[s]))] = t
        mu[s, int(np.argmin(e_table[s]))] += 1.0 - t
    residual = float(np.abs((mu * e_table).sum(axis=1) - delta).max())
    return StochasticWitness(mu=mu, delta=delta, residual=residual)


@dataclass
class StepCheck:
    """Verified decomposition of one Bellman update on the error."""

    witness: StochasticWitness
    q_next: np.ndarray
    residual_error: float
    residual_projected: float

    @property
    def residual(self) -> float:
        return max(self.witness.residual, self.residual_error, self.residual_projected)


def error_step_verify(
    mdp: ValidatedMdp,
    report: OptimalityReport,
    q: np.ndarray,
    q_next: np.ndarray | None = None,
) -> StepCheck:
    """Apply one Bellman update and verify the witness reproduces it.

    Checks both recursions: the full error against ``gamma * B_mu e`` and
    the mean-free component against the restricted map applied to the
    mean-free error.  The residuals stay at the level of the fixed-point
    tolerance of ``report``.  ``q_next`` must be the Bellman update of
    ``q`` when supplied; by default it is computed here.
    """
    q = np.asarray(q, dtype=float)
    witness = stochastic_witness(report, q)
    if q_next is None:
        q_next = bellman_apply(mdp, q)
    else:
        q_next = np.asarray(q_next, dtype=float)

    e_now = q - report.q_star
    e_next = q_next - report.q_star
    a_mu = mdp.gamma * policy_kernel(mdp, witness.mu)
    residual_error = float(np.abs(e_next - a_mu @ e_now).max())

    n = mdp.num_pairs
    proj = perp_projector(n)
    a_bar = proj @ a_mu @ proj
    z_now = remove_mean(e_now)
    z_next = remove_mean(e_next)
    residual_projected = float(np.abs(z_next - a_bar @ z_now).max())
    return StepCheck(
        witness=witness,
        q_next=q_next,
        residual_error=residual_error,
        residual_projected=residual_projected,
    )
