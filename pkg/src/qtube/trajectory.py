"""Deterministic and stochastic Q iterations with per-step geometry.

Both runners log the same record layout: sup error, distances to the
line q* + span(1), the mean error component, membership flags for the
greedy-optimal set and the tube, witness residuals (deterministic runs
only), and plane coordinates.  Records serialize to a small CSV schema
consumed by the plotting component.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .geometry import PlaneBasis, TubeSpec, dist2_to_x1, distinf_to_x1, plane_project, rotate_uv
from .mdp import ValidatedMdp, policy_kernel, stack_transitions, table_to_q
from .solver import OptimalityReport, bellman_apply, poss_contains
from .spectral import second_modulus
from .switching import error_step_verify

CSV_SCHEMA = "qtube.trajectory.v1"
CSV_HEADER = "k,inf_err,dist2_x1,distinf_x1,alpha,poss_flag,tube_flag,witness_residual,u,v,p,q"


@dataclass
class TrajectoryRecord:
    """Diagnostics of one recorded iterate.

    ``alpha`` is the mean all-ones error component; ``witness_residual``
    is filled for deterministic runs only and covers the step leaving
    this iterate.
    """

    k: int
    inf_err: float
    dist2_x1: float
    distinf_x1: float
    alpha: float
    poss_flag: bool
    tube_flag: bool
    witness_residual: float | None
    u: float
    v: float
    p: float
    q: float


@dataclass
class QLearnConfig:
    """Settings of the asynchronous stochastic run.

    The step size at update t is ``alpha0 / (1 + decay * t)``; behavior
    is uniform over actions along a single continuing trajectory.  The
    initial state is drawn uniformly when ``initial_state`` is None, from
    the uniform-behavior stationary distribution for "stationary", or
    fixed to a given state id.  Rewards use the expected table; set
    ``reward_noise_std`` to add zero-mean Gaussian noise.  Runs are pure
    functions of (mdp, Q0, config): the generator is a seeded counter-based
    Philox stream, never the platform default.
    """

    seed: int = 0
    steps: int = 100_000
    alpha0: float = 0.35
    decay: float = 0.01
    initial_state: int | str | None = None
    record_stride: int = 100
    reward_noise_std: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha0 <= 1.0:
            raise ValueError(f"alpha0 must lie in (0, 1], got {self.alpha0!r}")
        if self.decay < 0.0:
            raise ValueError(f"decay must be nonnegative, got {self.decay!r}")
        if self.steps < 0:
            raise ValueError(f"steps must be nonnegative, got {self.steps!r}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be positive, got {self.record_stride!r}")
        if self.reward_noise_std < 0.0:
            raise ValueError(f"reward_noise_std must be nonnegative, got {self.reward_noise_std!r}")


@dataclass
class TrajectoryResult:
    """A recorded run plus its entrance indices and reference rates.

    ``rate_gamma_lambda2`` is the sharper reference rate
    ``gamma * |lambda_2|`` of the optimal kernel, present only when the
    optimal policy is unique.
    """

    kind: str
    records: list[TrajectoryRecord]
    tube_entrance: int | None
    poss_entrance: int | None
    rate_gamma: float
    rate_gamma_lambda2: float | None
    delta: float
    q0_label: str
    seed: int | None = None
    final_q: np.ndarray = field(default=None, repr=False)


def make_record(
    k: int,
    q: np.ndarray,
    report: OptimalityReport,
    tube: TubeSpec,
    basis: PlaneBasis,
    witness_residual: float | None = None,
) -> TrajectoryRecord:
    """Fill one record from the current iterate."""
    e = np.asarray(q, dtype=float) - report.q_star
    u, v = plane_project(q, report.q_star, basis)
    p, rq = rotate_uv(u, v)
    distinf = distinf_to_x1(q, report.q_star)
    return TrajectoryRecord(
        k=k,
        inf_err=float(np.abs(e).max()),
        dist2_x1=dist2_to_x1(q, report.q_star),
        distinf_x1=distinf,
        alpha=float(e.mean()),
        poss_flag=poss_contains(report, q),
        tube_flag=distinf <= tube.delta,
        witness_residual=witness_residual,
        u=u,
        v=v,
        p=p,
        q=rq,
    )


def _reference_rate(mdp: ValidatedMdp, report: OptimalityReport) -> float | None:
    if any(len(acts) != 1 for acts in report.phi_star):
        return None
    return mdp.gamma * second_modulus(policy_kernel(mdp, report.pi_star))


def run_qvi(
    mdp: ValidatedMdp,
    report: OptimalityReport,
    q0: np.ndarray,
    iters: int,
    tube: TubeSpec,
    basis: PlaneBasis,
    record_stride: int = 1,
    verify: bool = True,
    q0_label: str = "custom",
) -> TrajectoryResult:
    """Iterate the Bellman update, recording diagnostics at each stride.

    Every performed step is checked against its stochastic witness when
    ``verify`` is set; the residual lands on the record of the iterate
    the step leaves.  The final iterate is always recorded.
    """
    q = np.asarray(q0, dtype=float).copy()
    records = []
    for k in range(iters):
        if verify:
            check = error_step_verify(mdp, report, q)
            residual, q_next = check.residual, check.q_next
        else:
            residual, q_next = None, bellman_apply(mdp, q)
        if k % record_stride == 0:
            records.append(make_record(k, q, report, tube, basis, residual))
        q = q_next
    records.append(make_record(iters, q, report, tube, basis, None))
    return TrajectoryResult(
        kind="qvi",
        records=records,
        tube_entrance=entrance_index(records, "tube"),
        poss_entrance=entrance_index(records, "poss"),
        rate_gamma=mdp.gamma,
        rate_gamma_lambda2=_reference_rate(mdp, report),
        delta=tube.delta,
        q0_label=q0_label,
        final_q=q,
    )


def _initial_state(mdp: ValidatedMdp, config: QLearnConfig, rng: np.random.Generator) -> int:
    if config.initial_state is None:
        return int(rng.integers(mdp.num_states))
    if config.initial_state == "stationary":
        behavior = mdp.transitions.mean(axis=0)
        eigvals, eigvecs = np.linalg.eig(behavior.T)
        lead = int(np.argmin(np.abs(eigvals - 1.0)))
        pi = np.abs(eigvecs[:, lead].real)
        pi = pi / pi.sum()
        return int(rng.choice(mdp.num_states, p=pi))
    s0 = int(config.initial_state)
    if not 0 <= s0 < mdp.num_states:
        raise ValueError(f"initial state {s0} outside range(0, {mdp.num_states})")
    return s0


def run_qlearning(
    mdp: ValidatedMdp,
    report: OptimalityReport,
    q0: np.ndarray,
    config: QLearnConfig,
    tube: TubeSpec,
    basis: PlaneBasis,
    q0_label: str = "custom",
) -> TrajectoryResult:
    """Asynchronous tabular update along one simulated trajectory.

    Updates ``Q(s,a) += alpha_t * (r + gamma * max Q(s',.) - Q(s,a))``
    with uniformly drawn actions and the expected reward.  All draws come
    from one Philox stream in a fixed order (initial state, actions,
    transition uniforms, optional reward noise), so equal seeds give
    bitwise-equal records.
    """
    rng = np.random.Generator(np.random.Philox(config.seed))
    s = _initial_state(mdp, config, rng)
    actions = rng.integers(0, mdp.num_actions, size=config.steps).tolist()
    uniforms = rng.random(config.steps).tolist()
    noise = None
    if config.reward_noise_std > 0.0:
        noise = (config.reward_noise_std * rng.standard_normal(config.steps)).tolist()

    # plain-Python state for the hot loop; n is tiny and numpy overhead dominates
    q_rows = [list(row) for row in np.asarray(q0, dtype=float).reshape(
        mdp.num_actions, mdp.num_states).T]
    cum_rows = [list(np.cumsum(row)) for row in stack_transitions(mdp)]
    r_table = [list(row) for row in mdp.rewards]
    gamma = mdp.gamma
    alpha0, decay = config.alpha0, config.decay
    num_states = mdp.num_states

    def snapshot(k: int) -> TrajectoryRecord:
        q_vec = table_to_q(np.array(q_rows))
        return make_record(k, q_vec, report, tube, basis, None)

    records = [snapshot(0)]
    for t in range(config.steps):
        a = actions[t]
        row = cum_rows[a * num_states + s]
        s_next = bisect_right(row, uniforms[t] * row[-1])
        if s_next >= num_states:
            s_next = num_states - 1
        reward = r_table[s][a]
        if noise is not None:
            reward += noise[t]
        alpha = alpha0 / (1.0 + decay * t)
        q_rows[s][a] += alpha * (reward + gamma * max(q_rows[s_next]) - q_rows[s][a])
        s = s_next
        if (t + 1) % config.record_stride == 0 or t + 1 == config.steps:
            records.append(snapshot(t + 1))

    return TrajectoryResult(
        kind="qlearn",
        records=records,
        tube_entrance=entrance_index(records, "tube"),
        poss_entrance=entrance_index(records, "poss"),
        rate_gamma=mdp.gamma,
        rate_gamma_lambda2=_reference_rate(mdp, report),
        delta=tube.delta,
        q0_label=q0_label,
        seed=config.seed,
        final_q=table_to_q(np.array(q_rows)),
    )


def entrance_index(records: list[TrajectoryRecord], which: str) -> int | None:
    """Smallest recorded k whose flag is set; None when never set."""
    attr = {"tube": "tube_flag", "poss": "poss_flag"}[which]
    for rec in records:
        if getattr(rec, attr):
            return rec.k
    return None


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_records_csv(records: list[TrajectoryRecord], path) -> None:
    """Write records under the versioned CSV schema.

    First line is a schema comment, then the fixed header; flags are
    0/1, floats carry 17 significant digits, and a blank
    witness_residual marks stochastic runs.
    """
    lines = [f"# schema: {CSV_SCHEMA}", CSV_HEADER]
    for rec in records:
        lines.append(
            ",".join(
                [
                    str(rec.k),
                    _fmt(rec.inf_err),
                    _fmt(rec.dist2_x1),
                    _fmt(rec.distinf_x1),
                    _fmt(rec.alpha),
                    "1" if rec.poss_flag else "0",
                    "1" if rec.tube_flag else "0",
                    "" if rec.witness_residual is None else _fmt(rec.witness_residual),
                    _fmt(rec.u),
                    _fmt(rec.v),
                    _fmt(rec.p),
                    _fmt(rec.q),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_records_csv(path) -> list[TrajectoryRecord]:
    """Read back a records CSV written by :func:`write_records_csv`."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# schema: {CSV_SCHEMA}":
            raise ValueError(f"{path}: missing or unknown schema line {first!r}")
        reader = csv.DictReader(fh)
        records = []
        for row in reader:
            records.append(
                TrajectoryRecord(
                    k=int(row["k"]),
                    inf_err=float(row["inf_err"]),
                    dist2_x1=float(row["dist2_x1"]),
                    distinf_x1=float(row["distinf_x1"]),
                    alpha=float(row["alpha"]),
                    poss_flag=row["poss_flag"] == "1",
                    tube_flag=row["tube_flag"] == "1",
                    witness_residual=(
                        None if row["witness_residual"] == "" else float(row["witness_residual"])
                    ),
                    u=float(row["u"]),
                    v=float(row["v"]),
                    p=float(row["p"]),
                    q=float(row["q"]),
                )
            )
    return records
