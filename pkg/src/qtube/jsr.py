"""Certified bounds on the joint spectral radius of the restricted family.

The exact JSR is intractable in general, so this module reports certified
intervals.  Upper bounds come from product norms at finite depth, from
scrambling products through the Dobrushin coefficient, and from uniform
overlap (Doeblin and common-descendant) conditions; they are aggregated
with the unconditional gamma baseline.  Lower bounds come from spectral
radii of finite products.  Structural obstructions (a policy chain with
several closed classes, a periodic class, or a unit second eigenvalue)
prove that the rate cannot drop below gamma at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mdp import ValidatedMdp, enumerate_policies, policy_kernel, stack_transitions
from .solver import OptimalityReport, enumerate_optimal_policies, solve_qstar
from .spectral import chain_structure, is_scrambling, second_modulus, spectral_radius
from .switching import projected_family

DEFAULT_DEPTH = 3
DEFAULT_CAP = 4096
BETA_FACTOR = 1.05
STRICT_SLACK = 1e-9


def _product_levels(mats: list[np.ndarray], depth: int, cap: int):
    """Yield (level, products) with all length-``level`` products, capped.

    Stops before any level whose product count would exceed ``cap``; the
    caller sees only exhaustive levels.
    """
    m = len(mats)
    if m == 0:
        raise ValueError("empty matrix family")
    if m > cap:
        raise ValueError(f"{m} matrices exceed the enumeration cap of {cap}")
    prods = None
    count = 1
    for level in range(1, depth + 1):
        count *= m
        if count > cap:
            return
        prods = list(mats) if level == 1 else [a @ p for a in mats for p in prods]
        yield level, prods


def product_norm_bound(mats: list[np.ndarray], depth: int, cap: int = DEFAULT_CAP) -> float:
    """Upper bound on the family JSR from exhaustive product 2-norms.

    For each length l up to ``depth`` the maximal 2-norm over all
    products, taken to the power 1/l, bounds the JSR; the minimum over
    the levels is returned.  Levels beyond the enumeration cap are
    skipped, so the bound uses the largest feasible depth.
    """
    best = np.inf
    for level, prods in _product_levels(mats, depth, cap):
        worst = max(np.linalg.norm(p, 2) for p in prods)
        best = min(best, worst ** (1.0 / level))
    return float(best)


def spectral_lower_bound(mats: list[np.ndarray], depth: int, cap: int = DEFAULT_CAP) -> float:
    """Lower bound on the family JSR from spectral radii of products."""
    best = 0.0
    for level, prods in _product_levels(mats, depth, cap):
        worst = max(spectral_radius(p) for p in prods)
        best = max(best, worst ** (1.0 / level))
    return float(best)


def _min_pair_overlap(b: np.ndarray) -> float:
    """Smallest row-pair overlap sum of a stochastic matrix."""
    m = b.shape[0]
    if m == 1:
        return 1.0
    overlap = np.minimum(b[:, None, :], b[None, :, :]).sum(axis=2)
    return float(overlap[~np.eye(m, dtype=bool)].min())


@dataclass
class ScramblingCertificate:
    """Scrambling check of all length-``length`` kernel products.

    ``eta`` is the least row-pair overlap over all products; when it is
    positive every product is scrambling and ``bound`` certifies the
    restricted JSR strictly below gamma.
    """

    length: int
    all_scrambling: bool
    eta: float
    bound: float


def scrambling_certificate(
    mdp: ValidatedMdp,
    length: int = 1,
    policies: list[np.ndarray] | None = None,
    cap: int = DEFAULT_CAP,
) -> ScramblingCertificate:
    """Certify contraction through scrambling of kernel products.

    Enumerates all policy sequences of the given length, forms the
    products of their kernels, and returns the conjunction of the
    scrambling checks, the minimal overlap ``eta``, and the resulting
    bound ``gamma * (1 - eta) ** (1 / length)``.
    """
    if policies is None:
        policies = enumerate_policies(mdp, cap)
    kernels = [policy_kernel(mdp, pol) for pol in policies]
    if len(kernels) ** length > cap:
        raise ValueError(
            f"{len(kernels)}^{length} kernel products exceed the enumeration cap of {cap}"
        )
    all_scrambling = True
    eta = np.inf
    for level, prods in _product_levels(kernels, length, cap):
        if level < length:
            continue
        for prod in prods:
            all_scrambling &= is_scrambling(prod)
            eta = min(eta, _min_pair_overlap(prod))
    bound = mdp.gamma * (1.0 - eta) ** (1.0 / length)
    return ScramblingCertificate(
        length=length, all_scrambling=bool(all_scrambling), eta=float(eta), bound=float(bound)
    )


class OverlapBounds(NamedTuple):
    p_min: float
    eps_doeblin: float


def overlap_bounds(mdp: ValidatedMdp) -> OverlapBounds:
    """Uniform overlap quantities of the stacked transition rows.

    ``p_min`` is the best probability mass that all state-action rows
    place on one common next state; ``eps_doeblin`` is the total mass of
    the columnwise-minimum measure.  They imply the JSR bounds
    ``gamma * (1 - p_min)`` and ``gamma * (1 - eps_doeblin)``.
    """
    colmin = stack_transitions(mdp).min(axis=0)
    return OverlapBounds(p_min=float(colmin.max()), eps_doeblin=float(colmin.sum()))


@dataclass
class ObstructionWitness:
    """A policy whose chain structure pins the restricted JSR at gamma."""

    policy: tuple[int, ...]
    reason: str


def obstruction_certificate(
    mdp: ValidatedMdp, policies: list[np.ndarray] | None = None, cap: int = DEFAULT_CAP
) -> ObstructionWitness | None:
    """Search the policies for a structural obstruction to strictness.

    A policy chain with more than one closed class, a periodic closed
    class, or a second eigenvalue modulus within 1e-8 of 1 puts a
    unit-modulus mode into the restricted family, so no certificate can
    place its JSR below gamma.
    """
    if policies is None:
        policies = enumerate_policies(mdp, cap)
    for pol in policies:
        structure = chain_structure(mdp, pol)
        pol_tuple = tuple(int(a) for a in pol)
        if not structure.is_unichain:
            return ObstructionWitness(
                policy=pol_tuple,
                reason=f"chain has {len(structure.closed_classes)} closed classes",
            )
        if not structure.is_aperiodic:
            idx = next(i for i, per in enumerate(structure.periods) if per > 1)
            return ObstructionWitness(
                policy=pol_tuple,
                reason=(
                    f"closed class {structure.closed_classes[idx]} has period "
                    f"{structure.periods[idx]}"
                ),
            )
        sm = second_modulus(policy_kernel(mdp, pol))
        if sm >= 1.0 - 1e-8:
            return ObstructionWitness(
                policy=pol_tuple, reason=f"second eigenvalue modulus {sm!r} is 1 within 1e-8"
            )
    return None


@dataclass
class LyapunovConstants:
    """Constructive constants of the norm-equivalent Lyapunov envelope.

    ``c0`` bounds every product norm by ``c0 * eta**k``; ``c_sq`` is
    ``c0**2 / (1 - (eta / beta)**2)`` and ``c = sqrt(c_sq)`` is the
    envelope prefactor in ``dist <= c * beta**k * dist0``.
    """

    c0: float
    c_sq: float
    c: float


def lyapunov_constants(
    mats: list[np.ndarray], eta: float, beta: float, depth: int, cap: int = DEFAULT_CAP
) -> LyapunovConstants:
    """Envelope constants certified by a depth-``depth`` product bound.

    Requires ``0 < eta < beta < 1`` and that every length-``depth``
    product has 2-norm at most ``eta ** depth``; splitting any horizon k
    into blocks of length ``depth`` plus a remainder then bounds every
    product norm by ``c0 * eta**k``, which the geometric series in
    ``(eta / beta)**2`` turns into the envelope prefactor.

    Raises
    ------
    ValueError
        If the ordering precondition fails or eta is not certified at
        the given depth.
    """
    if not 0.0 < eta < beta < 1.0:
        raise ValueError(f"need 0 < eta < beta < 1, got eta={eta!r}, beta={beta!r}")
    max_norms = {0: 1.0}
    for level, prods in _product_levels(mats, depth, cap):
        max_norms[level] = max(float(np.linalg.norm(p, 2)) for p in prods)
    if depth not in max_norms:
        raise ValueError(f"product enumeration at depth {depth} exceeds the cap of {cap}")
    if max_norms[depth] > eta**depth * (1.0 + 1e-12):
        raise ValueError(
            f"eta not certified at depth {depth}: max product norm {max_norms[depth]!r} "
            f"exceeds eta^{depth} = {eta**depth!r}"
        )
    c0 = max(max_norms[k] / eta**k for k in range(depth))
    c0 = max(1.0, c0)
    c_sq = c0**2 / (1.0 - (eta / beta) ** 2)
    return LyapunovConstants(c0=float(c0), c_sq=float(c_sq), c=float(np.sqrt(c_sq)))


@dataclass
class EnvelopeConstants:
    """Certified geometric envelope ``dist <= c * beta**k * dist0``."""

    eta: float
    beta: float
    depth: int
    c0: float
    c_sq: float
    c: float


@dataclass
class JsrCertificate:
    """Certified interval for the restricted JSR of a policy family.

    ``method_trace`` lists (method, depth, value) rows for every bound
    computed; ``upper_bound`` is their minimum (never above gamma),
    ``lower_bound`` the maximum of the spectral lower bounds and, when an
    obstruction exists, gamma itself.  ``strict`` is a tri-state verdict
    on whether the JSR lies strictly below gamma.
    """

    family_label: str
    gamma: float
    depth: int
    num_members: int
    upper_bound: float
    lower_bound: float
    strict: str
    method_trace: list[tuple[str, int, float]]
    p_min: float
    eps_doeblin: float
    envelope: EnvelopeConstants | None
    obstruction: ObstructionWitness | None
    notes: list[str]


def certify(
    mdp: ValidatedMdp,
    depth: int = DEFAULT_DEPTH,
    family_label: str = "full",
    report: OptimalityReport | None = None,
    cap: int = DEFAULT_CAP,
    beta_factor: float = BETA_FACTOR,
) -> JsrCertificate:
    """Run every certification method and aggregate the verdict.

    ``family_label`` selects the policies: "full" takes every
    deterministic policy, "optimal" the policies that are greedy for
    q_star (solved here unless a report is passed).  Product enumeration
    beyond the cap downgrades to the largest exhaustive depth with a
    note; deeper levels are then sampled (fixed seed) to tighten only the
    lower bound, since upper bounds require exhaustiveness.
    """
    if family_label == "full":
        policies = enumerate_policies(mdp, cap)
    elif family_label == "optimal":
        if report is None:
            report = solve_qstar(mdp)
        policies = enumerate_optimal_policies(report, cap)
    else:
        raise ValueError(f"unknown family label {family_label!r}")

    family = projected_family(mdp, policies)
    mats = family.matrices
    notes: list[str] = []
    trace: list[tuple[str, int, float]] = [("gamma-baseline", 0, mdp.gamma)]
    uppers = [mdp.gamma]
    lowers = [0.0]

    if len(mats) == 1:
        # singleton family: the JSR is the spectral radius itself
        exact = spectral_radius(mats[0])
        trace.append(("singleton-exact", 1, exact))
        uppers.append(exact)
        lowers.append(exact)

    best_eta: float | None = None
    best_eta_depth = 0
    deepest = 0
    for level, prods in _product_levels(mats, depth, cap):
        deepest = level
        norm2 = max(float(np.linalg.norm(p, 2)) for p in prods)
        norminf = max(float(np.linalg.norm(p, np.inf)) for p in prods)
        rho = max(spectral_radius(p) for p in prods)
        val2 = norm2 ** (1.0 / level)
        trace.append(("product-norm-2", level, val2))
        trace.append(("product-norm-inf", level, norminf ** (1.0 / level)))
        trace.append(("spectral", level, rho ** (1.0 / level)))
        uppers.append(val2)
        uppers.append(norminf ** (1.0 / level))
        lowers.append(rho ** (1.0 / level))
        if best_eta is None or val2 < best_eta:
            best_eta, best_eta_depth = val2, level
    if deepest < depth:
        notes.append(
            f"product enumeration capped at depth {deepest} of requested {depth}; "
            f"deeper levels sampled for the lower bound only"
        )
        rng = np.random.Generator(np.random.Philox(0))
        for level in range(deepest + 1, depth + 1):
            draws = min(cap, 256)
            worst = 0.0
            for _ in range(draws):
                seq = rng.integers(0, len(mats), size=level)
                prod = mats[seq[0]]
                for idx in seq[1:]:
                    prod = mats[idx] @ prod
                worst = max(worst, spectral_radius(prod))
            trace.append(("spectral-sampled", level, worst ** (1.0 / level)))
            lowers.append(worst ** (1.0 / level))

    for level in range(1, deepest + 1):
        if len(policies) ** level > cap:
            break
        scram = scrambling_certificate(mdp, level, policies=policies, cap=cap)
        trace.append(("scrambling", level, scram.bound))
        trace.append(("scrambling-eta", level, scram.eta))
        uppers.append(scram.bound)

    p_min, eps_doeblin = overlap_bounds(mdp)
    trace.append(("common-descendant", 1, mdp.gamma * (1.0 - p_min)))
    trace.append(("doeblin", 1, mdp.gamma * (1.0 - eps_doeblin)))
    uppers.append(mdp.gamma * (1.0 - p_min))
    uppers.append(mdp.gamma * (1.0 - eps_doeblin))

    obstruction = obstruction_certificate(mdp, policies)
    if obstruction is not None:
        trace.append(("obstruction", 0, mdp.gamma))
        lowers.append(mdp.gamma)

    upper = float(min(uppers))
    lower = float(max(lowers))
    if lower > upper:
        # eigenvalues of defective near-nilpotent products carry
        # eps**(1/k) noise; the norm-based upper bound is the reliable side
        notes.append(
            f"spectral lower bound {lower:.6g} exceeded the certified upper "
            f"bound and was clamped"
        )
        lower = upper
    if obstruction is not None or lower >= mdp.gamma - STRICT_SLACK:
        strict = "proven-not-strict"
    elif upper < mdp.gamma - STRICT_SLACK:
        strict = "proven-strict"
    else:
        strict = "undetermined"

    envelope = None
    if best_eta is not None and 0.0 < best_eta:
        beta = beta_factor * best_eta
        if beta < 1.0:
            consts = lyapunov_constants(mats, best_eta, beta, best_eta_depth, cap)
            envelope = EnvelopeConstants(
                eta=best_eta,
                beta=beta,
                depth=best_eta_depth,
                c0=consts.c0,
                c_sq=consts.c_sq,
                c=consts.c,
            )
        else:
            notes.append(
                f"no envelope constants: beta = {beta_factor} * eta = {beta:.6g} is not below 1"
            )

    return JsrCertificate(
        family_label=family_label,
        gamma=mdp.gamma,
        depth=deepest if deepest else depth,
        num_members=len(mats),
        upper_bound=upper,
        lower_bound=lower,
        strict=strict,
        method_trace=trace,
        p_min=p_min,
        eps_doeblin=eps_doeblin,
        envelope=envelope,
        obstruction=obstruction,
        notes=notes,
    )
