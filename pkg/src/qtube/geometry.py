"""Distances to the optimal line, the invariant tube, and entry horizons.

The line X1 = q* + span(1) consists of Q vectors whose greedy behavior is
identical to q*'s.  Around it sits a sup-norm tube that the Bellman
update maps into itself while shrinking its radius by gamma; once the
tube radius is below half the optimality gap, every point of the tube
has an optimal greedy policy.  This module measures distances to X1,
computes the horizons after which iterates stay in the greedy-optimal
set, and projects trajectories onto the plane spanned by the constant
direction and a transverse unit vector for plotting.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor, log

import numpy as np

from .mdp import ValidatedMdp, q_index
from .solver import OptimalityReport
from .spectral import spectral_radius
from .switching import restricted_matrix

DEFAULT_FRACTION = 0.4
BASIS_ATOL = 1e-12


def dist2_to_x1(q: np.ndarray, q_star: np.ndarray) -> float:
    """Euclidean distance from Q to the line q* + span(1).

    Equals the norm of the mean-free part of Q - q*; the mean is the
    exact minimizer of ``||Q - q_star - alpha * 1||_2`` over alpha.
    """
    e = np.asarray(q, dtype=float) - np.asarray(q_star, dtype=float)
    return float(np.linalg.norm(e - e.mean()))


def distinf_to_x1(q: np.ndarray, q_star: np.ndarray) -> float:
    """Sup-norm distance from Q to the line q* + span(1).

    The minimizer of ``max_i |e_i - alpha|`` is the midrange of e, so the
    distance is half the spread of e.
    """
    e = np.asarray(q, dtype=float) - np.asarray(q_star, dtype=float)
    return float(e.max() - e.min()) / 2.0


@dataclass
class TubeSpec:
    """Sup-norm tube of radius ``delta`` around the line q* + span(1).

    ``delta = fraction * delta_bar`` with ``fraction`` in (0, 0.5), which
    keeps the tube radius below half the optimality gap so the tube sits
    inside the greedy-optimal set and the Bellman update maps it into the
    gamma-shrunk tube.
    """

    q_star: np.ndarray
    delta_bar: float
    fraction: float
    delta: float

    def contains(self, q: np.ndarray) -> bool:
        return distinf_to_x1(q, self.q_star) <= self.delta


def make_tube(q_star: np.ndarray, delta_bar: float, fraction: float = DEFAULT_FRACTION) -> TubeSpec:
    """Build a TubeSpec, enforcing the radius precondition."""
    if delta_bar is None or not delta_bar > 0.0:
        raise ValueError(f"need a positive optimality gap, got {delta_bar!r}")
    if not 0.0 < fraction < 0.5:
        raise ValueError(f"tube fraction must lie in (0, 0.5), got {fraction!r}")
    return TubeSpec(
        q_star=np.asarray(q_star, dtype=float),
        delta_bar=float(delta_bar),
        fraction=float(fraction),
        delta=float(fraction) * float(delta_bar),
    )


def tube_from_report(report: OptimalityReport, fraction: float = DEFAULT_FRACTION) -> TubeSpec:
    return make_tube(report.q_star, report.delta_bar, fraction)


def k_basic(inf_err0: float, delta_bar: float, gamma: float) -> int:
    """Steps after which the raw contraction puts iterates in the POSS.

    Zero when the initial sup error is already below half the gap;
    otherwise the smallest k with ``gamma**k * inf_err0 < delta_bar / 2``.
    """
    if not delta_bar > 0.0:
        raise ValueError(f"need a positive optimality gap, got {delta_bar!r}")
    if inf_err0 < delta_bar / 2.0:
        return 0
    return floor(log(2.0 * inf_err0 / delta_bar) / -log(gamma)) + 1


def k_id(dist2_0: float, delta_bar: float, c: float, beta: float) -> int:
    """Steps after which the certified envelope puts iterates in the POSS.

    Mirrors :func:`k_basic` with the envelope ``c * beta**k * dist2_0``
    in place of the raw contraction; beta below gamma yields the faster
    identification horizon.
    """
    if not delta_bar > 0.0:
        raise ValueError(f"need a positive optimality gap, got {delta_bar!r}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if c * dist2_0 < delta_bar / 2.0:
        return 0
    return floor(log(2.0 * c * dist2_0 / delta_bar) / -log(beta)) + 1


@dataclass
class PlaneBasis:
    """Orthonormal pair spanning the plotting plane through q*.

    ``one_hat`` is the normalized constant vector; ``d_hat`` is a unit
    vector orthogonal to it.  ``label`` records how d_hat was chosen.
    """

    one_hat: np.ndarray
    d_hat: np.ndarray
    label: str = "user"

    def __post_init__(self):
        self.one_hat = np.asarray(self.one_hat, dtype=float)
        self.d_hat = np.asarray(self.d_hat, dtype=float)
        if self.one_hat.shape != self.d_hat.shape:
            raise ValueError("basis vectors must have equal length")
        for name, vec in (("one_hat", self.one_hat), ("d_hat", self.d_hat)):
            if abs(np.linalg.norm(vec) - 1.0) > BASIS_ATOL:
                raise ValueError(f"{name} is not a unit vector within {BASIS_ATOL}")
        if abs(float(self.one_hat @ self.d_hat)) > BASIS_ATOL:
            raise ValueError(f"basis vectors are not orthogonal within {BASIS_ATOL}")


def toy_basis() -> PlaneBasis:
    """The fixed plotting basis of the built-in 3-state/2-action example.

    d_hat contrasts the two actions of the first state:
    (1, 0, 0, -1, 0, 0) / sqrt(2) in action-major order.
    """
    n = 6
    one_hat = np.full(n, 1.0 / np.sqrt(n))
    d_hat = np.zeros(n)
    d_hat[q_index(0, 0, 3)] = 1.0 / np.sqrt(2.0)
    d_hat[q_index(0, 1, 3)] = -1.0 / np.sqrt(2.0)
    return PlaneBasis(one_hat=one_hat, d_hat=d_hat, label="toy-default")


def heuristic_basis(mdp: ValidatedMdp, report: OptimalityReport) -> PlaneBasis:
    """Transverse direction picked from the dominant restricted mode.

    Takes an eigenvector of the restricted map of the first optimal
    policy for its largest-modulus eigenvalue, keeps the real part (the
    imaginary part if that degenerates), removes the mean, and
    normalizes.  A pragmatic visualization choice; labeled as such.
    """
    n = mdp.num_pairs
    one_hat = np.full(n, 1.0 / np.sqrt(n))
    a_bar = restricted_matrix(mdp, report.pi_star)
    eigvals, eigvecs = np.linalg.eig(a_bar)
    lead = int(np.argmax(np.abs(eigvals)))
    d_hat = None
    for candidate in (eigvecs[:, lead].real, eigvecs[:, lead].imag):
        centered = candidate - candidate.mean()
        norm = np.linalg.norm(centered)
        if norm > 1e-10:
            d_hat = centered / norm
            break
    if d_hat is None:
        # degenerate mode; fall back to a fixed coordinate contrast
        d_hat = np.zeros(n)
        d_hat[0], d_hat[n - 1] = 1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0)
    if d_hat[np.argmax(np.abs(d_hat))] < 0.0:
        d_hat = -d_hat
    return PlaneBasis(one_hat=one_hat, d_hat=d_hat, label="visualization heuristic")


def default_basis(
    mdp: ValidatedMdp, report: OptimalityReport, d_hat: np.ndarray | None = None
) -> PlaneBasis:
    """Plotting basis: user-supplied d_hat, the fixed toy basis, or the heuristic."""
    if d_hat is not None:
        n = mdp.num_pairs
        return PlaneBasis(one_hat=np.full(n, 1.0 / np.sqrt(n)), d_hat=d_hat, label="user")
    if mdp.name == "toy3x2" and (mdp.num_states, mdp.num_actions) == (3, 2):
        return toy_basis()
    return heuristic_basis(mdp, report)


def plane_project(q: np.ndarray, q_star: np.ndarray, basis: PlaneBasis) -> tuple[float, float]:
    """Coordinates (u, v) of Q - q* in the plotting plane."""
    e = np.asarray(q, dtype=float) - np.asarray(q_star, dtype=float)
    return float(e @ basis.one_hat), float(e @ basis.d_hat)


def rotate_uv(u: float, v: float) -> tuple[float, float]:
    """Rotated coordinates p = (u - v) / sqrt2, q = (u + v) / sqrt2."""
    root2 = np.sqrt(2.0)
    return (u - v) / root2, (u + v) / root2


def circle_initials(
    q_star: np.ndarray, basis: PlaneBasis, radius: float, count: int
) -> list[np.ndarray]:
    """Starting vectors on an in-plane circle around q*.

    Point j sits at angle ``2 pi j / count`` from the one_hat axis.
    """
    if not radius > 0.0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count!r}")
    q_star = np.asarray(q_star, dtype=float)
    out = []
    for j in range(count):
        theta = 2.0 * np.pi * j / count
        out.append(q_star + radius * (np.cos(theta) * basis.one_hat + np.sin(theta) * basis.d_hat))
    return out


def strip_half_width(tube: TubeSpec, basis: PlaneBasis) -> float:
    """Half-width in v of the tube's intersection with the plotting plane.

    An in-plane point q* + u*one_hat + v*d_hat has sup-distance to X1
    equal to ``|v| * (max(d_hat) - min(d_hat)) / 2``, so the tube slice
    is exactly ``|v| <= 2 * delta / spread(d_hat)``.
    """
    spread = float(basis.d_hat.max() - basis.d_hat.min())
    return 2.0 * tube.delta / spread
