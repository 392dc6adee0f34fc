"""Eigenvalue moduli, ergodicity coefficients, and chain structure.

The quantities here feed the contraction certificates: the second
eigenvalue modulus of a policy kernel gives the exact decay rate of its
restricted error map, the Dobrushin coefficient measures one-step
contraction of the diameter seminorm, and the chain classification
detects the structural obstructions (multiple closed classes, periodic
classes) that pin the switching system's growth rate at gamma.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.sparse.csgraph import connected_components

from .mdp import ValidatedMdp, state_kernel


def eigen_moduli(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalue moduli of a square matrix, sorted in descending order.

    Uses the dense LAPACK eigensolver (balanced Hessenberg reduction
    followed by shifted QR iteration).  A ``LinAlgError`` propagates when
    the QR iteration fails to converge.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    return np.sort(np.abs(np.linalg.eigvals(matrix)))[::-1]


def spectral_radius(matrix: np.ndarray) -> float:
    """Largest eigenvalue modulus."""
    return float(eigen_moduli(matrix)[0])


def second_modulus(b: np.ndarray) -> float:
    """Second-largest eigenvalue modulus of a row-stochastic matrix.

    The Perron eigenvalue 1 is removed exactly once; if 1 has algebraic
    multiplicity above one, a copy of 1 remains and is returned.  For a
    1x1 matrix the result is 0.
    """
    b = np.asarray(b, dtype=float)
    eigs = np.linalg.eigvals(b)
    perron = int(np.argmin(np.abs(eigs - 1.0)))
    if abs(eigs[perron] - 1.0) > 1e-6:
        raise ValueError(
            f"no eigenvalue near 1 (closest {eigs[perron]!r}); matrix is not row-stochastic"
        )
    rest = np.delete(eigs, perron)
    return float(np.abs(rest).max()) if rest.size else 0.0


def dobrushin(b: np.ndarray, return_discrepancy: bool = False):
    """Dobrushin ergodicity coefficient of a row-stochastic matrix.

    Computed two ways: ``1 - min over row pairs of the overlap`` and
    ``max over row pairs of the total-variation distance``.  The overlap
    form is returned; the absolute discrepancy between the two (zero in
    exact arithmetic) is available on request.
    """
    b = np.asarray(b, dtype=float)
    m = b.shape[0]
    if m == 1:
        return (0.0, 0.0) if return_discrepancy else 0.0
    # pairwise reductions, O(m^2 n) time; matrices here are desk-scale
    overlap = np.minimum(b[:, None, :], b[None, :, :]).sum(axis=2)
    tv = 0.5 * np.abs(b[:, None, :] - b[None, :, :]).sum(axis=2)
    pair = ~np.eye(m, dtype=bool)
    tau_overlap = float(1.0 - overlap[pair].min())
    tau_tv = float(tv[pair].max())
    if return_discrepancy:
        return tau_overlap, abs(tau_overlap - tau_tv)
    return tau_overlap


def diameter(v: np.ndarray) -> float:
    """Diameter seminorm max(v) - min(v)."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("diameter of an empty vector is undefined")
    return float(v.max() - v.min())


def is_scrambling(b: np.ndarray) -> bool:
    """Whether every pair of rows shares a strictly positive column.

    Positivity is exact (no tolerance): the inputs are products of exact
    kernels, where a structural zero stays an exact zero.
    """
    support = np.asarray(b) > 0.0
    shared = support.astype(np.int64) @ support.astype(np.int64).T
    return bool((shared > 0).all())


@dataclass
class ChainStructure:
    """Closed-class decomposition of a finite Markov chain.

    ``closed_classes`` are the communicating classes without outgoing
    edges, each a sorted state tuple, listed by smallest member;
    ``periods`` aligns with them.  States in no closed class are
    transient.
    """

    closed_classes: list[tuple[int, ...]]
    transient_states: tuple[int, ...]
    periods: list[int]
    is_unichain: bool
    is_aperiodic: bool


def _class_period(adjacency: list[list[int]], members: tuple[int, ...]) -> int:
    """Period of a strongly connected closed class.

    Breadth-first levels from an arbitrary root; the gcd of
    ``level[u] + 1 - level[v]`` over all in-class edges (u, v) equals the
    gcd of the class's cycle lengths.
    """
    member_set = set(members)
    root = members[0]
    level = {root: 0}
    queue = deque([root])
    g = 0
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in member_set:
                continue
            if v in level:
                g = gcd(g, level[u] + 1 - level[v])
            else:
                level[v] = level[u] + 1
                queue.append(v)
    return g if g > 0 else 1


def classify_chain(p: np.ndarray) -> ChainStructure:
    """Closed classes, transient states, and periods of a stochastic matrix."""
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    support = p > 0.0
    count, labels = connected_components(support, directed=True, connection="strong")
    classes = [tuple(np.flatnonzero(labels == c).tolist()) for c in range(count)]
    classes.sort(key=lambda members: members[0])

    adjacency = [np.flatnonzero(support[s]).tolist() for s in range(n)]
    closed_classes = []
    periods = []
    transient = []
    for members in classes:
        member_set = set(members)
        closed = all(v in member_set for u in members for v in adjacency[u])
        if closed:
            closed_classes.append(members)
            periods.append(_class_period(adjacency, members))
        else:
            transient.extend(members)
    return ChainStructure(
        closed_classes=closed_classes,
        transient_states=tuple(sorted(transient)),
        periods=periods,
        is_unichain=len(closed_classes) == 1,
        is_aperiodic=all(per == 1 for per in periods),
    )


def chain_structure(mdp: ValidatedMdp, policy: np.ndarray) -> ChainStructure:
    """Chain classification of the state chain induced by a policy."""
    return classify_chain(state_kernel(mdp, policy))
