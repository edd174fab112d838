"""Grouped-design data model: partitions, per-group orthonormalization and
the map back from standardized coefficients.

A grouped design splits the columns of X into disjoint index sets.  Each
group block is factored as ``X[:, I_i] = U_i @ R_i`` with U_i orthonormal
and R_i of full row rank, so the whole problem can be posed on the stacked
orthonormal design.  Only the per-group fitted norms ``||X[:, I_i] b[I_i]||``
are identified; the minimum-norm preimage fixes a concrete coefficient
vector.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint column groups in order of first appearance.

    Attributes
    ----------
    groups : tuple of ndarray
        Column index arrays (0-based), one per group.
    labels : tuple
        Original group identifiers, parallel to ``groups``.
    weights : ndarray or None
        Positive per-group weights; None means "default at standardization
        time" (square root of the group rank).
    """

    groups: tuple
    labels: tuple = ()
    weights: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return sum(len(g) for g in self.groups)

    def with_weights(self, weights) -> "GroupPartition":
        weights = _check_weights(weights, self.m)
        return GroupPartition(self.groups, self.labels, weights)


def _check_weights(weights, m):
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (m,):
        raise ValueError("expected %d group weights, got shape %s"
                         % (m, weights.shape))
    if np.any(weights <= 0):
        raise ValueError("group weights must be positive")
    return weights


def build_partition(group_labels, weights=None) -> GroupPartition:
    """Build a partition from a per-column label sequence.

    Groups are ordered by first appearance of their label; labels are
    opaque (gaps and arbitrary hashables are fine).

    Parameters
    ----------
    group_labels : sequence
        One label per design column.
    weights : array-like, optional
        One positive weight per group, in first-appearance order.

    Returns
    -------
    GroupPartition
    """
    labels = list(group_labels)
    if len(labels) == 0:
        raise ValueError("empty design: no group labels given")
    seen: dict = {}
    for j, lab in enumerate(labels):
        seen.setdefault(lab, []).append(j)
    groups = tuple(np.asarray(idx, dtype=np.intp) for idx in seen.values())
    if weights is not None:
        weights = _check_weights(weights, len(groups))
    return GroupPartition(groups, tuple(seen.keys()), weights)


@dataclass(frozen=True)
class StandardizedDesign:
    """Per-group orthonormalized design.

    Attributes
    ----------
    partition : GroupPartition
        Input partition with weights filled in.
    matrix : ndarray, shape (n, p_tilde)
        Stacked orthonormal blocks; columns of block i span X[:, I_i].
    factors : tuple of ndarray
        Full-row-rank factors R_i with ``matrix block i @ R_i = X[:, I_i]``.
    offsets : ndarray, shape (m + 1,)
        Block boundaries: block i occupies columns offsets[i]:offsets[i+1].
    """

    partition: GroupPartition
    matrix: np.ndarray
    factors: tuple
    offsets: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.partition.p

    @property
    def p_tilde(self) -> int:
        return self.matrix.shape[1]

    @property
    def m(self) -> int:
        return self.partition.m

    @property
    def ranks(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def weights(self) -> np.ndarray:
        return self.partition.weights

    def block(self, i) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])


def standardize(X, partition, rank_tol=1e-10) -> StandardizedDesign:
    """Orthonormalize each group block of X.

    Each block is factored by thin SVD; the numerical rank keeps singular
    values at least ``rank_tol`` times the block's largest one.  Factor row
    signs are canonicalized (largest-magnitude entry positive) so the
    factorization is deterministic.  Missing partition weights default to
    the square root of the group rank.

    Parameters
    ----------
    X : ndarray, shape (n, p)
    partition : GroupPartition
    rank_tol : float
        Relative singular-value cutoff for the per-group rank.

    Returns
    -------
    StandardizedDesign
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("design matrix must be two-dimensional")
    if partition.p != X.shape[1]:
        raise ValueError("partition covers %d columns but design has %d"
                         % (partition.p, X.shape[1]))
    blocks = []
    factors = []
    ranks = []
    for idx, g in enumerate(partition.groups):
        sub = X[:, g]
        U, s, Vt = np.linalg.svd(sub, full_matrices=False)
        if s.size == 0 or s[0] <= 0.0:
            raise ValueError("group %d is all zero; every group needs at "
                             "least one nonzero column" % idx)
        rank = int(np.count_nonzero(s >= rank_tol * s[0]))
        U = U[:, :rank].copy()
        R = s[:rank, None] * Vt[:rank]
        # canonical signs: make each factor row's largest entry positive
        flip = np.sign(R[np.arange(rank), np.argmax(np.abs(R), axis=1)])
        flip[flip == 0] = 1.0
        U *= flip
        R *= flip[:, None]
        blocks.append(U)
        factors.append(R)
        ranks.append(rank)
    offsets = np.concatenate([[0], np.cumsum(ranks)]).astype(np.intp)
    weights = partition.weights
    if weights is None:
        weights = np.sqrt(np.asarray(ranks, dtype=np.float64))
    part = GroupPartition(partition.groups, partition.labels, weights)
    return StandardizedDesign(part, np.hstack(blocks), tuple(factors),
                              offsets)


def block_norms(v, offsets):
    """Euclidean norm of each contiguous block of v."""
    v = np.asarray(v)
    return np.sqrt(np.add.reduceat(v * v, offsets[:-1]))


def group_effects(design, b, partition=None):
    """Per-group fitted-contribution norms ``||X[:, I_i] b[I_i]||``.

    Parameters
    ----------
    design : ndarray or StandardizedDesign
        Raw design matrix (requires ``partition``) or a standardized design,
        in which case ``b`` lives in standardized coordinates and the
        effects are plain block norms.
    b : array-like
        Coefficient vector: length p (raw) or p_tilde (standardized).
    partition : GroupPartition, optional
        Required with a raw matrix.

    Returns
    -------
    ndarray, shape (m,)
    """
    b = np.asarray(b, dtype=np.float64)
    if isinstance(design, StandardizedDesign):
        if b.shape != (design.p_tilde,):
            raise ValueError("expected standardized coefficients of length "
                             "%d, got %s" % (design.p_tilde, b.shape))
        return block_norms(b, design.offsets)
    X = np.asarray(design, dtype=np.float64)
    if partition is None:
        raise ValueError("a raw design matrix needs an explicit partition")
    if b.shape != (X.shape[1],):
        raise ValueError("expected coefficients of length %d, got %s"
                         % (X.shape[1], b.shape))
    return np.array([np.linalg.norm(X[:, g] @ b[g])
                     for g in partition.groups])


def backmap(design, c):
    """Map standardized coefficients back to a length-p coefficient vector.

    Solves ``R_i beta[I_i] = c_block`` per group, taking the minimum-norm
    solution, so the group effects of the result equal the block norms of
    ``c`` up to factorization error.

    Parameters
    ----------
    design : StandardizedDesign
    c : array-like, length p_tilde

    Returns
    -------
    beta : ndarray, shape (p,)
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (design.p_tilde,):
        raise ValueError("expected standardized coefficients of length %d, "
                         "got %s" % (design.p_tilde, c.shape))
    beta = np.zeros(design.p)
    for i, g in enumerate(design.partition.groups):
        beta[g] = np.linalg.pinv(design.factors[i]) @ c[design.block(i)]
    return beta
