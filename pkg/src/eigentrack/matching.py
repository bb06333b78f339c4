"""Pairwise matching of two snapshots over a local subinterval.

The cost of pairing eigenpair j of the first snapshot with eigenpair l of
the second combines the eigenvalue distance and the sign-resolved
eigenvector distance in the b-norm.  An exact rectangular minimum-cost
assignment (solved by a shortest-augmenting-path Hungarian method, with ties
broken toward the lexicographically smallest assignment) then reorders the
snapshot with more eigenpairs so matched pairs occupy equal positions.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from eigentrack.eigensolver import Snapshot



@dataclass(frozen=True)
class CostMatrix:
    """Pairwise dissimilarity of eigenpairs across a subinterval."""

    values: np.ndarray                      # (n_a, n_b), nonnegative, finite
    w1: float
    w2: float
    mu_a: tuple[float, ...] | None = None
    mu_b: tuple[float, ...] | None = None

    @property
    def midpoint(self) -> tuple[float, ...] | None:
        if self.mu_a is None or self.mu_b is None:
            return None
        return tuple((a + b) / 2.0 for a, b in zip(self.mu_a, self.mu_b))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class Assignment:
    """The optimal pairing between the eigenpairs of two snapshots.

    ``sigma[j]`` is the index on the side with more eigenpairs matched to
    index j on the side with fewer (0-based; both sides in their original
    ascending-eigenvalue order).  ``reorder`` is the full permutation applied
    to the reordered side: matched indices first, unmatched ones appended in
    ascending order.  When the sides have equal length the second snapshot is
    the reordered one.
    """

    sigma: tuple[int, ...]
    total_cost: float
    reordered_side: str                     # 'a' or 'b'
    reorder: tuple[int, ...]

    @property
    def n_matched(self) -> int:
        return len(self.sigma)

    def pairs(self) -> list[tuple[int, int]]:
        """Matched (index_a, index_b) pairs in original indices."""
        if self.reordered_side == "b":
            return [(j, s) for j, s in enumerate(self.sigma)]
        return [(s, j) for j, s in enumerate(self.sigma)]

    def original_index(self, side: str, position: int) -> int:
        """Original index of the eigenpair sitting at `position` after reordering."""
        if side == self.reordered_side:
            return self.reorder[position]
        return position


def cost_matrix(
    snap_a: Snapshot, snap_b: Snapshot, B: sp.spmatrix, w1: float, w2: float
) -> CostMatrix:
    """Build the matching cost matrix for two snapshots on the same mesh.

    Entry (j, l) is w1 * |lambda_j - lambda_l| plus w2 times the smaller of
    the b-norms of u_j - u_l and u_j + u_l; the minimum over both signs makes
    the cost insensitive to the solver's arbitrary eigenvector signs.
    """
    if snap_a.fingerprint != snap_b.fingerprint:
        raise ValueError("snapshots were computed on different meshes")
    la, lb = snap_a.eigenvalues, snap_b.eigenvalues
    va, vb = snap_a.eigenvectors, snap_b.eigenvectors
    values = w1 * np.abs(la[:, None] - lb[None, :])
    if w2 != 0.0 and len(la) and len(lb):
        bva, bvb = B @ va, B @ vb
        vec = np.empty((len(la), len(lb)))
        for j in range(len(la)):
            diff = va[:, j : j + 1] - vb
            bdiff = bva[:, j : j + 1] - bvb
            summ = va[:, j : j + 1] + vb
            bsumm = bva[:, j : j + 1] + bvb
            d2 = np.einsum("ij,ij->j", diff, bdiff)
            s2 = np.einsum("ij,ij->j", summ, bsumm)
            vec[j] = np.sqrt(np.maximum(np.minimum(d2, s2), 0.0))
        values = values + w2 * vec
    return CostMatrix(
        values=values, w1=w1, w2=w2, mu_a=snap_a.point.phys, mu_b=snap_b.point.phys
    )


def _augmenting_path_lap(cost: np.ndarray) -> np.ndarray:
    """Exact min-cost assignment for a rows <= cols matrix.

    Shortest-augmenting-path method with row/column potentials; returns the
    column matched to each row.
    """
    r, c = cost.shape
    u = np.zeros(r)
    v = np.zeros(c + 1)
    row_of_col = np.full(c + 1, -1, dtype=int)  # column c is the virtual start
    way = np.zeros(c + 1, dtype=int)
    for i in range(r):
        row_of_col[c] = i
        j0 = c
        minv = np.full(c + 1, np.inf)
        used = np.zeros(c + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            delta, j1 = np.inf, -1
            for j in range(c):
                if used[j]:
                    continue
                cur = cost[i0, j] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(c + 1):
                if used[j]:
                    u[row_of_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if row_of_col[j0] == -1:
                break
        while j0 != c:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    col_of_row = np.empty(r, dtype=int)
    for j in range(c):
        if row_of_col[j] >= 0:
            col_of_row[row_of_col[j]] = j
    return col_of_row


def _sequential_sum(cost: np.ndarray, cols) -> float:
    # plain left-to-right summation so totals are reproducible bit for bit
    total = 0.0
    for i, j in enumerate(cols):
        total += float(cost[i, j])
    return total


def _lexicographic_assignment(cost: np.ndarray) -> np.ndarray:
    """Among all minimum-cost assignments, pick the lexicographically
    smallest column sequence (rows taken in order).

    Candidate completions are compared against the optimum by re-summing the
    full assignment in row order, so the comparison is exact: the solver's
    own assignment always qualifies, and only genuine float-level ties are
    broken lexicographically.
    """
    r, c = cost.shape
    base = _augmenting_path_lap(cost)
    total = _sequential_sum(cost, base)
    chosen = np.empty(r, dtype=int)
    avail = list(range(c))
    for i in range(r):
        rest = np.arange(i + 1, r)
        picked = -1
        for cand in avail:
            rest_cols = [j for j in avail if j != cand]
            sub = cost[np.ix_(rest, rest_cols)]
            completion = _augmenting_path_lap(sub) if len(rest) else []
            full = list(chosen[:i]) + [cand] + [rest_cols[j] for j in completion]
            if _sequential_sum(cost, full) == total:
                picked = cand
                break
        assert picked >= 0, "no feasible column during tie refinement"
        chosen[i] = picked
        avail.remove(picked)
    return chosen


def solve_assignment(cost: CostMatrix) -> Assignment:
    """Solve the rectangular assignment problem for a cost matrix.

    The shorter side's indices are injectively matched into the longer side;
    optimality is exact, not heuristic.  Empty snapshots yield an empty
    assignment.
    """
    values = np.asarray(cost.values, dtype=float)
    n_a, n_b = values.shape
    if not np.all(np.isfinite(values)) or (values.size and values.min() < 0):
        raise ValueError("cost matrix must be finite and nonnegative")
    if n_a == 0 or n_b == 0:
        side = "b" if n_a <= n_b else "a"
        n_long = max(n_a, n_b)
        return Assignment(
            sigma=(), total_cost=0.0, reordered_side=side, reorder=tuple(range(n_long))
        )
    work = values if n_a <= n_b else values.T
    sigma = _lexicographic_assignment(work)
    total = _sequential_sum(work, sigma)
    side = "b" if n_a <= n_b else "a"
    n_long = max(n_a, n_b)
    unmatched = sorted(set(range(n_long)) - set(sigma.tolist()))
    return Assignment(
        sigma=tuple(int(s) for s in sigma),
        total_cost=total,
        reordered_side=side,
        reorder=tuple(int(s) for s in sigma) + tuple(unmatched),
    )


def _permute(snap: Snapshot, perm: tuple[int, ...]) -> Snapshot:
    idx = np.asarray(perm, dtype=int)
    return replace(
        snap,
        eigenvalues=snap.eigenvalues[idx],
        eigenvectors=snap.eigenvectors[:, idx],
    )


def apriori_match(
    snap_a: Snapshot, snap_b: Snapshot, B: sp.spmatrix, w1: float, w2: float
) -> tuple[Assignment, Snapshot, Snapshot]:
    """Match two snapshots and reorder the one with more eigenpairs.

    After the call, position j of both returned snapshots holds the j-th
    matched pair for j below the shorter length; the longer side's unmatched
    eigenpairs follow in ascending-eigenvalue order.
    """
    assignment = solve_assignment(cost_matrix(snap_a, snap_b, B, w1, w2))
    if assignment.reordered_side == "b":
        return assignment, snap_a, _permute(snap_b, assignment.reorder)
    return assignment, _permute(snap_a, assignment.reorder), snap_b
