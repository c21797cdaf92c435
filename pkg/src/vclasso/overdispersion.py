"""Moment estimation of Dirichlet-multinomial overdispersion.

Replicate samples that share a composition let us estimate the
concentration alpha through theta = 1/(alpha + 1): an ANOVA-style moment
estimator compares between-replicate and within-replicate mean squares of
the component proportions, pooled across components. theta = 0 (alpha =
+inf) is the multinomial; larger theta means more extra-multinomial
variance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .counts import CountMatrix

_THETA_CEIL = 1.0 - 1e-12


@dataclass(frozen=True)
class ReplicateGroup:
    """Rows of a CountMatrix known to share one composition and one alpha."""

    member_rows: tuple[int, ...]
    group_id: str = ""

    def __post_init__(self):
        rows = tuple(int(i) for i in self.member_rows)
        if len(set(rows)) != len(rows):
            raise ValueError(f"group {self.group_id!r} lists duplicate rows: {rows}")
        if any(i < 0 for i in rows):
            raise ValueError(f"group {self.group_id!r} has negative row indices")
        object.__setattr__(self, "member_rows", rows)

    @property
    def size(self) -> int:
        return len(self.member_rows)


@dataclass(frozen=True)
class AlphaEstimate:
    """alpha_hat = (1 - theta_hat)/theta_hat, +inf when theta_hat clamps to 0."""

    alpha_hat: float
    theta_hat: float
    group_id: str
    n_replicates: int
    total_reads: int

    def __post_init__(self):
        if not 0.0 <= self.theta_hat < 1.0:
            raise ValueError(f"theta_hat must lie in [0, 1), got {self.theta_hat}")
        if self.theta_hat == 0.0:
            ok = np.isinf(self.alpha_hat)
        else:
            ok = np.isclose(self.alpha_hat, (1.0 - self.theta_hat) / self.theta_hat)
        if not ok:
            raise ValueError(
                f"alpha_hat {self.alpha_hat} inconsistent with theta_hat {self.theta_hat}"
            )


def theta_to_alpha(theta: float) -> float:
    if theta <= 0.0:
        return np.inf
    return (1.0 - theta) / theta


def estimate_alpha_mom(counts: CountMatrix, group: ReplicateGroup) -> AlphaEstimate:
    """Pooled one-way moment estimate of theta from one replicate group.

    With replicate proportions p_rj = W_rj / N_r, between and within mean
    squares per component (read-weighted) combine into
    theta = sum_j (MSB_j - MSW_j) / sum_j (MSB_j + (N_c - 1) MSW_j),
    clamped into [0, 1). Negative raw estimates mean no detected
    overdispersion and map to alpha = +inf.
    """
    j_groups = group.size
    if j_groups < 2:
        raise ValueError(f"insufficient replicates in group {group.group_id!r}: need >= 2, got {j_groups}")
    rows = np.asarray(group.member_rows)
    if rows.max() >= counts.n_samples:
        raise ValueError(f"group {group.group_id!r} references row {rows.max()}, but only {counts.n_samples} rows exist")
    w = np.asarray(counts.counts[rows], dtype=float)
    totals = np.asarray(counts.row_totals[rows], dtype=float)
    if np.any(totals == 0):
        bad = int(rows[np.argwhere(totals == 0)[0][0]])
        raise ValueError(f"row {bad} in group {group.group_id!r} has zero total reads")

    t = totals.sum()
    props = w / totals[:, None]
    pooled = w.sum(axis=0) / t
    msb = (totals[:, None] * (props - pooled) ** 2).sum(axis=0) / (j_groups - 1)
    msw = (totals[:, None] * props * (1.0 - props)).sum(axis=0) / (t - j_groups)
    n_c = (t - (totals**2).sum() / t) / (j_groups - 1)
    denom = float((msb + (n_c - 1.0) * msw).sum())
    if denom <= 0.0:
        theta = 0.0
    else:
        theta = float((msb - msw).sum() / denom)
    theta = min(max(theta, 0.0), _THETA_CEIL)
    return AlphaEstimate(
        alpha_hat=theta_to_alpha(theta),
        theta_hat=theta,
        group_id=group.group_id,
        n_replicates=j_groups,
        total_reads=int(t),
    )


def estimate_alpha_all(counts: CountMatrix, groups: Sequence[ReplicateGroup]) -> np.ndarray:
    """Per-row alpha vector: group members get their group's estimate,
    ungrouped rows get +inf (plain multinomial, offset 1/2)."""
    alpha = np.full(counts.n_samples, np.inf)
    seen: dict[int, str] = {}
    for group in groups:
        for row in group.member_rows:
            if row in seen:
                raise ValueError(
                    f"row {row} appears in groups {seen[row]!r} and {group.group_id!r}; groups must not overlap"
                )
            seen[row] = group.group_id
        estimate = estimate_alpha_mom(counts, group)
        for row in group.member_rows:
            alpha[row] = estimate.alpha_hat
    return alpha


def pair_halves_groups(n: int) -> list[ReplicateGroup]:
    """Pair row i with row i + n/2; the two-replicates-per-subject layout."""
    if n < 2 or n % 2:
        raise ValueError(f"pair-halves grouping needs an even number of rows, got {n}")
    half = n // 2
    return [ReplicateGroup(member_rows=(i, i + half), group_id=f"pair{i}") for i in range(half)]


def load_groups(path, sample_ids: Sequence[str]) -> list[ReplicateGroup]:
    """Read (sample_id, group_id) pairs from CSV into replicate groups.

    A header row is skipped if its first cell is not a known sample id.
    Groups come back ordered by first appearance; singleton groups are
    rejected since they cannot support estimation.
    """
    index = {sid: i for i, sid in enumerate(sample_ids)}
    if hasattr(path, "read"):
        rows = [r for r in csv.reader(path) if r and any(c.strip() for c in r)]
    else:
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and rows[0] and rows[0][0].strip() not in index:
        rows = rows[1:]
    members: dict[str, list[int]] = {}
    for k, row in enumerate(rows):
        if len(row) < 2:
            raise ValueError(f"{path}: row {k + 1} needs (sample_id, group_id)")
        sid, gid = row[0].strip(), row[1].strip()
        if sid not in index:
            raise ValueError(f"{path}: unknown sample id {sid!r} at row {k + 1}")
        members.setdefault(gid, []).append(index[sid])
    groups = [ReplicateGroup(member_rows=tuple(v), group_id=k) for k, v in members.items()]
    for group in groups:
        if group.size < 2:
            raise ValueError(f"group {group.group_id!r} has a single member; need >= 2 replicates")
    return groups
