"""Model selection: cross-validated lambda, stability selection, refitting.

The selection protocol is five-fold CV for lambda, 100 half-sized
subsamples refit end to end with CV, a variable kept when its selection
frequency reaches 0.6, and unpenalized constrained least squares on the
kept support for reporting effect signs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import null_space

from .constraints import RegressionData
from .overdispersion import ReplicateGroup
from .rng import rng_from_key
from .solver import SolverConfig, _Problem, lambda_grid
from .validation import freeze_array

NONZERO_TOL = 1e-8

_FOLD_STREAM = 104729
_BOOT_STREAM = 1299709


@dataclass(frozen=True)
class CvCurve:
    """Held-out squared error along the lambda grid, plus the assignment
    that produced it (so a run can be audited or replayed)."""

    lambdas: np.ndarray
    mean_errors: np.ndarray
    se_errors: np.ndarray
    fold_assignment: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "lambdas", freeze_array(np.asarray(self.lambdas, dtype=float)))
        object.__setattr__(self, "mean_errors", freeze_array(np.asarray(self.mean_errors, dtype=float)))
        object.__setattr__(self, "se_errors", freeze_array(np.asarray(self.se_errors, dtype=float)))
        object.__setattr__(self, "fold_assignment", freeze_array(np.asarray(self.fold_assignment, dtype=np.int64)))


@dataclass(frozen=True)
class StabilityReport:
    """Selection frequencies over subsample refits.

    selected is exactly {j : frequency_j >= threshold}; frequencies are
    multiples of 1/num_bootstrap by construction.
    """

    selection_frequency: np.ndarray
    threshold: float
    selected: tuple[int, ...]
    num_bootstrap: int
    subsample_size: int
    rng_seed: int

    def __post_init__(self):
        freq = np.asarray(self.selection_frequency, dtype=float)
        if np.any(freq < 0) or np.any(freq > 1):
            raise ValueError("selection frequencies must lie in [0, 1]")
        counts = freq * self.num_bootstrap
        if not np.allclose(counts, np.round(counts), atol=1e-9):
            raise ValueError("frequencies must be multiples of 1/num_bootstrap")
        expect = tuple(int(j) for j in np.flatnonzero(freq >= self.threshold))
        if tuple(self.selected) != expect:
            raise ValueError("selected set inconsistent with threshold rule")
        object.__setattr__(self, "selection_frequency", freeze_array(freq))
        object.__setattr__(self, "selected", expect)


def _units(n: int, groups: Sequence[ReplicateGroup] | None) -> list[tuple[int, ...]]:
    """Sampling units: declared replicate groups plus singleton leftovers."""
    if not groups:
        return [(i,) for i in range(n)]
    taken: set[int] = set()
    units: list[tuple[int, ...]] = []
    for group in groups:
        for row in group.member_rows:
            if row in taken:
                raise ValueError(f"row {row} appears in more than one replicate group")
            if row >= n:
                raise ValueError(f"group {group.group_id!r} references row {row}, but n = {n}")
            taken.add(row)
        units.append(tuple(group.member_rows))
    units.extend((i,) for i in range(n) if i not in taken)
    return units


def assign_folds(
    n: int, folds: int, seed: int, groups: Sequence[ReplicateGroup] | None = None
) -> np.ndarray:
    """Seeded fold labels, keeping each replicate group inside one fold.

    Units are shuffled then dealt to the currently smallest fold, which
    balances row counts even with uneven group sizes.
    """
    if folds < 2:
        raise ValueError(f"need >= 2 folds, got {folds}")
    units = _units(n, groups)
    order = rng_from_key(seed, _FOLD_STREAM).permutation(len(units))
    assignment = np.full(n, -1, dtype=np.int64)
    loads = np.zeros(folds, dtype=np.int64)
    for idx in order:
        fold = int(np.argmin(loads))
        for row in units[idx]:
            assignment[row] = fold
        loads[fold] += len(units[idx])
    sizes = np.bincount(assignment, minlength=folds)
    if sizes.min() < 2:
        raise ValueError(f"fold sizes {sizes.tolist()} include a fold with < 2 rows; reduce folds")
    return assignment


def cv_select_lambda(
    data: RegressionData,
    folds: int = 5,
    num: int = 30,
    ratio: float = 0.01,
    seed: int = 0,
    groups: Sequence[ReplicateGroup] | None = None,
    fold_assignment: np.ndarray | None = None,
    config: SolverConfig = SolverConfig(),
    weights=None,
) -> tuple[float, CvCurve]:
    """Pick lambda by mean held-out squared prediction error.

    The grid is geometric from the full-data lambda_max; each fold fits a
    warm-started path on its training rows only and scores the held-out
    rows. Ties go to the largest lambda.
    """
    n = data.n
    if fold_assignment is None:
        fold_assignment = assign_folds(n, folds, seed, groups)
    else:
        fold_assignment = np.asarray(fold_assignment, dtype=np.int64)
        if fold_assignment.shape != (n,):
            raise ValueError(f"fold_assignment must have shape ({n},)")
        folds = int(fold_assignment.max()) + 1
    grid = lambda_grid(_Problem(data, weights=weights).lambda_max, num, ratio)

    sq_err = np.zeros((num, n))
    fold_means = np.zeros((num, folds))
    for fold in range(folds):
        val = fold_assignment == fold
        train = ~val
        if val.sum() < 1 or train.sum() < 2:
            raise ValueError(f"fold {fold} leaves too few rows to fit")
        sub = RegressionData(
            design=data.design[train],
            response=data.response[train],
            constraint=data.constraint,
        )
        problem = _Problem(sub, weights=weights)
        zeta = u = None
        for k, lam in enumerate(grid):
            result, zeta, u = problem.solve(float(lam), config, zeta0=zeta, u0=u)
            resid = data.response[val] - data.design[val] @ result.beta_hat
            sq_err[k, val] = resid**2
            fold_means[k, fold] = float(np.mean(resid**2))
    mean_errors = sq_err.mean(axis=1)
    se_errors = fold_means.std(axis=1, ddof=1) / np.sqrt(folds)
    best = int(np.argmin(mean_errors))
    curve = CvCurve(
        lambdas=grid,
        mean_errors=mean_errors,
        se_errors=se_errors,
        fold_assignment=fold_assignment,
        seed=seed,
    )
    return float(grid[best]), curve


def _subsample_rows(
    n: int, size: int, rng: np.random.Generator, groups: Sequence[ReplicateGroup] | None
) -> np.ndarray:
    """Without-replacement subsample of about `size` rows, whole groups only."""
    units = _units(n, groups)
    order = rng.permutation(len(units))
    chosen: list[int] = []
    for idx in order:
        unit = units[idx]
        if len(chosen) + len(unit) > size:
            if len(chosen) >= size:
                break
            continue
        chosen.extend(unit)
    return np.sort(np.asarray(chosen, dtype=np.int64))


def _restrict_groups(
    rows: np.ndarray, groups: Sequence[ReplicateGroup] | None
) -> list[ReplicateGroup] | None:
    """Re-index replicate groups onto a row subset (drops outside members)."""
    if not groups:
        return None
    position = {int(row): k for k, row in enumerate(rows)}
    out = []
    for group in groups:
        members = tuple(position[r] for r in group.member_rows if r in position)
        if len(members) >= 2:
            out.append(ReplicateGroup(member_rows=members, group_id=group.group_id))
    return out


def stability_select(
    data: RegressionData,
    num_bootstrap: int = 100,
    subsample_size: int | None = None,
    threshold: float = 0.6,
    folds: int = 5,
    seed: int = 0,
    num: int = 30,
    ratio: float = 0.01,
    groups: Sequence[ReplicateGroup] | None = None,
    config: SolverConfig = SolverConfig(),
) -> StabilityReport:
    """Selection frequency across seeded half-subsample refits.

    Each subsample is drawn without replacement (whole replicate groups at
    a time when groups are declared), lambda re-chosen by CV inside the
    subsample, and a variable counted when its coefficient exceeds 1e-8 in
    absolute value at the chosen lambda.
    """
    if num_bootstrap < 1:
        raise ValueError(f"num_bootstrap must be >= 1, got {num_bootstrap}")
    n = data.n
    if subsample_size is None:
        subsample_size = n // 2
    if not 2 <= subsample_size <= n:
        raise ValueError(f"subsample_size must be in [2, {n}], got {subsample_size}")
    hits = np.zeros(data.p, dtype=np.int64)
    for b in range(num_bootstrap):
        rng = rng_from_key(seed, _BOOT_STREAM, b)
        rows = _subsample_rows(n, subsample_size, rng, groups)
        sub = RegressionData(
            design=data.design[rows],
            response=data.response[rows],
            constraint=data.constraint,
        )
        sub_groups = _restrict_groups(rows, groups)
        lam_star, _ = cv_select_lambda(
            sub, folds=folds, num=num, ratio=ratio,
            seed=int(rng.integers(2**31)), groups=sub_groups, config=config,
        )
        result, _, _ = _Problem(sub).solve(lam_star, config)
        hits += np.abs(result.beta_hat) > NONZERO_TOL
    freq = hits / num_bootstrap
    return StabilityReport(
        selection_frequency=freq,
        threshold=threshold,
        selected=tuple(int(j) for j in np.flatnonzero(freq >= threshold)),
        num_bootstrap=num_bootstrap,
        subsample_size=subsample_size,
        rng_seed=seed,
    )


def refit_on_support(data: RegressionData, support) -> np.ndarray:
    """Unpenalized constrained least squares on a fixed support.

    Minimizes (1/2n)||y - B_S beta_S||^2 subject to (C_S)^T beta_S = 0 and
    returns the full-length vector with zeros off the support. The
    restricted constraint must leave a nonzero feasible direction (with
    the sum-zero constraint this needs at least two support variables).
    """
    support = np.asarray(sorted(int(j) for j in support), dtype=np.int64)
    if support.size == 0:
        raise ValueError("support is empty; nothing to refit")
    if support.size != np.unique(support).size:
        raise ValueError("support has duplicate indices")
    if support.min() < 0 or support.max() >= data.p:
        raise ValueError(f"support indices must lie in [0, {data.p})")
    c_s = data.constraint.matrix[support]
    z = null_space(c_s.T) if c_s.size else np.eye(support.size)
    if z.shape[1] == 0:
        raise ValueError(
            f"constraint restricted to support {support.tolist()} admits only the zero vector"
        )
    reduced = data.design[:, support] @ z
    gamma, *_ = np.linalg.lstsq(reduced, data.response, rcond=None)
    beta = np.zeros(data.p)
    beta[support] = z @ gamma
    return beta


def stability_report_json(report: StabilityReport) -> dict:
    return {
        "selection_frequency": [float(f) for f in report.selection_frequency],
        "threshold": report.threshold,
        "selected": list(report.selected),
        "num_bootstrap": report.num_bootstrap,
        "subsample_size": report.subsample_size,
        "rng_seed": report.rng_seed,
        "subsampling": "without replacement, whole replicate groups",
    }


def write_stability_csv(
    path,
    report: StabilityReport,
    taxon_ids: Sequence[str],
    refit_beta: np.ndarray | None = None,
) -> None:
    """One row per variable: frequency, selected flag, sign of refit coefficient."""
    if len(taxon_ids) != report.selection_frequency.size:
        raise ValueError("taxon_ids length does not match the report")
    fh = path if hasattr(path, "write") else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(fh)
        writer.writerow(["taxon", "frequency", "selected", "refit_sign"])
        for j, taxon in enumerate(taxon_ids):
            selected = j in report.selected
            sign = ""
            if refit_beta is not None and selected:
                value = refit_beta[j]
                sign = "+" if value > 0 else ("-" if value < 0 else "0")
            writer.writerow([taxon, repr(float(report.selection_frequency[j])), int(selected), sign])
    finally:
        if fh is not path:
            fh.close()
