import io

import numpy as np
import pytest

from vclasso import (
    ConstraintSpec,
    RegressionData,
    ReplicateGroup,
    assign_folds,
    cv_select_lambda,
    refit_on_support,
    solve_constrained_lasso,
    stability_select,
)
from vclasso.rng import rng_from_key
from vclasso.selection import stability_report_json, write_stability_csv


def sparse_data(rng, n=40, p=10, s=3, sigma=0.3):
    design = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:s] = np.array([1.5, -1.0, 0.8])[:s]
    beta -= beta.mean()
    y = design @ beta + sigma * rng.normal(size=n)
    return RegressionData(design=design, response=y, constraint=ConstraintSpec.sum_zero(p))


def test_assign_folds_balanced():
    fold = assign_folds(23, 5, seed=0)
    counts = np.bincount(fold, minlength=5)
    assert counts.min() >= 4 and counts.max() <= 5
    assert counts.sum() == 23


def test_assign_folds_group_aware():
    groups = [ReplicateGroup(member_rows=(i, i + 5), group_id=str(i)) for i in range(5)]
    fold = assign_folds(10, 2, seed=3, groups=groups)
    for g in groups:
        a, b = g.member_rows
        assert fold[a] == fold[b]


def test_assign_folds_deterministic():
    a = assign_folds(30, 5, seed=11)
    b = assign_folds(30, 5, seed=11)
    assert np.array_equal(a, b)
    c = assign_folds(30, 5, seed=12)
    assert not np.array_equal(a, c)


def test_cv_small_fold_error(rng):
    data = sparse_data(rng, n=7, p=4, s=2)
    with pytest.raises(ValueError, match="fold"):
        cv_select_lambda(data, folds=6)


def test_cv_duplicated_dataset_same_lambda(rng):
    data = sparse_data(rng, n=20, p=6, s=2)
    lam1, curve1 = cv_select_lambda(data, folds=4, num=12, seed=5)
    dup = RegressionData(
        design=np.vstack([data.design, data.design]),
        response=np.concatenate([data.response, data.response]),
        constraint=data.constraint,
    )
    # duplicate rows ride along with their originals in every fold
    fold_assignment = np.concatenate([curve1.fold_assignment, curve1.fold_assignment])
    lam2, curve2 = cv_select_lambda(
        dup, folds=4, num=12, seed=5, fold_assignment=fold_assignment
    )
    assert np.allclose(curve1.lambdas, curve2.lambdas)
    assert lam1 == pytest.approx(lam2, rel=1e-10)
    assert np.allclose(curve1.mean_errors, curve2.mean_errors, atol=1e-10)


def test_cv_curve_finite_and_interior_possible(rng):
    data = sparse_data(rng, n=40, p=10, s=3)
    lam, curve = cv_select_lambda(data, folds=5, num=20, seed=1)
    assert np.all(np.isfinite(curve.mean_errors))
    assert curve.lambdas[-1] <= lam <= curve.lambdas[0]
    assert curve.mean_errors.shape == curve.lambdas.shape


def test_cv_ties_prefer_largest_lambda(rng):
    # y = 0 makes every lambda fit beta = 0, a perfect tie
    design = rng.normal(size=(20, 5))
    data = RegressionData(
        design=design, response=np.zeros(20), constraint=ConstraintSpec.sum_zero(5)
    )
    lam, curve = cv_select_lambda(data, folds=4, num=10, seed=2)
    assert lam == curve.lambdas[0]


def test_cv_all_noise_prefers_large_lambda():
    hits = 0
    for seed in range(20):
        rng = rng_from_key(31, seed)
        design = rng.normal(size=(30, 8))
        y = 3.0 * rng.normal(size=30)
        data = RegressionData(
            design=design, response=y, constraint=ConstraintSpec.sum_zero(8)
        )
        lam, curve = cv_select_lambda(data, folds=5, num=16, seed=seed)
        rank = int(np.flatnonzero(curve.lambdas == lam)[0])
        if rank < len(curve.lambdas) / 4:
            hits += 1
    assert hits >= 14


def test_stability_single_bootstrap_binary(rng):
    data = sparse_data(rng)
    report = stability_select(data, num_bootstrap=1, folds=4, num=10, seed=9)
    assert set(np.unique(report.selection_frequency)).issubset({0.0, 1.0})
    assert report.num_bootstrap == 1


def test_stability_threshold_semantics(rng):
    data = sparse_data(rng)
    report = stability_select(data, num_bootstrap=8, folds=4, num=10, seed=9, threshold=0.0)
    ever = set(np.flatnonzero(report.selection_frequency > 0))
    assert set(report.selected) == set(np.flatnonzero(report.selection_frequency >= 0.0))
    assert ever.issubset(set(report.selected))
    empty = stability_select(
        data, num_bootstrap=8, folds=4, num=10, seed=9, threshold=1.1
    )
    assert empty.selected == ()


def test_stability_frequencies_are_multiples(rng):
    data = sparse_data(rng)
    report = stability_select(data, num_bootstrap=5, folds=4, num=10, seed=4)
    scaled = report.selection_frequency * 5
    assert np.allclose(scaled, np.round(scaled), atol=1e-12)


def test_stability_deterministic(rng):
    data = sparse_data(rng)
    a = stability_select(data, num_bootstrap=6, folds=4, num=8, seed=7)
    b = stability_select(data, num_bootstrap=6, folds=4, num=8, seed=7)
    assert np.array_equal(a.selection_frequency, b.selection_frequency)
    assert a.selected == b.selected


def test_stability_strong_signal_found(rng):
    data = sparse_data(rng, n=60, p=8, s=2, sigma=0.2)
    report = stability_select(data, num_bootstrap=20, folds=4, num=12, seed=3)
    assert report.selection_frequency[0] >= 0.6
    assert report.selection_frequency[1] >= 0.6


def test_refit_full_support_matches_tiny_lambda(rng):
    data = sparse_data(rng, n=50, p=6, s=2)
    beta_refit = refit_on_support(data, range(6))
    fit = solve_constrained_lasso(data, 1e-10)
    assert np.max(np.abs(beta_refit - fit.beta_hat)) <= 1e-6


def test_refit_two_support_closed_form(rng):
    data = sparse_data(rng, n=30, p=6, s=2)
    support = [1, 4]
    beta = refit_on_support(data, support)
    assert np.all(beta[[0, 2, 3, 5]] == 0.0)
    d = data.design[:, 1] - data.design[:, 4]
    b = float(d @ data.response) / float(d @ d)
    assert beta[1] == pytest.approx(b, abs=1e-10)
    assert beta[4] == pytest.approx(-b, abs=1e-10)


def test_refit_gradient_orthogonal_to_feasible(rng):
    data = sparse_data(rng, n=40, p=8, s=3)
    support = [0, 1, 2, 5]
    beta = refit_on_support(data, support)
    grad = data.design.T @ (data.design @ beta - data.response) / 40
    # project gradient on support onto the restricted sum-zero directions
    g = grad[support]
    g_feasible = g - g.mean()
    assert np.linalg.norm(g_feasible) <= 1e-8


def test_refit_errors(rng):
    data = sparse_data(rng)
    with pytest.raises(ValueError, match="empty"):
        refit_on_support(data, [])
    with pytest.raises(ValueError, match="only the zero vector"):
        refit_on_support(data, [3])


def test_report_serialization(rng):
    data = sparse_data(rng, n=30, p=5, s=2)
    report = stability_select(data, num_bootstrap=4, folds=3, num=8, seed=1)
    blob = stability_report_json(report)
    assert blob["threshold"] == report.threshold
    assert blob["num_bootstrap"] == 4
    assert len(blob["selection_frequency"]) == 5
    buf = io.StringIO()
    write_stability_csv(buf, report, [f"T{j}" for j in range(5)])
    lines = buf.getvalue().strip().splitlines()
    assert len(lines) == 6
    assert lines[0].split(",")[0] == "taxon"


def test_report_invariants():
    from vclasso import StabilityReport

    with pytest.raises(ValueError):
        StabilityReport(
            selection_frequency=np.array([0.5, 0.7]),
            threshold=0.6,
            selected=(0,),  # wrong: index 1 clears threshold, 0 does not
            num_bootstrap=10,
            subsample_size=5,
            rng_seed=0,
        )
    with pytest.raises(ValueError):
        StabilityReport(
            selection_frequency=np.array([0.33]),  # not a multiple of 1/10
            threshold=0.6,
            selected=(),
            num_bootstrap=10,
            subsample_size=5,
            rng_seed=0,
        )
