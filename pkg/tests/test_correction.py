import math

import numpy as np
import pytest

from vclasso import (
    CorrectionRecipe,
    CountMatrix,
    correct_dirichlet_multinomial,
    correct_general,
    correct_multinomial,
    dirichlet_multinomial_offsets,
    oracle_log_design,
    zero_replace,
)


def counts_of(rows):
    return CountMatrix.from_array(np.asarray(rows, dtype=np.int64))


def test_multinomial_single_values():
    design = correct_multinomial(counts_of([[0, 3]]))
    assert design.matrix[0, 0] == pytest.approx(math.log(0.5), abs=1e-12)
    assert design.matrix[0, 1] == pytest.approx(math.log(3.5), abs=1e-12)
    assert np.all(design.offsets == 0.5)


def test_multinomial_matrix_example():
    design = correct_multinomial(counts_of([[0, 10], [5, 0]]))
    expect = np.log(np.array([[0.5, 10.5], [5.5, 0.5]]))
    assert np.allclose(design.matrix, expect, atol=1e-12)
    assert design.recipe.kind == "multinomial_half"


def test_dm_offset_small_example():
    # (100 + 99 + 1) / (2 * 100) = 1
    z = dirichlet_multinomial_offsets([100], 99.0)
    assert z[0] == pytest.approx(1.0, abs=1e-15)
    design = correct_dirichlet_multinomial(counts_of([[3, 97]]), 99.0)
    assert design.matrix[0, 0] == pytest.approx(math.log(4.0), abs=1e-12)


def test_dm_offset_deep_sequencing_scale():
    z = dirichlet_multinomial_offsets([30000], 200.0)
    assert z[0] == pytest.approx(30201 / 402, rel=1e-15)
    assert z[0] == pytest.approx(75.12686567164179, rel=1e-12)


def test_dm_infinite_alpha_matches_multinomial_exactly():
    counts = counts_of([[0, 4, 6], [2, 0, 1]])
    dm = correct_dirichlet_multinomial(counts, np.inf)
    mn = correct_multinomial(counts)
    assert np.array_equal(dm.matrix, mn.matrix)
    assert np.array_equal(dm.offsets, mn.offsets)


def test_dm_per_sample_alpha():
    counts = counts_of([[100, 0], [50, 50]])
    design = correct_dirichlet_multinomial(counts, [99.0, np.inf])
    assert design.offsets[0] == pytest.approx(1.0)
    assert design.offsets[1] == pytest.approx(0.5)
    assert design.matrix[1, 0] == pytest.approx(math.log(50.5), abs=1e-12)


def test_dm_alpha_validation():
    counts = counts_of([[1, 2]])
    with pytest.raises(ValueError, match="positive"):
        correct_dirichlet_multinomial(counts, 0.0)
    with pytest.raises(ValueError, match="positive"):
        correct_dirichlet_multinomial(counts, -3.0)
    with pytest.raises(ValueError, match="length"):
        correct_dirichlet_multinomial(counts, [1.0, 2.0])


def test_general_poisson_matches_half_offset():
    design = correct_general(np.array([[0.0, 3.0]]), family="poisson")
    assert design.matrix[0, 0] == pytest.approx(math.log(0.5), abs=1e-12)
    assert design.matrix[0, 1] == pytest.approx(math.log(3.5), abs=1e-12)


def test_general_normal_floors_at_one():
    design = correct_general(np.array([[-1.5]]), family="normal", gamma=4.0)
    assert design.matrix[0, 0] == 0.0
    big = correct_general(np.array([[10.0]]), family="normal", gamma=4.0)
    assert big.matrix[0, 0] == pytest.approx(math.log(12.0), abs=1e-12)


def test_general_gamma_half_gamma_offset():
    design = correct_general(np.array([[math.e - 0.5]]), family="gamma", gamma=1.0)
    assert design.matrix[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_general_validation():
    w = np.array([[1.0, 2.0]])
    with pytest.raises(ValueError, match="gamma"):
        correct_general(w, family="normal", gamma=0.0)
    with pytest.raises(ValueError, match="gamma"):
        correct_general(w, family="gamma", gamma=-1.0)
    with pytest.raises(ValueError, match="family"):
        correct_general(w, family="cauchy", gamma=1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        correct_general(np.array([[-1.0]]), family="poisson")


def test_zero_replace_values():
    design = zero_replace(counts_of([[0, 3]]), 0.5)
    assert design.matrix[0, 0] == pytest.approx(math.log(0.5), abs=1e-12)
    # nonzero counts log untouched, NOT shifted
    assert design.matrix[0, 1] == pytest.approx(math.log(3.0), abs=1e-12)
    small = zero_replace(counts_of([[0, 1]]), 0.1)
    assert small.matrix[0, 0] == pytest.approx(-2.302585092994046, abs=1e-12)


def test_zero_replace_validation():
    counts = counts_of([[0, 1]])
    with pytest.raises(ValueError, match="> 0"):
        zero_replace(counts, 0.0)
    with pytest.raises(ValueError, match="> 0"):
        zero_replace(counts, -0.5)


def test_oracle_log_design():
    x = np.array([[0.25, 0.75], [0.5, 0.5]])
    design = oracle_log_design(x)
    assert np.allclose(design.matrix, np.log(x), atol=1e-15)
    with pytest.raises(ValueError, match="positive"):
        oracle_log_design(np.array([[0.0, 1.0]]))


def test_recipe_field_validation():
    with pytest.raises(ValueError, match="kind"):
        CorrectionRecipe(kind="banana")
    with pytest.raises(ValueError, match="alpha"):
        CorrectionRecipe(kind="multinomial_half", alpha=np.array([1.0]))
    with pytest.raises(ValueError, match="zero_replace"):
        CorrectionRecipe(kind="multinomial_half", c=0.5)
    with pytest.raises(ValueError, match="general"):
        CorrectionRecipe(kind="zero_replace", c=0.5, family="poisson")


def test_monotone_in_counts(rng):
    # raising any single count never lowers the corrected entry
    for _ in range(50):
        w = rng.integers(0, 20, size=(3, 4))
        counts = counts_of(w)
        i = int(rng.integers(3))
        j = int(rng.integers(4))
        bumped = w.copy()
        bumped[i, j] += int(rng.integers(1, 10))
        for make in (
            correct_multinomial,
            lambda c: correct_dirichlet_multinomial(c, 150.0),
            lambda c: zero_replace(c, 0.5),
        ):
            lo = make(counts).matrix
            hi = make(counts_of(bumped)).matrix
            assert hi[i, j] >= lo[i, j]


def test_offset_monotone_in_alpha_and_depth():
    alphas = np.array([1.0, 5.0, 50.0, 500.0, 5e4])
    z_alpha = np.array([dirichlet_multinomial_offsets([30000], a)[0] for a in alphas])
    assert np.all(np.diff(z_alpha) < 0)
    depths = np.array([100, 1000, 10000, 100000])
    z_depth = np.array([dirichlet_multinomial_offsets([n], 200.0)[0] for n in depths])
    assert np.all(np.diff(z_depth) > 0)
    # alpha -> inf limit approaches 1/2 from above
    assert z_alpha[-1] > 0.5
    assert dirichlet_multinomial_offsets([30000], np.inf)[0] == 0.5


def test_corrected_design_spot_check_guards_mismatch():
    counts = counts_of([[1, 2], [3, 4]])
    good = correct_multinomial(counts)
    assert good.n == 2 and good.p == 2
