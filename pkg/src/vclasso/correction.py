"""Corrected log designs: log(W + z) and the zero-replacement baseline.

Taking logs of raw counts fails on zeros and is biased for the latent
log-abundance. Adding a distribution-matched offset z before the log
fixes both at once: z = 1/2 for multinomial counts, and
z_i = (N_i + alpha_i + 1) / (2 (alpha_i + 1)) under Dirichlet-multinomial
overdispersion alpha_i. The baseline alternative replaces zeros by a
small constant c and logs everything else untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counts import CountMatrix
from .validation import check_matrix, check_positive, freeze_array

KINDS = (
    "multinomial_half",
    "dirichlet_multinomial",
    "general",
    "zero_replace",
    "oracle_log_composition",
)
GENERAL_FAMILIES = ("poisson", "normal", "gamma")

_SPOT_CHECK_CELLS = 10
_SPOT_CHECK_TOL = 1e-12


@dataclass(frozen=True)
class CorrectionRecipe:
    """What map produced a corrected design.

    kind: one of KINDS. alpha (length-n, entries > 0 or +inf) applies to
    dirichlet_multinomial; family/gamma to general; c to zero_replace.
    note is free-form provenance carried into the design.
    """

    kind: str
    alpha: np.ndarray | None = None
    family: str | None = None
    gamma: float | None = None
    c: float | None = None
    note: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown correction kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "dirichlet_multinomial":
            alpha = np.asarray(self.alpha, dtype=float).ravel()
            if alpha.size == 0:
                raise ValueError("dirichlet_multinomial recipe needs per-sample alpha values")
            if np.any(np.isnan(alpha)) or np.any(alpha <= 0):
                bad = int(np.flatnonzero(~(alpha > 0))[0])
                raise ValueError(f"alpha[{bad}] = {alpha[bad]} is not positive (or +inf)")
            object.__setattr__(self, "alpha", freeze_array(alpha))
        elif self.alpha is not None:
            raise ValueError(f"alpha only applies to dirichlet_multinomial, not {self.kind!r}")
        if self.kind == "general":
            if self.family not in GENERAL_FAMILIES:
                raise ValueError(
                    f"unknown family {self.family!r}; expected one of {GENERAL_FAMILIES}"
                )
            if self.family in ("normal", "gamma"):
                object.__setattr__(self, "gamma", check_positive(self.gamma, "gamma"))
            elif self.gamma is not None:
                raise ValueError("gamma only applies to the normal and gamma families")
        elif self.family is not None or self.gamma is not None:
            raise ValueError(f"family/gamma only apply to kind 'general', not {self.kind!r}")
        if self.kind == "zero_replace":
            object.__setattr__(self, "c", check_positive(self.c, "c"))
        elif self.c is not None:
            raise ValueError(f"c only applies to zero_replace, not {self.kind!r}")


@dataclass(frozen=True)
class CorrectedDesign:
    """An n x p log-scale design plus the recipe and offsets that built it.

    For additive recipes, matrix[i, j] = log(raw[i, j] + offsets[i]); each
    construction spot-checks that identity on 10 random cells. For
    zero_replace, offsets[i] holds the replacement constant c instead.
    """

    matrix: np.ndarray
    recipe: CorrectionRecipe
    offsets: np.ndarray = field(default=None)

    def __post_init__(self):
        mat = check_matrix(self.matrix, "corrected design")
        offsets = np.asarray(
            self.offsets if self.offsets is not None else np.zeros(mat.shape[0]),
            dtype=float,
        )
        if offsets.shape != (mat.shape[0],):
            raise ValueError(f"offsets must have shape ({mat.shape[0]},), got {offsets.shape}")
        object.__setattr__(self, "matrix", freeze_array(mat))
        object.__setattr__(self, "offsets", freeze_array(offsets))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]


def _spot_check(matrix: np.ndarray, raw: np.ndarray, cell_value) -> None:
    """Recompute up to 10 deterministic random cells against the formula."""
    n, p = matrix.shape
    rng = np.random.default_rng(n * 1_000_003 + p)
    k = min(_SPOT_CHECK_CELLS, n * p)
    flat = rng.choice(n * p, size=k, replace=False)
    for idx in flat:
        i, j = divmod(int(idx), p)
        expect = cell_value(i, raw[i, j])
        if abs(matrix[i, j] - expect) > _SPOT_CHECK_TOL * max(1.0, abs(expect)):
            raise AssertionError(
                f"corrected design spot check failed at cell ({i}, {j}): "
                f"{matrix[i, j]!r} != {expect!r}"
            )


def _additive_design(raw: np.ndarray, offsets: np.ndarray, recipe: CorrectionRecipe) -> CorrectedDesign:
    matrix = np.log(raw + offsets[:, None])
    _spot_check(matrix, raw, lambda i, w: np.log(w + offsets[i]))
    return CorrectedDesign(matrix=matrix, recipe=recipe, offsets=offsets)


def correct_multinomial(counts: CountMatrix) -> CorrectedDesign:
    """log(W + 1/2), the multinomial (alpha = +inf) correction."""
    raw = np.asarray(counts.counts, dtype=float)
    offsets = np.full(counts.n_samples, 0.5)
    return _additive_design(raw, offsets, CorrectionRecipe(kind="multinomial_half"))


def dirichlet_multinomial_offsets(row_totals, alpha) -> np.ndarray:
    """z_i = (N_i + alpha_i + 1) / (2 (alpha_i + 1)), with z_i = 1/2 at alpha_i = +inf."""
    totals = np.asarray(row_totals, dtype=float).ravel()
    alpha = np.asarray(alpha, dtype=float).ravel()
    if alpha.size == 1:
        alpha = np.full(totals.shape, alpha[0])
    if alpha.shape != totals.shape:
        raise ValueError(f"alpha must have length {totals.size}, got {alpha.size}")
    if np.any(np.isnan(alpha)) or np.any(alpha <= 0):
        bad = int(np.flatnonzero(~(alpha > 0))[0])
        raise ValueError(f"alpha[{bad}] = {alpha[bad]} is not positive (or +inf)")
    offsets = np.full(totals.shape, 0.5)
    finite = np.isfinite(alpha)
    offsets[finite] = (totals[finite] + alpha[finite] + 1.0) / (2.0 * (alpha[finite] + 1.0))
    return offsets


def correct_dirichlet_multinomial(counts: CountMatrix, alpha) -> CorrectedDesign:
    """log(W + z_i) with the overdispersion-aware offset z_i.

    alpha is a scalar or length-n vector of positive reals; +inf entries
    fall back to the multinomial offset 1/2 exactly.
    """
    raw = np.asarray(counts.counts, dtype=float)
    offsets = dirichlet_multinomial_offsets(counts.row_totals, alpha)
    alpha_vec = np.asarray(alpha, dtype=float).ravel()
    if alpha_vec.size == 1:
        alpha_vec = np.full(counts.n_samples, alpha_vec[0])
    recipe = CorrectionRecipe(kind="dirichlet_multinomial", alpha=alpha_vec)
    return _additive_design(raw, offsets, recipe)


def correct_general(counts, family: str, gamma: float | None = None) -> CorrectedDesign:
    """Elementwise phi for non-multinomial count models.

    poisson: log(W + 1/2). normal(gamma): log(max(W + gamma/2, 1)), which
    tolerates negative W. gamma(gamma): log(W + gamma/2).
    """
    raw = counts.counts if isinstance(counts, CountMatrix) else counts
    raw = check_matrix(raw, "counts")
    recipe = CorrectionRecipe(kind="general", family=family, gamma=gamma)
    n = raw.shape[0]
    if family == "poisson":
        if np.any(raw < 0):
            bad = np.argwhere(raw < 0)[0]
            raise ValueError(f"poisson family needs nonnegative values; negative at row {bad[0]}, column {bad[1]}")
        return _additive_design(raw, np.full(n, 0.5), recipe)
    half_gamma = recipe.gamma / 2.0
    if family == "normal":
        matrix = np.log(np.maximum(raw + half_gamma, 1.0))
        _spot_check(matrix, raw, lambda i, w: np.log(max(w + half_gamma, 1.0)))
        return CorrectedDesign(matrix=matrix, recipe=recipe, offsets=np.full(n, half_gamma))
    # gamma family
    if np.any(raw + half_gamma <= 0):
        bad = np.argwhere(raw + half_gamma <= 0)[0]
        raise ValueError(
            f"gamma family needs W + gamma/2 > 0; violated at row {bad[0]}, column {bad[1]}"
        )
    return _additive_design(raw, np.full(n, half_gamma), recipe)


def zero_replace(counts: CountMatrix, c: float) -> CorrectedDesign:
    """log(max(W, c)): zeros become log c, nonzero counts log untouched."""
    recipe = CorrectionRecipe(kind="zero_replace", c=c)
    raw = np.asarray(counts.counts, dtype=float)
    matrix = np.log(np.maximum(raw, recipe.c))
    _spot_check(matrix, raw, lambda i, w: np.log(max(w, recipe.c)))
    return CorrectedDesign(matrix=matrix, recipe=recipe, offsets=np.full(counts.n_samples, recipe.c))


def oracle_log_design(compositions) -> CorrectedDesign:
    """log(X) on the true compositions; the no-measurement-error benchmark."""
    x = check_matrix(compositions, "compositions")
    if np.any(x <= 0):
        bad = np.argwhere(x <= 0)[0]
        raise ValueError(f"compositions must be strictly positive; violated at row {bad[0]}, column {bad[1]}")
    return CorrectedDesign(
        matrix=np.log(x),
        recipe=CorrectionRecipe(kind="oracle_log_composition"),
        offsets=np.zeros(x.shape[0]),
    )
