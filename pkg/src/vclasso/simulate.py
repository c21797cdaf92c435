"""Synthetic data generator and the benchmark grid.

The generative model: compositions X_i from a logistic-normal draw
(optionally shared within sample pairs), depths N_i from Poisson or
negative-binomial, counts W_i | N_i from Dirichlet-multinomial(N_i,
alpha X_i) (multinomial at alpha = +inf), and the response
y_i = sum_j log(X_ij) beta*_j + eps_i with sum-zero beta*.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .constraints import ConstraintSpec, RegressionData
from .correction import (
    CorrectedDesign,
    CorrectionRecipe,
    correct_dirichlet_multinomial,
    correct_multinomial,
    oracle_log_design,
    zero_replace,
)
from .counts import CountMatrix
from .overdispersion import ReplicateGroup, estimate_alpha_all, pair_halves_groups
from .rng import alpha_seed_key, rng_from_key
from .selection import cv_select_lambda
from .solver import SolverConfig, _Problem
from .validation import check_nonnegative, check_positive, freeze_array

_MU_STREAM = 11
_PHI_STREAM = 12
_DEPTH_STREAM = 13
_COUNT_STREAM = 14
_NOISE_STREAM = 15
_TEST_STREAM = 16
_CV_STREAM = 17

DEFAULT_DEPTH_MEAN = 3.0e4
DEFAULT_DEPTH_VARIANCE = 3.0e6


@dataclass(frozen=True)
class DepthLaw:
    """Sequencing-depth distribution.

    kinds: poisson(mean), neg_binomial(mean, variance), or fixed(mean)
    which pins every N_i to the same integer (used by conditional-moment
    checks).
    """

    kind: str
    mean: float
    variance: float | None = None

    def __post_init__(self):
        if self.kind not in ("poisson", "neg_binomial", "fixed"):
            raise ValueError(f"unknown depth law {self.kind!r}")
        object.__setattr__(self, "mean", check_positive(self.mean, "depth mean"))
        if self.kind == "neg_binomial":
            var = check_positive(self.variance, "depth variance")
            if var <= self.mean:
                raise ValueError(
                    f"neg_binomial needs variance > mean, got variance={var}, mean={self.mean}"
                )
            object.__setattr__(self, "variance", var)
        elif self.variance is not None and self.variance != self.mean:
            raise ValueError(f"{self.kind} depth law takes no separate variance")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "poisson":
            return rng.poisson(self.mean, size=n).astype(np.int64)
        if self.kind == "fixed":
            return np.full(n, int(round(self.mean)), dtype=np.int64)
        size = self.mean**2 / (self.variance - self.mean)
        prob = size / (size + self.mean)
        return rng.negative_binomial(size, prob, size=n).astype(np.int64)

    def scaled(self, factor: float) -> "DepthLaw":
        """Multiply the mean by factor (variance scaled along for neg_binomial)."""
        if self.kind == "neg_binomial":
            return DepthLaw("neg_binomial", self.mean * factor, self.variance * factor)
        return DepthLaw(self.kind, self.mean * factor)


@dataclass(frozen=True)
class CompositionLaw:
    """Logistic-normal compositions: mu_j drawn uniformly per block, then
    X_i = softmax(Phi_i) with Phi_ij ~ N(mu_j, within_sd^2).

    blocks is a tuple of (low, high, count); count None takes all
    remaining components, so the default needs p >= 8.
    """

    blocks: tuple = ((1.0, 3.0, 3), (2.0, 4.0, 4), (0.0, 2.0, None))
    within_sd: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "within_sd", check_nonnegative(self.within_sd, "within_sd"))
        blocks = tuple((float(lo), float(hi), None if c is None else int(c)) for lo, hi, c in self.blocks)
        if sum(1 for _, _, c in blocks if c is None) > 1:
            raise ValueError("at most one block may take the remaining components")
        for lo, hi, _ in blocks:
            if hi < lo:
                raise ValueError(f"block range ({lo}, {hi}) is inverted")
        object.__setattr__(self, "blocks", blocks)

    def min_components(self) -> int:
        fixed = sum(c for _, _, c in self.blocks if c is not None)
        return fixed + (1 if any(c is None for _, _, c in self.blocks) else 0)

    def draw_mu(self, p: int, rng: np.random.Generator) -> np.ndarray:
        if p < self.min_components():
            raise ValueError(
                f"composition layout needs p >= {self.min_components()}, got {p}; "
                "supply custom blocks for smaller p"
            )
        fixed = sum(c for _, _, c in self.blocks if c is not None)
        pieces = []
        for lo, hi, count in self.blocks:
            size = p - fixed if count is None else count
            pieces.append(rng.uniform(lo, hi, size=size))
        mu = np.concatenate(pieces)
        if mu.size != p:
            raise ValueError(f"block counts sum to {mu.size}, expected {p}")
        return mu


@dataclass(frozen=True)
class SimScenario:
    """Everything needed to regenerate one dataset bit-for-bit."""

    n: int
    p: int
    depth_law: DepthLaw
    composition_law: CompositionLaw
    alpha: float
    beta_star: np.ndarray
    sigma: float
    paired: bool = False
    shared_noise: bool = False
    seed: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.n < 1 or self.p < 2:
            raise ValueError(f"need n >= 1, p >= 2, got n={self.n}, p={self.p}")
        if (self.paired or self.shared_noise) and self.n % 2:
            raise ValueError("paired / shared-noise designs need an even n")
        alpha = float(self.alpha)
        if not alpha > 0:
            raise ValueError(f"alpha must be positive or +inf, got {alpha}")
        beta = np.asarray(self.beta_star, dtype=float)
        if beta.shape != (self.p,):
            raise ValueError(f"beta_star must have shape ({self.p},), got {beta.shape}")
        if abs(beta.sum()) > 1e-12 * max(1.0, float(np.abs(beta).max())):
            raise ValueError(f"beta_star must sum to zero, got sum {beta.sum():.3e}")
        seed = self.seed if isinstance(self.seed, tuple) else (int(self.seed),)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta_star", freeze_array(beta))
        object.__setattr__(self, "sigma", check_nonnegative(self.sigma, "sigma"))
        object.__setattr__(self, "seed", tuple(int(s) for s in seed))

    def rng(self, stream: int) -> np.random.Generator:
        return rng_from_key(*self.seed, stream)


@dataclass(frozen=True)
class SimDataset:
    """One draw: counts, the latent compositions, response, and the truth."""

    counts: CountMatrix
    x_true: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray
    noise: np.ndarray
    replicate_groups: tuple[ReplicateGroup, ...]
    seed: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "x_true", freeze_array(np.asarray(self.x_true, dtype=float)))
        object.__setattr__(self, "y", freeze_array(np.asarray(self.y, dtype=float)))
        object.__setattr__(self, "beta_star", freeze_array(np.asarray(self.beta_star, dtype=float)))
        object.__setattr__(self, "noise", freeze_array(np.asarray(self.noise, dtype=float)))
        object.__setattr__(self, "replicate_groups", tuple(self.replicate_groups))


def default_beta_star(p: int) -> np.ndarray:
    """Seven nonzero coefficients summing to zero, padded with zeros."""
    head = np.array([1.0, -0.8, -1.5, 0.6, -0.9, 1.2, 0.4])
    if p < head.size:
        raise ValueError(f"default beta_star needs p >= {head.size}, got {p}")
    beta = np.zeros(p)
    beta[: head.size] = head
    return beta


def sample_compositions(scenario: SimScenario, mu: np.ndarray | None = None) -> np.ndarray:
    """Rows strictly positive, summing to 1; pairs share a row when paired.

    mu overrides the block-mean draw; pass the realized means of another
    scenario to sample new rows from that same population.
    """
    n_draw = scenario.n // 2 if scenario.paired else scenario.n
    if mu is None:
        mu = scenario.composition_law.draw_mu(scenario.p, scenario.rng(_MU_STREAM))
    phi = scenario.rng(_PHI_STREAM).normal(mu, scenario.composition_law.within_sd, size=(n_draw, scenario.p))
    shifted = np.exp(phi - phi.max(axis=1, keepdims=True))
    x = shifted / shifted.sum(axis=1, keepdims=True)
    if scenario.paired:
        x = np.concatenate([x, x], axis=0)
    return x


def sample_counts(scenario: SimScenario, x: np.ndarray) -> CountMatrix:
    """N_i from the depth law, then W_i | N_i ~ DM(N_i, alpha X_i)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (scenario.n, scenario.p):
        raise ValueError(f"compositions must have shape ({scenario.n}, {scenario.p}), got {x.shape}")
    depths = scenario.depth_law.sample(scenario.n, scenario.rng(_DEPTH_STREAM))
    rng = scenario.rng(_COUNT_STREAM)
    if np.isinf(scenario.alpha):
        probs = x
    else:
        gammas = rng.standard_gamma(scenario.alpha * x)
        sums = gammas.sum(axis=1, keepdims=True)
        # all-zero gamma rows can only arise from extreme underflow; fall
        # back to the mean composition deterministically
        bad = sums[:, 0] == 0.0
        if np.any(bad):
            gammas[bad] = x[bad]
            sums = gammas.sum(axis=1, keepdims=True)
        probs = gammas / sums
    probs = probs / probs.sum(axis=1, keepdims=True)
    w = rng.multinomial(depths, probs)
    return CountMatrix.from_array(w.astype(np.int64))


def sample_noise(scenario: SimScenario) -> np.ndarray:
    rng = scenario.rng(_NOISE_STREAM)
    if scenario.shared_noise:
        half = rng.normal(0.0, scenario.sigma, size=scenario.n // 2)
        return np.concatenate([half, half])
    return rng.normal(0.0, scenario.sigma, size=scenario.n)


def sample_response(scenario: SimScenario, x: np.ndarray) -> np.ndarray:
    """y = (log X) beta* + eps; eps duplicated across pairs under shared_noise."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("compositions must be strictly positive")
    return np.log(x) @ scenario.beta_star + sample_noise(scenario)


def simulate_dataset(scenario: SimScenario) -> SimDataset:
    x = sample_compositions(scenario)
    counts = sample_counts(scenario, x)
    noise = sample_noise(scenario)
    y = np.log(x) @ scenario.beta_star + noise
    groups = tuple(pair_halves_groups(scenario.n)) if scenario.paired else ()
    return SimDataset(
        counts=counts,
        x_true=x,
        y=y,
        beta_star=scenario.beta_star,
        noise=noise,
        replicate_groups=groups,
        seed=scenario.seed,
    )


def method_design(method: str, dataset: SimDataset) -> CorrectedDesign:
    """Design for one benchmark method.

    vc: log(W + z) with the moment-estimated alpha from replicate groups
    (alpha = +inf when no groups exist). zr<c>: zero replacement at c.
    add<z>: plain log(W + z). oracle: log of the true compositions.
    """
    if method == "vc":
        if dataset.replicate_groups:
            alpha = estimate_alpha_all(dataset.counts, dataset.replicate_groups)
            return correct_dirichlet_multinomial(dataset.counts, alpha)
        return correct_multinomial(dataset.counts)
    if method == "oracle":
        return oracle_log_design(dataset.x_true)
    if method.startswith("zr"):
        return zero_replace(dataset.counts, float(method[2:]))
    if method.startswith("add"):
        return _add_design(dataset, float(method[3:]))
    raise ValueError(f"unknown method {method!r}; expected vc, zr<c>, add<z>, or oracle")


def _add_design(dataset: SimDataset, z: float) -> CorrectedDesign:
    # log(W + z) for a fixed pseudo-count z; expressed as the gamma-family
    # map with gamma = 2z so the recipe stays within the declared kinds
    raw = np.asarray(dataset.counts.counts, dtype=float)
    offsets = np.full(dataset.counts.n_samples, check_positive(z, "z"))
    return CorrectedDesign(
        matrix=np.log(raw + offsets[:, None]),
        recipe=CorrectionRecipe(kind="general", family="gamma", gamma=2 * z),
        offsets=offsets,
    )


def evaluate_method(
    method: str,
    dataset: SimDataset,
    scenario: SimScenario,
    folds: int = 5,
    num: int = 30,
    ratio: float = 0.01,
    config: SolverConfig = SolverConfig(),
) -> dict:
    """CV-fit one method on one dataset; returns errors and timing.

    Estimation error is ||beta_hat - beta*||_2^2. Prediction error is the
    mean of ((log X_test)(beta_hat - beta*))^2 on a fresh composition draw,
    i.e. against the noiseless test response. The test draw keeps the
    scenario's realized block means and redraws the per-sample variation,
    so it scores new samples from the population the model was trained on.
    """
    start = time.perf_counter()
    design = method_design(method, dataset)
    constraint = ConstraintSpec.sum_zero(scenario.p)
    data = RegressionData(design=design.matrix, response=dataset.y, constraint=constraint)
    cv_seed = int(rng_from_key(*scenario.seed, _CV_STREAM).integers(2**31))
    lam_star, _ = cv_select_lambda(
        data, folds=folds, num=num, ratio=ratio, seed=cv_seed,
        groups=list(dataset.replicate_groups), config=config,
    )
    result, _, _ = _Problem(data).solve(lam_star, config)
    runtime_ms = (time.perf_counter() - start) * 1000.0

    delta = result.beta_hat - scenario.beta_star
    mu = scenario.composition_law.draw_mu(scenario.p, scenario.rng(_MU_STREAM))
    test_scenario = replace(scenario, seed=scenario.seed + (_TEST_STREAM,), paired=False)
    x_test = sample_compositions(test_scenario, mu=mu)
    pred_gap = np.log(x_test) @ delta
    return {
        "method": method,
        "est_err": float(delta @ delta),
        "pred_err": float(np.mean(pred_gap**2)),
        "lambda_star": lam_star,
        "runtime_ms": runtime_ms,
        "beta_hat": result.beta_hat,
        "kkt_gap": result.kkt_gap,
    }


def run_scenario_grid(
    n_grid: Sequence[int],
    p_grid: Sequence[int],
    alpha_grid: Sequence[float],
    replicates: int,
    methods: Sequence[str] = ("vc", "zr0.5", "oracle"),
    sigma: float = 0.5,
    depth_law: DepthLaw | None = None,
    paired: bool = True,
    shared_noise: bool = False,
    master_seed: int = 0,
    folds: int = 5,
    num: int = 30,
    ratio: float = 0.01,
) -> list[dict]:
    """Full benchmark sweep; one result row per (cell, replicate, method).

    A failed fit is recorded in its row's error column and the sweep
    continues.
    """
    if depth_law is None:
        depth_law = DepthLaw("neg_binomial", DEFAULT_DEPTH_MEAN, DEFAULT_DEPTH_VARIANCE)
    rows = []
    for n in n_grid:
        for p in p_grid:
            for alpha in alpha_grid:
                for rep in range(replicates):
                    scenario = SimScenario(
                        n=int(n),
                        p=int(p),
                        depth_law=depth_law,
                        composition_law=CompositionLaw(),
                        alpha=float(alpha),
                        beta_star=default_beta_star(int(p)),
                        sigma=sigma,
                        paired=paired,
                        shared_noise=shared_noise,
                        seed=(master_seed, int(n), int(p), alpha_seed_key(float(alpha)), rep),
                    )
                    dataset = simulate_dataset(scenario)
                    for method in methods:
                        base = {
                            "n": int(n),
                            "p": int(p),
                            "alpha": float(alpha),
                            "replicate": rep,
                            "method": method,
                            "est_err": float("nan"),
                            "pred_err": float("nan"),
                            "lambda_star": float("nan"),
                            "runtime_ms": float("nan"),
                            "error": "",
                        }
                        try:
                            out = evaluate_method(
                                method, dataset, scenario,
                                folds=folds, num=num, ratio=ratio,
                            )
                            base.update(
                                est_err=out["est_err"],
                                pred_err=out["pred_err"],
                                lambda_star=out["lambda_star"],
                                runtime_ms=out["runtime_ms"],
                            )
                        except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
                            base["error"] = f"{type(exc).__name__}: {exc}"
                        rows.append(base)
    return rows


RESULT_COLUMNS = ("n", "p", "alpha", "replicate", "method", "est_err", "pred_err", "lambda_star", "runtime_ms", "error")


def write_results_csv(path, rows: Sequence[dict]) -> None:
    import csv

    fh = path if hasattr(path, "write") else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(row.get(col, "")) for col in RESULT_COLUMNS])
    finally:
        if fh is not path:
            fh.close()


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
