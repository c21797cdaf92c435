"""Linearly-constrained lasso.

Solves min over beta of (1/2n) ||y - B beta||^2 + lambda ||beta||_1
subject to C^T beta = 0, by ADMM on the split beta = zeta: the beta step
is an equality-constrained ridge solved through a cached factorization of
its KKT system, the zeta step is coordinatewise soft thresholding. A
polish step re-solves the stationarity equations exactly on the sparse
support found by ADMM and keeps the result when it certifies as optimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve, null_space
from scipy.optimize import linprog

from .constraints import RegressionData, center_design
from .validation import check_nonnegative, check_positive, check_vector, freeze_array

_LAMBDA_MAX_SLACK = 1e-12
_POLISH_RESIDUAL_TOL = 1e-9
_POLISH_SIGN_TOL = 1e-12
_POLISH_DUAL_SLACK = 1e-9
_FEASIBILITY_TOL = 1e-10
_RHO_RATIO = 10.0
_RHO_CHECK_EVERY = 10


@dataclass(frozen=True)
class SolverConfig:
    """ADMM controls. Tolerances are relative to iterate scale."""

    max_iter: int = 10000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    admm_rho: float = 1.0
    warm_start: np.ndarray | None = None
    polish: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        for name in ("tol_primal", "tol_dual", "admm_rho"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class FitResult:
    """One solve: coefficients plus the diagnostics that certify them.

    kkt_gap is min over kappa of ||(1/n) Bbar^T (Bbar beta - y) + C kappa||_inf
    minus lam; at an optimum it is <= 0 up to roundoff.
    """

    beta_hat: np.ndarray
    lam: float
    iterations: int
    primal_residual: float
    dual_residual: float
    kkt_gap: float
    objective: float
    converged: bool = True
    polished: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta_hat", freeze_array(np.asarray(self.beta_hat, dtype=float)))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.beta_hat) > 1e-8)


def soft_threshold(v, kappa):
    """Elementwise shrink toward zero: sign(v) * max(|v| - kappa, 0)."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def _stationarity_gap(g: np.ndarray, basis: np.ndarray, allowance: np.ndarray) -> float:
    """min over kappa of max_j (|g_j + (basis @ kappa)_j| - allowance_j).

    With a uniform allowance lam this is the Chebyshev fit
    min ||g + basis kappa||_inf - lam: closed form for a single constant
    constraint column, a small linear program otherwise. <= 0 certifies
    the stationarity condition.
    """
    p, r = basis.shape
    uniform = np.ptp(allowance) == 0.0
    if uniform and r == 1 and np.ptp(basis[:, 0]) == 0.0:
        return float(np.ptp(g)) / 2.0 - float(allowance[0])
    c = np.zeros(r + 1)
    c[-1] = 1.0
    ones = np.ones((p, 1))
    a_ub = np.block([[basis, -ones], [-basis, -ones]])
    b_ub = np.concatenate([allowance - g, allowance + g])
    bounds = [(None, None)] * (r + 1)
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        # LP should not fail on this geometry; fall back to an l2 fit,
        # which upper-bounds the true minimum.
        kappa, *_ = np.linalg.lstsq(basis, -g, rcond=None)
        return float(np.max(np.abs(g + basis @ kappa) - allowance))
    return float(res.fun)


class _Problem:
    """Shared precomputation for repeated solves on one (design, y, C).

    Holds the centered design Gram matrix and a per-rho cache of LU
    factorizations of the ADMM KKT system.
    """

    def __init__(self, data: RegressionData, weights=None):
        self.data = data
        self.n, self.p = data.design.shape
        self.basis = data.constraint.basis
        self.r = self.basis.shape[1]
        self.design_centered = center_design(data.design, data.constraint)
        self.gram_n = (self.design_centered.T @ self.design_centered) / self.n
        self.grad0 = (self.design_centered.T @ data.response) / self.n
        if weights is None:
            weights = np.ones(self.p)
        self.weights = check_vector(weights, length=self.p, name="penalty weights")
        if np.any(self.weights < 0):
            raise ValueError("penalty weights must be nonnegative")
        self._factors: dict[float, tuple] = {}

    @property
    def lambda_max(self) -> float:
        """Top of the penalty grid.

        Unit weights: ||(1/n) Bbar^T y||_inf, above which beta = 0 is
        optimal. General weights: the exact threshold at which only the
        unpenalized coordinates stay active.
        """
        if np.all(self.weights == 1.0):
            return float(np.max(np.abs(self.grad0)))
        return self._weighted_lambda_max()

    def _weighted_lambda_max(self) -> float:
        free = np.flatnonzero(self.weights == 0.0)
        beta0 = np.zeros(self.p)
        if free.size:
            c_free = self.data.constraint.matrix[free]
            z = null_space(c_free.T) if c_free.size else np.eye(free.size)
            if z.shape[1]:
                reduced = self.data.design[:, free] @ z
                gamma, *_ = np.linalg.lstsq(reduced, self.data.response, rcond=None)
                beta0[free] = z @ gamma
        g = self.gradient(beta0)
        # min t s.t. |g + Q kappa|_j <= t * w_j (equality where w_j = 0)
        c = np.zeros(self.r + 1)
        c[-1] = 1.0
        w_col = self.weights[:, None]
        a_ub = np.block([[self.basis, -w_col], [-self.basis, -w_col]])
        b_ub = np.concatenate([-g, g])
        bounds = [(None, None)] * self.r + [(0.0, None)]
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise RuntimeError("could not determine the weighted penalty threshold")
        return float(res.fun)

    def _factor(self, rho: float):
        cached = self._factors.get(rho)
        if cached is None:
            kkt = np.zeros((self.p + self.r, self.p + self.r))
            kkt[: self.p, : self.p] = self.gram_n + rho * np.eye(self.p)
            kkt[: self.p, self.p :] = self.basis
            kkt[self.p :, : self.p] = self.basis.T
            cached = lu_factor(kkt)
            self._factors[rho] = cached
        return cached

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        """(1/n) Bbar^T (Bbar beta - y)."""
        return self.gram_n @ beta - self.grad0

    def objective(self, beta: np.ndarray, lam: float) -> float:
        resid = self.data.response - self.data.design @ beta
        return float(
            resid @ resid / (2.0 * self.n) + lam * np.sum(self.weights * np.abs(beta))
        )

    def kkt_gap(self, beta: np.ndarray, lam: float) -> float:
        return _stationarity_gap(self.gradient(beta), self.basis, lam * self.weights)

    def _zero_result(self, lam: float) -> FitResult:
        beta = np.zeros(self.p)
        return FitResult(
            beta_hat=beta,
            lam=lam,
            iterations=0,
            primal_residual=0.0,
            dual_residual=0.0,
            kkt_gap=self.kkt_gap(beta, lam),
            objective=self.objective(beta, lam),
            converged=True,
            polished=True,
        )

    def _polish(self, zeta: np.ndarray, lam: float):
        """Exact KKT solve on the thresholded support; None if it fails to certify."""
        unpenalized = self.weights == 0.0
        support = np.flatnonzero((zeta != 0.0) | unpenalized)
        if support.size == 0:
            gap = _stationarity_gap(-self.grad0, self.basis, lam * self.weights)
            if gap <= _POLISH_DUAL_SLACK * lam + 1e-12:
                return np.zeros(self.p)
            return None
        s = support.size
        signs = np.where(unpenalized[support], 0.0, np.sign(zeta[support]))
        kkt = np.zeros((s + self.r, s + self.r))
        kkt[:s, :s] = self.gram_n[np.ix_(support, support)]
        kkt[:s, s:] = self.basis[support]
        kkt[s:, :s] = self.basis[support].T
        rhs = np.concatenate(
            [self.grad0[support] - lam * self.weights[support] * signs, np.zeros(self.r)]
        )
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        if np.max(np.abs(kkt @ sol - rhs)) > _POLISH_RESIDUAL_TOL * (1.0 + np.max(np.abs(rhs))):
            return None
        beta = np.zeros(self.p)
        beta[support] = sol[:s]
        kappa = sol[s:]
        scale = max(1.0, float(np.max(np.abs(beta))))
        if np.any(signs * beta[support] < -_POLISH_SIGN_TOL * scale):
            return None
        cons = self.data.constraint
        if np.max(np.abs(cons.residual(beta))) > _FEASIBILITY_TOL * (1.0 + np.linalg.norm(beta)):
            return None
        grad = self.gradient(beta) + self.basis @ kappa
        off = np.setdiff1d(np.arange(self.p), support, assume_unique=True)
        slack = lam * self.weights[off] * (1.0 + _POLISH_DUAL_SLACK) + 1e-12
        if off.size and np.any(np.abs(grad[off]) > slack):
            return None
        return beta

    def solve(self, lam: float, config: SolverConfig = SolverConfig(), zeta0=None, u0=None):
        """Run ADMM + polish. Returns (FitResult, zeta, u) for warm chaining."""
        lam = check_nonnegative(lam, "lambda")
        unit_weights = bool(np.all(self.weights == 1.0))
        if unit_weights and lam >= self.lambda_max * (1.0 - _LAMBDA_MAX_SLACK) and lam > 0.0:
            result = self._zero_result(lam)
            return result, np.zeros(self.p), np.zeros(self.p)
        if unit_weights and lam == 0.0 and self.lambda_max == 0.0:
            result = self._zero_result(lam)
            return result, np.zeros(self.p), np.zeros(self.p)

        rho = config.admm_rho
        zeta = np.zeros(self.p) if zeta0 is None else np.asarray(zeta0, dtype=float).copy()
        u = np.zeros(self.p) if u0 is None else np.asarray(u0, dtype=float).copy()
        if config.warm_start is not None:
            zeta = np.asarray(config.warm_start, dtype=float).copy()
        beta = zeta.copy()
        primal = dual = np.inf
        converged = False
        iterations = 0
        rhs = np.zeros(self.p + self.r)
        for it in range(1, config.max_iter + 1):
            iterations = it
            rhs[: self.p] = self.grad0 + rho * (zeta - u)
            sol = lu_solve(self._factor(rho), rhs)
            beta = sol[: self.p]
            zeta_old = zeta
            zeta = soft_threshold(beta + u, lam * self.weights / rho)
            u = u + beta - zeta
            primal = float(np.linalg.norm(beta - zeta))
            dual = float(rho * np.linalg.norm(zeta - zeta_old))
            eps_pri = config.tol_primal * max(
                1.0, float(np.linalg.norm(beta)), float(np.linalg.norm(zeta))
            )
            eps_dual = config.tol_dual * max(1.0, float(rho * np.linalg.norm(u)))
            if primal <= eps_pri and dual <= eps_dual:
                converged = True
                break
            if it % _RHO_CHECK_EVERY == 0:
                if primal > _RHO_RATIO * dual:
                    rho *= 2.0
                    u /= 2.0
                elif dual > _RHO_RATIO * primal:
                    rho /= 2.0
                    u *= 2.0

        beta_hat = beta
        polished = False
        if config.polish:
            candidate = self._polish(zeta, lam)
            if candidate is not None:
                beta_hat = candidate
                polished = True
        result = FitResult(
            beta_hat=beta_hat,
            lam=lam,
            iterations=iterations,
            primal_residual=primal,
            dual_residual=dual,
            kkt_gap=self.kkt_gap(beta_hat, lam),
            objective=self.objective(beta_hat, lam),
            converged=converged,
            polished=polished,
        )
        return result, zeta, u


def solve_constrained_lasso(
    data: RegressionData,
    lam: float,
    config: SolverConfig = SolverConfig(),
    weights=None,
) -> FitResult:
    """Solve (1/2n)||y - B beta||^2 + lam * ||beta||_1 s.t. C^T beta = 0.

    weights optionally rescales the penalty per coordinate (0 leaves a
    coordinate unpenalized, e.g. an intercept). Non-convergence is
    reported through FitResult.converged, never silently.
    """
    result, _, _ = _Problem(data, weights=weights).solve(lam, config)
    return result


def kkt_certificate(data: RegressionData, beta, lam: float) -> float:
    """Stationarity gap of beta at penalty lam; <= 0 certifies optimality.

    Raises if beta violates the constraint by more than 1e-6 relative.
    """
    beta = check_vector(beta, length=data.p, name="beta")
    lam = check_nonnegative(lam, "lambda")
    infeas = float(np.max(np.abs(data.constraint.residual(beta))))
    if infeas > 1e-6 * (1.0 + float(np.linalg.norm(beta))):
        raise ValueError(f"beta is infeasible: ||C^T beta||_inf = {infeas:.3e}")
    return _Problem(data).kkt_gap(beta, lam)


def lambda_max(data: RegressionData) -> float:
    """||(1/n) Bbar^T y||_inf: beta = 0 is optimal at or above this lambda."""
    return _Problem(data).lambda_max


def lambda_grid(lam_max: float, num: int, ratio: float) -> np.ndarray:
    if num < 2:
        raise ValueError(f"num must be >= 2, got {num}")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    return lam_max * np.geomspace(1.0, ratio, num)


def lambda_path(
    data: RegressionData,
    num: int = 50,
    ratio: float = 0.01,
    config: SolverConfig = SolverConfig(),
) -> list[tuple[float, FitResult]]:
    """Geometric path from lambda_max down to ratio * lambda_max, warm-started."""
    problem = _Problem(data)
    grid = lambda_grid(problem.lambda_max, num, ratio)
    out = []
    zeta = u = None
    for lam in grid:
        result, zeta, u = problem.solve(float(lam), config, zeta0=zeta, u0=u)
        out.append((float(lam), result))
    return out


def theoretical_lambda(
    sigma: float,
    p: int,
    n: int,
    nu_bar: float,
    beta_norm: float,
    zeta_max: float | None = None,
    constant: float = 1.0,
) -> float:
    """Penalty level from the error-bound analysis, up to the constant.

    Base form: constant * sqrt(log(p)/n * (sigma^2 + (p/nu_bar) * beta_norm^2))
    with beta_norm the l2 norm of the target. Passing zeta_max switches to
    the overdispersed form
    constant * sqrt(log(p)/n) * (sigma + sqrt(p * zeta_max / nu_bar) * beta_norm)
    where beta_norm is then the l1 norm.
    """
    if p < 2 or n < 1:
        raise ValueError(f"need p >= 2 and n >= 1, got p={p}, n={n}")
    sigma = check_nonnegative(sigma, "sigma")
    nu_bar = check_positive(nu_bar, "nu_bar", allow_inf=True)
    beta_norm = check_nonnegative(beta_norm, "beta_norm")
    rate = np.log(p) / n
    if zeta_max is None:
        return float(constant * np.sqrt(rate * (sigma**2 + (p / nu_bar) * beta_norm**2)))
    if zeta_max <= 0:
        raise ValueError(f"zeta_max must be > 0, got {zeta_max}")
    return float(constant * np.sqrt(rate) * (sigma + np.sqrt(p * zeta_max / nu_bar) * beta_norm))
