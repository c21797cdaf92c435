"""Acceptance gate: every headline claim at its stated tolerance and budget.

One test per criterion; each prints a single PASS line with the measured
margins when it holds, so `pytest -v -rA tests/test_acceptance.py` reads
as a checklist. Budgets are wall-clock upper bounds asserted per test.
"""

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from vclasso import (
    CompositionLaw,
    ConstraintSpec,
    CountMatrix,
    DepthLaw,
    RegressionData,
    ReplicateGroup,
    SimScenario,
    bias_curve,
    default_beta_star,
    depth_scan,
    estimate_alpha_mom,
    lambda_grid,
    lambda_max,
    rate_scan,
    run_scenario_grid,
    sample_counts,
    solve_constrained_lasso,
)
from vclasso.cli import main as cli_main
from vclasso.rng import rng_from_key

from oracles import beta_binomial_variance, poisson_phi_mean, sign_pattern_qp_oracle


def _report(criterion: str, detail: str) -> None:
    print(f"ACCEPTANCE PASS {criterion}: {detail}")


def test_criterion_bias_ordering():
    """add-1/2 has the smallest |bias| among pseudo-count and zero-replace maps."""
    start = time.perf_counter()
    nus = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
    ests = [("add", 0.5), ("add", 0.25), ("add", 0.75), ("add", 1.0), ("zr", 0.5)]

    oracle = {
        (kind, c, nu): poisson_phi_mean(kind, c, nu) - math.log(nu)
        for kind, c in ests
        for nu in nus
    }
    # library exact series must agree with the independent recurrence
    curve = bias_curve(nus, estimators=ests, mode="exact")
    for i, nu in enumerate(nus):
        for j, (kind, c) in enumerate(ests):
            assert abs(curve.bias[i, j] - oracle[(kind, c, nu)]) <= 1e-9

    for nu in nus:
        assert abs(oracle[("add", 0.5, nu)]) < abs(oracle[("zr", 0.5, nu)]), f"nu={nu}"
    for nu in (5.0, 10.0, 20.0, 50.0, 100.0):
        for c in (0.25, 0.75, 1.0):
            assert abs(oracle[("add", 0.5, nu)]) < abs(oracle[("add", c, nu)]), (
                f"nu={nu}, c={c}"
            )
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    worst = max(abs(oracle[("add", 0.5, nu)]) for nu in nus)
    _report(
        "bias ordering",
        f"add-1/2 beats zr-0.5 at 6 rates and add-c at rates >= 5; "
        f"max |bias(add-1/2)| = {worst:.2e}; {elapsed:.1f}s < 10s",
    )


def test_criterion_solver_oracle_equivalence():
    """ADMM objective matches brute-force sign-pattern enumeration."""
    start = time.perf_counter()
    worst_gap = 0.0
    worst_feas = 0.0
    for seed in range(50):
        rng = rng_from_key(41, seed)
        p = (4, 5, 6)[seed % 3]
        design = rng.normal(size=(20, p))
        beta = np.zeros(p)
        beta[:2] = (1.2, -0.7)
        beta -= beta.mean()
        y = design @ beta + 0.5 * rng.normal(size=20)
        data = RegressionData(
            design=design, response=y, constraint=ConstraintSpec.sum_zero(p)
        )
        for lam in lambda_grid(lambda_max(data), num=3, ratio=0.05):
            fit = solve_constrained_lasso(data, lam)
            best_obj, _ = sign_pattern_qp_oracle(design, y, np.ones((p, 1)), lam)
            gap = abs(fit.objective - best_obj) / max(best_obj, 1e-12)
            assert gap <= 1e-6, f"seed={seed}, lam={lam}: rel gap {gap:.2e}"
            feas = abs(float(fit.beta_hat.sum()))
            assert feas <= 1e-8, f"seed={seed}, lam={lam}: residual {feas:.2e}"
            worst_gap = max(worst_gap, gap)
            worst_feas = max(worst_feas, feas)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(
        "solver oracle equivalence",
        f"150 fits across 50 seeds; worst rel gap {worst_gap:.2e} <= 1e-6, "
        f"worst residual {worst_feas:.2e} <= 1e-8; {elapsed:.1f}s < 30s",
    )


def _run_cli(*argv) -> int:
    return cli_main([str(a) for a in argv])


def _fit_certificate(outdir: Path) -> tuple[float, float, float]:
    payload = json.loads((outdir / "fit.json").read_text())
    beta = list(payload["beta"])
    if payload.get("intercept") is not None:
        beta.append(payload["intercept"])
    norm = float(np.linalg.norm(beta))
    return payload["kkt_gap"], payload["lambda"], payload["feasibility"] / (1 + norm)


def test_criterion_fit_command_certificates(tmp_path):
    """Every fit the CLI emits carries a passing KKT and feasibility certificate."""
    sim = tmp_path / "sim"
    assert _run_cli(
        "simulate", "--n", 20, "--p", 12, "--seed", 11,
        "--depth", "poisson", "--depth-mean", 3000, "--out", sim,
    ) == 0
    paired = tmp_path / "paired"
    assert _run_cli(
        "simulate", "--n", 20, "--p", 12, "--seed", 12, "--alpha", 200,
        "--depth", "poisson", "--depth-mean", 3000, "--paired", "--out", paired,
    ) == 0
    cons = tmp_path / "constraint.csv"
    col = np.zeros(12)
    col[0], col[1] = 1.0, -1.0
    cons.write_text("\n".join(str(v) for v in col) + "\n")

    variants = [
        ("vc_inf_cv", sim, ["--correction", "vc", "--alpha", "inf"]),
        ("vc_inf_fixed", sim, ["--correction", "vc", "--alpha", "inf", "--lambda", "0.05"]),
        ("vc_alpha200", sim, ["--alpha", "200", "--lambda", "0.02"]),
        ("zr_cv", sim, ["--correction", "zr", "--zr-c", "0.5"]),
        ("zr_c01", sim, ["--correction", "zr", "--zr-c", "0.1", "--lambda", "0.05"]),
        ("mom_pairs", paired, ["--alpha", "mom", "--pair-halves"]),
        ("constraint_intercept", sim, ["--constraint-file", str(cons), "--lambda", "0.05"]),
    ]
    checked = 0
    worst_kkt_ratio = 0.0
    worst_feas = 0.0
    for name, src, flags in variants:
        out = tmp_path / name
        code = _run_cli(
            "fit", "--counts", src / "counts.csv", "--response", src / "response.csv",
            "--folds", 4, "--num", 12, *flags, "--out", out,
        )
        assert code == 0, name
        kkt_gap, lam, feas_rel = _fit_certificate(out)
        assert kkt_gap <= 1e-4 * lam, f"{name}: kkt_gap {kkt_gap:.2e} at lambda {lam:.3e}"
        assert feas_rel <= 1e-8, f"{name}: relative feasibility {feas_rel:.2e}"
        worst_kkt_ratio = max(worst_kkt_ratio, kkt_gap / lam if lam else 0.0)
        worst_feas = max(worst_feas, feas_rel)
        checked += 1
    _report(
        "fit command certificates",
        f"{checked} flag variants; worst kkt_gap/lambda {worst_kkt_ratio:.2e} <= 1e-4, "
        f"worst relative feasibility {worst_feas:.2e} <= 1e-8",
    )


def test_criterion_dm_moment_conformity():
    """Count sampler matches exact beta-binomial moments at fixed depth."""
    start = time.perf_counter()
    draws, depth, p = 100_000, 30_000, 10
    x_row = np.arange(1.0, p + 1.0)
    x_row = x_row / x_row.sum()
    beta = np.array([1.0, -1.0, 0.5, -0.5, 0.25, -0.25, 0, 0, 0, 0])
    worst_mean_sds = 0.0
    worst_var_rel = 0.0
    for alpha, key in ((200.0, 1), (np.inf, 2)):
        scen = SimScenario(
            n=draws, p=p, depth_law=DepthLaw("fixed", depth),
            composition_law=CompositionLaw(blocks=((0.0, 1.0, None),)),
            alpha=alpha, beta_star=beta, sigma=0.1, seed=(101, key),
        )
        counts = sample_counts(scen, np.tile(x_row, (draws, 1)))
        w = counts.counts.astype(float)
        var_oracle = beta_binomial_variance(depth, alpha, x_row)
        mean_sds = np.abs(w.mean(axis=0) - depth * x_row) / np.sqrt(var_oracle / draws)
        assert np.all(mean_sds <= 3.0), f"alpha={alpha}: {mean_sds.max():.2f} sigma"
        var_rel = np.abs(w.var(axis=0, ddof=1) / var_oracle - 1.0)
        assert np.all(var_rel <= 0.03), f"alpha={alpha}: {var_rel.max():.4f}"
        worst_mean_sds = max(worst_mean_sds, float(mean_sds.max()))
        worst_var_rel = max(worst_var_rel, float(var_rel.max()))
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report(
        "dm moment conformity",
        f"1e5 draws, alpha in (200, inf): worst mean gap {worst_mean_sds:.2f} sigma <= 3, "
        f"worst variance error {worst_var_rel:.3%} <= 3%; {elapsed:.1f}s < 60s",
    )


def _method_errors(rows, method):
    picked = sorted(
        (r for r in rows if r["method"] == method), key=lambda r: r["replicate"]
    )
    assert all(r["error"] == "" for r in picked)
    return (
        np.array([r["est_err"] for r in picked]),
        np.array([r["pred_err"] for r in picked]),
    )


def test_criterion_vc_outperforms_zero_replacement():
    """Correction beats zero replacement on the deep-sequencing benchmark cell."""
    details = []
    for shared, seed in ((False, 2024), (True, 2025)):
        start = time.perf_counter()
        rows = run_scenario_grid(
            [50], [100], [200.0], replicates=20, methods=("vc", "zr0.5"),
            shared_noise=shared, master_seed=seed,
        )
        vc_est, vc_pred = _method_errors(rows, "vc")
        zr_est, zr_pred = _method_errors(rows, "zr0.5")
        label = "shared-noise" if shared else "independent-noise"
        assert np.median(vc_est) < np.median(zr_est), label
        assert np.median(vc_pred) < np.median(zr_pred), label
        est_wins = float(np.mean(vc_est < zr_est))
        pred_wins = float(np.mean(vc_pred < zr_pred))
        assert est_wins >= 0.8, f"{label}: est wins {est_wins:.2f}"
        assert pred_wins >= 0.8, f"{label}: pred wins {pred_wins:.2f}"
        elapsed = time.perf_counter() - start
        assert elapsed < 600.0, f"{label}: {elapsed:.0f}s"
        details.append(
            f"{label}: est medians {np.median(vc_est):.2f} < {np.median(zr_est):.2f} "
            f"(wins {est_wins:.0%}), pred {np.median(vc_pred):.2f} < {np.median(zr_pred):.2f} "
            f"(wins {pred_wins:.0%}), {elapsed:.0f}s < 600s"
        )
    _report("vc outperforms zero replacement", "; ".join(details))


def test_criterion_error_rate_direction():
    """Estimation error scales like 1/n and falls with sequencing depth."""
    start = time.perf_counter()
    base = SimScenario(
        n=2, p=100, depth_law=DepthLaw("poisson", 3e4),
        composition_law=CompositionLaw(), alpha=np.inf,
        beta_star=default_beta_star(100), sigma=0.5, seed=(0,),
    )
    report = rate_scan(
        base, n_grid=[100, 200, 400, 800], replicates=30, method="oracle",
        master_seed=7, n_boot=200,
    )
    assert -1.35 <= report.slope <= -0.65, f"slope {report.slope:.3f}"

    depth_base = SimScenario(
        n=50, p=100, depth_law=DepthLaw("poisson", 1000),
        composition_law=CompositionLaw(), alpha=np.inf,
        beta_star=default_beta_star(100), sigma=0.0, seed=(0,),
    )
    rows = depth_scan(
        depth_base, factors=(1.0, 4.0, 16.0), replicates=8, method="vc", master_seed=3
    )
    medians = [r["median_est_err"] for r in rows]
    assert medians[0] > medians[1] > medians[2], medians
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    _report(
        "error rate direction",
        f"log-log slope {report.slope:.2f} in [-1.35, -0.65] "
        f"(CI [{report.ci_low:.2f}, {report.ci_high:.2f}]); depth medians "
        f"{medians[0]:.3f} > {medians[1]:.3f} > {medians[2]:.3f}; {elapsed:.0f}s < 600s",
    )


def _draw_replicate_group(gid: int, alpha: float, p=100, depth_mean=30_000, j=4):
    """Known-alpha sampler independent of the package's count generator."""
    rng = rng_from_key(71, 0 if np.isinf(alpha) else int(alpha), gid)
    mu = np.concatenate(
        [rng.uniform(1, 3, 3), rng.uniform(2, 4, 4), rng.uniform(0, 2, p - 7)]
    )
    phi = rng.normal(mu, 1.5)
    x = np.exp(phi - phi.max())
    x = x / x.sum()
    depths = rng.poisson(depth_mean, size=j)
    w = np.empty((j, p), dtype=np.int64)
    for row in range(j):
        q = x if np.isinf(alpha) else rng.dirichlet(alpha * x)
        w[row] = rng.multinomial(int(depths[row]), q)
    return w


def test_criterion_mom_alpha_calibration():
    """Moment estimator recovers the overdispersion scale from replicates."""
    start = time.perf_counter()
    group = ReplicateGroup(member_rows=(0, 1, 2, 3))
    alphas = [
        estimate_alpha_mom(
            CountMatrix.from_array(_draw_replicate_group(g, 200.0)), group
        ).alpha_hat
        for g in range(200)
    ]
    med_alpha = float(np.median(alphas))
    assert 100.0 <= med_alpha <= 400.0, f"median alpha_hat {med_alpha:.1f}"

    thetas = [
        estimate_alpha_mom(
            CountMatrix.from_array(_draw_replicate_group(g, np.inf)), group
        ).theta_hat
        for g in range(200)
    ]
    med_theta = float(np.median(thetas))
    assert med_theta <= 0.005, f"median theta_hat {med_theta:.5f}"
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    _report(
        "mom alpha calibration",
        f"median alpha_hat {med_alpha:.0f} within [100, 400] at truth 200; "
        f"multinomial median theta_hat {med_theta:.4f} <= 0.005; {elapsed:.1f}s < 120s",
    )


def _tree_bytes(root: Path, skip=("manifest.json",)) -> dict:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.name not in skip}


def _strip_runtime(path: Path) -> list:
    rows = list(csv.reader(path.read_text().splitlines()))
    drop = rows[0].index("runtime_ms")
    return [[c for k, c in enumerate(r) if k != drop] for r in rows]


def test_criterion_manifest_rerun_determinism(tmp_path):
    """Replaying any command's manifest regenerates its numeric outputs."""
    sim = tmp_path / "sim"
    assert _run_cli(
        "simulate", "--n", 16, "--p", 10, "--seed", 21,
        "--depth", "poisson", "--depth-mean", 2000, "--out", sim,
    ) == 0
    matrix = tmp_path / "m.csv"
    rng = rng_from_key(99)
    matrix.write_text(
        "\n".join(
            ",".join(repr(float(v)) for v in row) for row in rng.normal(size=(12, 6))
        )
        + "\n"
    )

    runs = {
        "simulate": ["simulate", "--n", 16, "--p", 10, "--seed", 21,
                     "--depth", "poisson", "--depth-mean", 2000],
        "fit": ["fit", "--counts", sim / "counts.csv", "--response", sim / "response.csv",
                "--folds", 3, "--num", 8, "--seed", 4],
        "select": ["select", "--counts", sim / "counts.csv", "--response",
                   sim / "response.csv", "--bootstrap", 3, "--num", 6, "--folds", 3,
                   "--seed", 8],
        "bias": ["bias", "--nu-grid", "2,10", "--estimators", "add0.5,zr0.5",
                 "--mode", "mc", "--draws", 20000, "--seed", 6],
        "rip": ["rip", "--matrix", matrix, "--s", 2, "--seed", 5],
        "bench": ["bench", "--n-grid", "8", "--p-grid", "10", "--alpha-grid", "inf",
                  "--replicates", 1, "--methods", "vc", "--depth", "poisson",
                  "--depth-mean", 2000, "--num", 6, "--folds", 3, "--seed", 2],
    }
    verified = []
    for name, args in runs.items():
        first = tmp_path / f"{name}_a"
        replay = tmp_path / f"{name}_b"
        assert _run_cli(*args, "--out", first) == 0, name
        assert _run_cli("rerun", "--manifest", first / "manifest.json", "--out", replay) == 0, name
        if name == "bench":
            # runtime_ms is wall-clock; every numeric column must agree
            assert _strip_runtime(first / "results.csv") == _strip_runtime(
                replay / "results.csv"
            ), name
            assert (first / "manifest.json").exists() and (replay / "manifest.json").exists()
        else:
            assert _tree_bytes(first) == _tree_bytes(replay), name
        verified.append(name)
    _report(
        "manifest rerun determinism",
        f"bit-exact replay for {', '.join(verified)} "
        "(bench compared with the wall-clock column removed)",
    )
