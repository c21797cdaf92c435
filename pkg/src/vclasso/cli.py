"""Command-line front end.

Subcommands: fit, select, simulate, bench, bias, rip, rerun. Every run
writes a manifest.json holding the exact argv, so `vclasso rerun
--manifest <path> --out <dir>` regenerates the numeric outputs
bit-for-bit (wall-clock columns aside). Errors leave no partial output:
all results are computed before the first file is written.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constraints import ConstraintSpec, RegressionData, center_design
from .correction import (
    correct_dirichlet_multinomial,
    correct_multinomial,
    zero_replace,
)
from .counts import CountMatrix, load_counts
from .diagnostics import bias_curve, rip_constant
from .overdispersion import estimate_alpha_all, load_groups, pair_halves_groups
from .selection import (
    cv_select_lambda,
    refit_on_support,
    stability_report_json,
    stability_select,
    write_stability_csv,
)
from .simulate import (
    DEFAULT_DEPTH_MEAN,
    DEFAULT_DEPTH_VARIANCE,
    CompositionLaw,
    DepthLaw,
    SimScenario,
    default_beta_star,
    run_scenario_grid,
    simulate_dataset,
    write_results_csv,
)
from .solver import SolverConfig, solve_constrained_lasso

_OUT_ENV = "VCLASSO_OUT"


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _json_safe(value):
    """Floats that JSON cannot carry (inf/nan) become strings."""
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _manifest_text(command: str, argv: list[str]) -> str:
    return _json_text(
        {
            "command": command,
            "argv": list(argv),
            "package": {"name": "vclasso", "version": __version__},
        }
    )


def _emit(outdir: str, files: dict[str, str]) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (out / name).write_text(content, encoding="utf-8")


def _resolve_out(args) -> str:
    out = args.out or os.environ.get(_OUT_ENV)
    if not out:
        raise ValueError(f"no output directory: pass --out or set {_OUT_ENV}")
    return out


def _parse_alpha(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return np.inf
    value = float(text)
    if value <= 0:
        raise ValueError(f"alpha must be positive or 'inf', got {text}")
    return value


def _parse_list(text: str, cast):
    items = [piece.strip() for piece in text.split(",") if piece.strip()]
    if not items:
        raise ValueError(f"empty list argument: {text!r}")
    return [cast(piece) for piece in items]


def _load_response(path, sample_ids) -> np.ndarray:
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in _csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty response file")
    id_index = {sid: i for i, sid in enumerate(sample_ids)}

    def is_float(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    if len(rows[0]) >= 2:
        if not is_float(rows[0][1]):
            rows = rows[1:]
        y = np.full(len(sample_ids), np.nan)
        for k, row in enumerate(rows):
            sid = row[0].strip()
            if sid not in id_index:
                raise ValueError(f"{path}: unknown sample id {sid!r} at row {k + 1}")
            y[id_index[sid]] = float(row[1])
        if np.any(np.isnan(y)):
            missing = sample_ids[int(np.argmax(np.isnan(y)))]
            raise ValueError(f"{path}: no response for sample {missing!r}")
        return y
    flat = [row[0].strip() for row in rows]
    if not is_float(flat[0]):
        flat = flat[1:]
    if len(flat) != len(sample_ids):
        raise ValueError(f"{path}: {len(flat)} responses for {len(sample_ids)} samples")
    return np.asarray([float(v) for v in flat])


def _load_matrix(path) -> np.ndarray:
    """Numeric CSV, tolerating a header row and a leading id column."""
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in _csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")

    def is_float(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    if not all(is_float(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    drop_first = any(not is_float(r[0]) for r in rows)
    data = [[float(c) for c in (r[1:] if drop_first else r)] for r in rows]
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.asarray(data, dtype=float)


def _resolve_groups(args, counts: CountMatrix):
    if getattr(args, "pair_halves", False) and getattr(args, "groups", None):
        raise ValueError("pass either --groups or --pair-halves, not both")
    if getattr(args, "pair_halves", False):
        return pair_halves_groups(counts.n_samples)
    if getattr(args, "groups", None):
        return load_groups(args.groups, counts.sample_ids)
    return None


def _build_design(args, counts: CountMatrix, groups):
    """Corrected design per the CLI flags, plus a description for the report."""
    if args.correction == "zr":
        design = zero_replace(counts, args.zr_c)
        return design, {"correction": "zr", "c": args.zr_c}
    if args.alpha == "mom":
        if not groups:
            raise ValueError("--alpha mom needs replicate groups (--groups or --pair-halves)")
        alpha_vec = estimate_alpha_all(counts, groups)
        design = correct_dirichlet_multinomial(counts, alpha_vec)
        return design, {
            "correction": "vc",
            "alpha": "mom",
            "alpha_values": [_fmt(float(a)) for a in alpha_vec],
        }
    alpha = _parse_alpha(args.alpha)
    if np.isinf(alpha):
        return correct_multinomial(counts), {"correction": "vc", "alpha": "inf"}
    design = correct_dirichlet_multinomial(counts, alpha)
    return design, {"correction": "vc", "alpha": alpha}


def _build_constraint(args, n: int, p: int, design_matrix: np.ndarray):
    """Constraint and design, adding an unpenalized intercept column when
    the all-ones direction is not covered by the requested constraint."""
    if not getattr(args, "constraint_file", None):
        return ConstraintSpec.sum_zero(p), design_matrix, None, False
    cmat = _load_matrix(args.constraint_file)
    if cmat.shape[0] != p:
        raise ValueError(f"constraint matrix has {cmat.shape[0]} rows, design has {p} columns")
    spec = ConstraintSpec.from_matrix(cmat)
    ones = np.ones(p)
    residual = ones - spec.basis @ (spec.basis.T @ ones)
    if np.max(np.abs(residual)) <= 1e-8 * np.sqrt(p):
        return spec, design_matrix, None, False
    _warn(
        "the all-ones direction is not in the constraint span; "
        "adding an unpenalized intercept column"
    )
    extended = np.hstack([design_matrix, np.ones((n, 1))])
    spec = ConstraintSpec.from_matrix(np.vstack([cmat, np.zeros((1, cmat.shape[1]))]))
    weights = np.concatenate([np.ones(p), [0.0]])
    return spec, extended, weights, True


def _solver_config(args) -> SolverConfig:
    return SolverConfig()


def cmd_fit(args, argv) -> int:
    outdir = _resolve_out(args)
    counts = load_counts(args.counts)
    y = _load_response(args.response, counts.sample_ids)
    groups = _resolve_groups(args, counts)
    design, correction_info = _build_design(args, counts, groups)
    p = counts.n_taxa
    spec, design_matrix, weights, has_intercept = _build_constraint(
        args, counts.n_samples, p, design.matrix
    )
    data = RegressionData(design=design_matrix, response=y, constraint=spec)
    config = _solver_config(args)

    if args.lam == "cv":
        lam, curve = cv_select_lambda(
            data, folds=args.folds, num=args.num, ratio=args.ratio,
            seed=args.seed, groups=groups, config=config, weights=weights,
        )
        lambda_rule = "cv"
    else:
        lam = float(args.lam)
        if lam <= 0:
            raise ValueError(f"--lambda must be positive or 'cv', got {args.lam}")
        lambda_rule = "fixed"
    result = solve_constrained_lasso(data, lam, config, weights=weights)
    if not result.converged and not result.polished:
        _warn(f"solver did not converge in {result.iterations} iterations")

    beta = np.asarray(result.beta_hat[:p])
    intercept = float(result.beta_hat[p]) if has_intercept else None
    feasibility = float(np.max(np.abs(spec.residual(result.beta_hat))))
    payload = {
        "lambda": lam,
        "lambda_rule": lambda_rule,
        "kkt_gap": result.kkt_gap,
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": bool(result.converged),
        "polished": bool(result.polished),
        "feasibility": feasibility,
        "beta": [float(b) for b in beta],
        "intercept": intercept,
        "correction": correction_info,
        "seed": args.seed,
    }
    buf = io.StringIO()
    import csv as _csv

    writer = _csv.writer(buf)
    writer.writerow(["taxon", "coefficient"])
    for taxon, value in zip(counts.taxon_ids, beta):
        writer.writerow([taxon, repr(float(value))])
    if has_intercept:
        writer.writerow(["_intercept", repr(intercept)])

    _emit(
        outdir,
        {
            "fit.json": _json_text(_json_safe(payload)),
            "coefficients.csv": buf.getvalue(),
            "manifest.json": _manifest_text("fit", argv),
        },
    )
    return 0


def cmd_select(args, argv) -> int:
    outdir = _resolve_out(args)
    counts = load_counts(args.counts)
    y = _load_response(args.response, counts.sample_ids)
    groups = _resolve_groups(args, counts)
    design, correction_info = _build_design(args, counts, groups)
    p = counts.n_taxa
    if getattr(args, "constraint_file", None):
        spec = ConstraintSpec.from_matrix(_load_matrix(args.constraint_file))
        ones = np.ones(p)
        residual = ones - spec.basis @ (spec.basis.T @ ones)
        if np.max(np.abs(residual)) > 1e-8 * np.sqrt(p):
            raise ValueError(
                "select requires the all-ones direction inside the constraint span; "
                "use fit for intercept-augmented models"
            )
    else:
        spec = ConstraintSpec.sum_zero(p)
    data = RegressionData(design=design.matrix, response=y, constraint=spec)
    subsample_size = max(2, int(np.floor(args.subsample_frac * counts.n_samples)))
    report = stability_select(
        data,
        num_bootstrap=args.bootstrap,
        subsample_size=subsample_size,
        threshold=args.threshold,
        folds=args.folds,
        seed=args.seed,
        num=args.num,
        ratio=args.ratio,
        groups=groups,
        config=_solver_config(args),
    )
    refit_beta = None
    if len(report.selected) == 0:
        _warn("no variable reached the selection threshold")
    elif len(report.selected) < 2:
        _warn("a single selected variable cannot be refit under the sum-zero constraint")
    else:
        refit_beta = refit_on_support(data, report.selected)

    payload = stability_report_json(report)
    payload["correction"] = correction_info
    payload["refit_coefficients"] = (
        None if refit_beta is None else [float(b) for b in refit_beta]
    )
    buf = io.StringIO()
    write_stability_csv(buf, report, counts.taxon_ids, refit_beta)
    _emit(
        outdir,
        {
            "stability.json": _json_text(_json_safe(payload)),
            "stability.csv": buf.getvalue(),
            "manifest.json": _manifest_text("select", argv),
        },
    )
    return 0


def _scenario_from_args(args) -> SimScenario:
    alpha = _parse_alpha(args.alpha)
    if args.depth == "poisson":
        law = DepthLaw("poisson", args.depth_mean)
    else:
        law = DepthLaw("neg_binomial", args.depth_mean, args.depth_var)
    return SimScenario(
        n=args.n,
        p=args.p,
        depth_law=law,
        composition_law=CompositionLaw(),
        alpha=alpha,
        beta_star=default_beta_star(args.p),
        sigma=args.sigma,
        paired=args.paired,
        shared_noise=args.shared_noise,
        seed=(args.seed,),
    )


def cmd_simulate(args, argv) -> int:
    import csv as _csv

    outdir = _resolve_out(args)
    scenario = _scenario_from_args(args)
    dataset = simulate_dataset(scenario)
    counts = dataset.counts

    counts_buf = io.StringIO()
    writer = _csv.writer(counts_buf)
    writer.writerow(["sample_id", *counts.taxon_ids])
    for sid, row in zip(counts.sample_ids, counts.counts):
        writer.writerow([sid, *[int(v) for v in row]])

    resp_buf = io.StringIO()
    writer = _csv.writer(resp_buf)
    writer.writerow(["sample_id", "y"])
    for sid, value in zip(counts.sample_ids, dataset.y):
        writer.writerow([sid, repr(float(value))])

    x_buf = io.StringIO()
    writer = _csv.writer(x_buf)
    writer.writerow(["sample_id", *counts.taxon_ids])
    for sid, row in zip(counts.sample_ids, dataset.x_true):
        writer.writerow([sid, *[repr(float(v)) for v in row]])

    beta_buf = io.StringIO()
    writer = _csv.writer(beta_buf)
    writer.writerow(["taxon", "beta_star"])
    for taxon, value in zip(counts.taxon_ids, dataset.beta_star):
        writer.writerow([taxon, repr(float(value))])

    scenario_payload = {
        "n": scenario.n,
        "p": scenario.p,
        "alpha": scenario.alpha,
        "sigma": scenario.sigma,
        "depth_law": {
            "kind": scenario.depth_law.kind,
            "mean": scenario.depth_law.mean,
            "variance": scenario.depth_law.variance,
        },
        "composition_blocks": [list(b) for b in scenario.composition_law.blocks],
        "within_sd": scenario.composition_law.within_sd,
        "paired": scenario.paired,
        "shared_noise": scenario.shared_noise,
        "seed": list(scenario.seed),
        "beta_star": [float(b) for b in scenario.beta_star],
    }
    files = {
        "counts.csv": counts_buf.getvalue(),
        "response.csv": resp_buf.getvalue(),
        "x_true.csv": x_buf.getvalue(),
        "beta_star.csv": beta_buf.getvalue(),
        "scenario.json": _json_text(_json_safe(scenario_payload)),
        "manifest.json": _manifest_text("simulate", argv),
    }
    if dataset.replicate_groups:
        groups_buf = io.StringIO()
        writer = _csv.writer(groups_buf)
        writer.writerow(["sample_id", "group_id"])
        for group in dataset.replicate_groups:
            for row in group.member_rows:
                writer.writerow([counts.sample_ids[row], group.group_id])
        files["groups.csv"] = groups_buf.getvalue()
    _emit(outdir, files)
    return 0


def cmd_bench(args, argv) -> int:
    outdir = _resolve_out(args)
    if args.depth == "poisson":
        law = DepthLaw("poisson", args.depth_mean)
    else:
        law = DepthLaw("neg_binomial", args.depth_mean, args.depth_var)
    rows = run_scenario_grid(
        n_grid=_parse_list(args.n_grid, int),
        p_grid=_parse_list(args.p_grid, int),
        alpha_grid=_parse_list(args.alpha_grid, _parse_alpha),
        replicates=args.replicates,
        methods=_parse_list(args.methods, str),
        sigma=args.sigma,
        depth_law=law,
        paired=not args.unpaired,
        shared_noise=args.shared_noise,
        master_seed=args.seed,
        folds=args.folds,
        num=args.num,
        ratio=args.ratio,
    )
    failed = [r for r in rows if r["error"]]
    if failed:
        _warn(f"{len(failed)} of {len(rows)} cells failed; see the error column")
    buf = io.StringIO()
    write_results_csv(buf, rows)
    _emit(
        outdir,
        {"results.csv": buf.getvalue(), "manifest.json": _manifest_text("bench", argv)},
    )
    return 0


def cmd_bias(args, argv) -> int:
    import csv as _csv

    outdir = _resolve_out(args)
    curve = bias_curve(
        nu_grid=_parse_list(args.nu_grid, float),
        estimators=_parse_list(args.estimators, str),
        mc_draws=args.draws,
        seed=args.seed,
        mode=args.mode,
    )
    buf = io.StringIO()
    writer = _csv.writer(buf)
    writer.writerow(["nu", "estimator", "bias", "se", "mode"])
    labels = [f"{kind}{c:g}" for kind, c in curve.estimators]
    for i, nu in enumerate(curve.nu_grid):
        for j, label in enumerate(labels):
            writer.writerow(
                [repr(float(nu)), label, repr(float(curve.bias[i, j])), repr(float(curve.se[i, j])), curve.mode]
            )

    width = max(len(lab) for lab in labels) + 2
    lines = ["bias of E[phi(W)] - log(nu), W ~ Poisson(nu)", ""]
    header = "nu".rjust(8) + "".join(lab.rjust(width) for lab in labels)
    lines.append(header)
    for i, nu in enumerate(curve.nu_grid):
        lines.append(
            f"{nu:8g}" + "".join(f"{curve.bias[i, j]:{width}.5f}" for j in range(len(labels)))
        )
    lines.append("")
    _emit(
        outdir,
        {
            "bias.csv": buf.getvalue(),
            "bias.txt": "\n".join(lines),
            "manifest.json": _manifest_text("bias", argv),
        },
    )
    return 0


def cmd_rip(args, argv) -> int:
    outdir = _resolve_out(args)
    matrix = _load_matrix(args.matrix)
    centered = not args.raw
    if centered:
        matrix = center_design(matrix, ConstraintSpec.sum_zero(matrix.shape[1]))
    report = rip_constant(
        matrix, args.s, method=args.method, num_supports=args.num_supports, seed=args.seed
    )
    payload = {
        "s": report.s,
        "delta_s": report.delta_s,
        "method": report.method,
        "num_supports": report.num_supports,
        "is_lower_bound": report.is_lower_bound,
        "matrix_shape": list(report.matrix_shape),
        "centered": centered,
    }
    _emit(
        outdir,
        {"rip.json": _json_text(_json_safe(payload)), "manifest.json": _manifest_text("rip", argv)},
    )
    return 0


def cmd_rerun(args, argv) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    stored = list(manifest["argv"])
    if not stored:
        raise ValueError(f"{args.manifest}: manifest has an empty argv")
    cleaned = []
    skip = False
    for token in stored:
        if skip:
            skip = False
            continue
        if token == "--out":
            skip = True
            continue
        if token.startswith("--out="):
            continue
        cleaned.append(token)
    out = _resolve_out(args)
    return main([*cleaned, "--out", out])


def _add_io_flags(parser, with_correction=True):
    parser.add_argument("--counts", required=True, help="count table CSV")
    parser.add_argument("--response", required=True, help="response CSV (id,value or one value per line)")
    if with_correction:
        parser.add_argument("--correction", choices=("vc", "zr"), default="vc",
                            help="vc: log(W+z); zr: zero replacement")
        parser.add_argument("--zr-c", type=float, default=0.5, help="replacement constant for zr")
        parser.add_argument("--alpha", default="inf",
                            help="'inf', 'mom' (estimate from replicate groups), or a positive number")
        parser.add_argument("--groups", default=None, help="CSV of sample_id,group_id replicate pairs")
        parser.add_argument("--pair-halves", action="store_true",
                            help="treat rows i and i+n/2 as replicate pairs")
        parser.add_argument("--constraint-file", default=None,
                            help="p x r CSV of constraint columns (default: sum-zero)")
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--num", type=int, default=30, help="lambda grid size")
    parser.add_argument("--ratio", type=float, default=0.01, help="lambda grid floor ratio")
    parser.add_argument("--seed", type=int, default=0)


def _add_common(parser):
    parser.add_argument("--out", default=None, help=f"output directory (or set {_OUT_ENV})")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallelism cap; execution is serial in this version")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vclasso",
        description="Variable-corrected constrained lasso for count compositional covariates",
    )
    parser.add_argument("--version", action="version", version=f"vclasso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit one model")
    _add_io_flags(fit)
    fit.add_argument("--lambda", dest="lam", default="cv",
                     help="'cv' or a positive penalty value")
    _add_common(fit)
    fit.set_defaults(func=cmd_fit)

    select = sub.add_parser("select", help="stability selection")
    _add_io_flags(select)
    select.add_argument("--bootstrap", type=int, default=100)
    select.add_argument("--subsample-frac", type=float, default=0.5)
    select.add_argument("--threshold", type=float, default=0.6)
    _add_common(select)
    select.set_defaults(func=cmd_select)

    sim = sub.add_parser("simulate", help="draw one synthetic dataset")
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--p", type=int, default=100)
    sim.add_argument("--alpha", default="inf")
    sim.add_argument("--sigma", type=float, default=0.5)
    sim.add_argument("--depth", choices=("poisson", "negbin"), default="negbin")
    sim.add_argument("--depth-mean", type=float, default=DEFAULT_DEPTH_MEAN)
    sim.add_argument("--depth-var", type=float, default=DEFAULT_DEPTH_VARIANCE)
    sim.add_argument("--paired", action="store_true")
    sim.add_argument("--shared-noise", action="store_true")
    sim.add_argument("--seed", type=int, default=0)
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    bench = sub.add_parser("bench", help="benchmark methods over a scenario grid")
    bench.add_argument("--n-grid", default="50,100")
    bench.add_argument("--p-grid", default="100")
    bench.add_argument("--alpha-grid", default="200")
    bench.add_argument("--replicates", type=int, default=20)
    bench.add_argument("--methods", default="vc,zr0.5,oracle")
    bench.add_argument("--sigma", type=float, default=0.5)
    bench.add_argument("--depth", choices=("poisson", "negbin"), default="negbin")
    bench.add_argument("--depth-mean", type=float, default=DEFAULT_DEPTH_MEAN)
    bench.add_argument("--depth-var", type=float, default=DEFAULT_DEPTH_VARIANCE)
    bench.add_argument("--unpaired", action="store_true",
                       help="draw every composition independently (no replicate pairs)")
    bench.add_argument("--shared-noise", action="store_true")
    bench.add_argument("--folds", type=int, default=5)
    bench.add_argument("--num", type=int, default=30)
    bench.add_argument("--ratio", type=float, default=0.01)
    bench.add_argument("--seed", type=int, default=0)
    _add_common(bench)
    bench.set_defaults(func=cmd_bench)

    bias = sub.add_parser("bias", help="correction-bias curve for Poisson counts")
    bias.add_argument("--nu-grid", default="2,5,10,20,50,100")
    bias.add_argument("--estimators", default="add0.25,add0.5,add0.75,add1,zr0.5")
    bias.add_argument("--mode", choices=("exact", "mc"), default="exact")
    bias.add_argument("--draws", type=int, default=200000)
    bias.add_argument("--seed", type=int, default=0)
    _add_common(bias)
    bias.set_defaults(func=cmd_bias)

    rip = sub.add_parser("rip", help="restricted-isometry constant of a design")
    rip.add_argument("--matrix", required=True, help="numeric CSV")
    rip.add_argument("--s", type=int, required=True, help="sparsity level")
    rip.add_argument("--method", choices=("exhaustive", "randomized"), default="exhaustive")
    rip.add_argument("--num-supports", type=int, default=2000)
    rip.add_argument("--raw", action="store_true", help="skip sum-zero centering")
    rip.add_argument("--seed", type=int, default=0)
    _add_common(rip)
    rip.set_defaults(func=cmd_rip)

    rerun = sub.add_parser("rerun", help="replay a recorded manifest")
    rerun.add_argument("--manifest", required=True)
    _add_common(rerun)
    rerun.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, list(argv))
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"category": "input", "message": str(exc)}), file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - structured top-level report
        print(
            json.dumps({"category": "internal", "message": f"{type(exc).__name__}: {exc}"}),
            file=sys.stderr,
        )
        return 3


if __name__ == "__main__":
    sys.exit(main())
