"""Command-line front end.

Commands: spectrum, perturb, break-kernel, product, curvature-check.
Each command reads one YAML config (--config), writes CSV reports plus a
rendered PNG figure into the output directory, and is deterministic for a
fixed config and seed.

Exit codes:
    0  success
    2  configuration error (bad YAML, unknown keys, out-of-range values,
       excluded coupling for kernel-breaking commands)
    3  eigensolver convergence failure
    4  first-order degeneracy: no kernel eigenfunction yields a usable
       breaking tensor (e.g. the flat torus)
    5  domain error (non-SPD metric, non-positive conformal factor,
       non-traceless direction, constant field, excluded coupling)
    6  search failure (no sign change, line search exhausted, empty kernel,
       empty admissible set, inadequate truncation)
    7  unexpected internal error

Environment: CONFSPEC_OUT overrides the default output directory,
CONFSPEC_THREADS the sweep thread count; flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from . import operators as ops
from . import perturbation as pert
from . import products as prod
from . import recipes, reporting
from .config import build_grid, config_hash, load_config, resolve_coupling
from .errors import (
    ConfigError,
    ConstantField,
    ConvergenceFailure,
    DisallowedCoupling,
    EmptyAdmissibleSet,
    EmptyKernel,
    FirstOrderDegenerate,
    LineSearchFailure,
    NonNegativeScalarCurvature,
    NonPositiveConformalFactor,
    NoSignChange,
    NotTraceless,
    SingularMetric,
    SPDViolation,
    TruncationInadequate,
)
from .fieldio import write_field
from .grids import MetricField, SymTensorField

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_DEGENERATE = 4
EXIT_DOMAIN = 5
EXIT_SEARCH = 6
EXIT_INTERNAL = 7

_ERROR_CODES = [
    ((ConfigError,), EXIT_CONFIG),
    ((ConvergenceFailure,), EXIT_CONVERGENCE),
    ((FirstOrderDegenerate,), EXIT_DEGENERATE),
    (
        (
            SingularMetric,
            SPDViolation,
            NonPositiveConformalFactor,
            NotTraceless,
            ConstantField,
            DisallowedCoupling,
            NonNegativeScalarCurvature,
        ),
        EXIT_DOMAIN,
    ),
    (
        (NoSignChange, LineSearchFailure, EmptyKernel, EmptyAdmissibleSet, TruncationInadequate),
        EXIT_SEARCH,
    ),
]


def _exit_code_for(err: Exception) -> int:
    for classes, code in _ERROR_CODES:
        if isinstance(err, classes):
            return code
    return EXIT_INTERNAL


def _direction(grid, spec, base: MetricField) -> SymTensorField:
    recipe = spec["recipe"]
    if recipe == "zero":
        return SymTensorField.zero(grid)
    if recipe == "metric":
        return base.tensor
    h = recipes.random_traceless_direction(
        grid, spec["seed"], spec["amplitude"], spec["max_frequency"], spec["modes"]
    )
    return SymTensorField(grid, spec["scale"] * h.values)


def cmd_spectrum(cfg, out: Path, chash: str, method_override=None) -> int:
    grid = build_grid(cfg["grid"])
    g = recipes.metric_from_recipe(grid, cfg["metric"])
    c = resolve_coupling(cfg["operator"]["coupling"], grid.dim)
    pair = ops.assemble(g, c)
    method = method_override or cfg["operator"]["method"]
    dec = ops.eig_lowest(
        pair,
        cfg["operator"]["window"],
        method=method,
        seed=cfg["seed"],
        kernel_tol=cfg["kernel"]["tau"],
        kappa=cfg["kernel"]["kappa"],
    )
    kdec = dec.restrict(np.abs(dec.eigenvalues) < dec.kernel_tol)
    prefix = cfg["output"]["prefix"]
    reporting.write_csv(
        out / f"{prefix}_spectrum.csv",
        ("index", "eigenvalue", "residual"),
        [(i, dec.eigenvalues[i], dec.residuals[i]) for i in range(dec.k)],
        chash,
    )
    neg, zero, pos = dec.counts
    pairs = [
        ("dimension", grid.dim),
        ("coupling", c),
        ("window", dec.k),
        ("method", dec.method),
        ("kernel_tolerance", dec.kernel_tol),
        ("kernel_multiplicity", kdec.k),
        ("count_negative", neg),
        ("count_zero", zero),
        ("count_positive", pos),
        ("assembly_asymmetry", pair.asymmetry),
        ("orthonormality_residual", dec.orthonormality_residual()),
    ]
    if cfg["count_below"] is not None:
        pairs.append(
            ("count_below", ops.count_below(g, c, float(cfg["count_below"]), pair=pair, seed=cfg["seed"]))
        )
    reporting.write_keyvalue_csv(out / f"{prefix}_report.csv", pairs, chash)
    for i in range(min(cfg["output"]["eigenvector_fields"], dec.k)):
        write_field(out / f"{prefix}_eigenvector_{i}.csf", dec.eigenfunction(i))
    reporting.spectrum_figure(out / f"{prefix}_spectrum.png", dec.eigenvalues, dec.kernel_tol)
    return EXIT_OK


def cmd_perturb(cfg, out: Path, chash: str, method_override=None) -> int:
    grid = build_grid(cfg["grid"])
    g0 = recipes.metric_from_recipe(grid, cfg["metric"])
    h = _direction(grid, cfg["direction"], g0)
    c = resolve_coupling(cfg["coupling"], grid.dim)
    window = cfg["window"]
    curve = pert.MetricCurve(g0, h)
    tg = cfg["t_grid"]
    ts = np.linspace(tg["start"], tg["stop"], tg["count"])
    trace = pert.track_branch(
        curve, c, ts, window, seed=cfg["seed"], method=method_override or "auto"
    )
    prefix = cfg["output"]["prefix"]
    rows = []
    for i, t in enumerate(trace.ts):
        for b in range(window):
            overlap = 1.0 if i == 0 else trace.overlaps[i - 1][b]
            rows.append((t, b, trace.eigenvalues[i, b], overlap))
    reporting.write_csv(out / f"{prefix}_branches.csv", ("t", "branch_id", "eigenvalue", "overlap"), rows, chash)

    pair = ops.assemble(g0, c)
    kdec = ops.kernel(g0, c, cfg["kernel_tau"], seed=cfg["seed"], pair=pair)
    pairs = [("kernel_multiplicity", kdec.k), ("kernel_tolerance", kdec.kernel_tol)]
    if kdec.k > 0:
        q = pert.q_operator(g0, h, c, kernel_basis=kdec)
        qrows = [(a, b, q.entries[a, b]) for a in range(q.m) for b in range(q.m)]
        reporting.write_csv(out / f"{prefix}_q_matrix.csv", ("row", "col", "value"), qrows, chash)
        pairs.append(("q_asymmetry", q.asymmetry))
        for i, v in enumerate(q.eigenvalues()):
            pairs.append((f"eigenvalue_derivative_{i}", v))
        h0 = geo.traceless(g0, h)
        rep = pert.derivative_identity_check(g0, kdec.eigenfunction(0), h0, c)
        pairs += [
            ("identity_direct", rep.direct),
            ("identity_paired", rep.paired),
            ("identity_paired_traceless", rep.paired_traceless),
            ("identity_max_relative_residual", rep.max_relative_residual),
        ]
    reporting.write_keyvalue_csv(out / f"{prefix}_identity.csv", pairs, chash)
    reporting.branch_figure(out / f"{prefix}_branches.png", trace.ts, trace.eigenvalues)
    return EXIT_OK


def cmd_break_kernel(cfg, out: Path, chash: str, method_override=None) -> int:
    grid = build_grid(cfg["grid"])
    g0 = recipes.metric_from_recipe(grid, cfg["metric"])
    c = resolve_coupling(cfg["coupling"], grid.dim)
    prefix = cfg["output"]["prefix"]
    search = cfg["search"]
    tau = cfg["break"]["tau"]
    if search["enabled"]:
        h = _direction(grid, search["direction"], g0)
        curve = pert.MetricCurve(g0, h)
        ts = np.linspace(search["t_start"], search["t_stop"], search["t_count"])
        found = pert.find_kernel_metric(
            curve, c, search["branch_index"], ts, window=search["window"], seed=cfg["seed"]
        )
        g_start = found.metric
        if tau is None:
            tau = found.tolerance
    else:
        g_start = g0
        if tau is None:
            probe = ops.eig_lowest(ops.assemble(g_start, c), 8, seed=cfg["seed"])
            tau = probe.kernel_tol
    result = pert.break_kernel(
        g_start, c, tau, cfg["break"]["eps"], seed=cfg["seed"], max_levels=cfg["break"]["max_levels"]
    )
    rows = []
    for i, m in enumerate(result.multiplicity_trace):
        step = result.steps[i] if i < len(result.steps) else None
        rows.append(
            (
                i,
                m,
                step["step"] if step else 0.0,
                step["tensor_norm"] if step else 0.0,
            )
        )
    reporting.write_csv(
        out / f"{prefix}_multiplicity_trace.csv",
        ("round", "multiplicity", "step_t", "tensor_norm"),
        rows,
        chash,
    )
    write_field(out / f"{prefix}_final_metric.csf", result.metric)
    reporting.write_keyvalue_csv(
        out / f"{prefix}_report.csv",
        [
            ("coupling", c),
            ("tau", tau),
            ("eps", cfg["break"]["eps"]),
            ("initial_multiplicity", result.multiplicity_trace[0]),
            ("final_multiplicity", result.multiplicity_trace[-1]),
            ("rounds", len(result.steps)),
        ],
        chash,
    )
    reporting.multiplicity_figure(out / f"{prefix}_multiplicity.png", result.multiplicity_trace)
    return EXIT_OK


def cmd_product(cfg, out: Path, chash: str, threads: int = 1, method_override=None) -> int:
    base = prod.sphere_spectrum(cfg["base"]["dim"], cfg["base"]["l_max"])
    fb = cfg["fiber"]
    fiber = prod.buser_surrogate_spectrum(fb["k"], fb["eps"], fb["genus"], cfg["seed"], fb["lam_max"])
    sw = cfg["sweep"]
    ts = np.linspace(sw["t_start"], sw["t_stop"], sw["t_count"])
    report = prod.admissible_t(base, fiber, fb["k"], fb["eps"], ts)

    def full_count(t):
        try:
            spec = prod.ProductSpec(base=base, fiber=fiber, t=float(t), eps=fb["eps"], k=fb["k"])
            return prod.negative_count(spec), True
        except TruncationInadequate:
            return -1, False

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        counts = list(pool.map(full_count, ts))

    prefix = cfg["output"]["prefix"]
    rows = [
        (
            r.t,
            r.negative_designated,
            counts[i][0],
            r.admissible,
            r.printed_bound_admits,
            r.corrected_bound_admits,
            r.printed_bound_disagrees,
            counts[i][1],
        )
        for i, r in enumerate(report.rows)
    ]
    reporting.write_csv(
        out / f"{prefix}_sweep.csv",
        (
            "t",
            "negative_designated",
            "negative_total",
            "admissible",
            "printed_bound_admits",
            "corrected_bound_admits",
            "printed_bound_disagrees",
            "truncation_ok",
        ),
        rows,
        chash,
    )

    pairs = [
        ("base_dim", base.dim),
        ("base_scalar_curvature", base.scalar_curvature),
        ("fiber_modes", fb["k"]),
        ("eps", fb["eps"]),
        ("lower_bound_t", report.lower_bound),
        ("printed_upper_bound", report.printed_upper_bound),
        ("corrected_sufficient_bound", report.corrected_bound),
        ("printed_bound_disagreement", report.printed_bound_disagreement),
        ("admissible_count", len(report.admissible_t)),
    ]

    rescale_t = cfg["rescale_t"] if cfg["rescale_t"] is not None else (
        report.admissible_t[0] if report.admissible_t else None
    )
    if rescale_t is not None:
        spec = prod.ProductSpec(base=base, fiber=fiber, t=float(rescale_t), eps=fb["eps"], k=fb["k"])
        spectrum = prod.product_conformal_spectrum(spec)
        r_before = prod.product_scalar_curvature(spec)
        scaled, r_after = prod.yamabe_rescale(spectrum, r_before)
        reporting.write_csv(
            out / f"{prefix}_rescaled_spectrum.csv",
            ("index", "eigenvalue_before", "eigenvalue_rescaled"),
            [(i, spectrum[i], scaled[i]) for i in range(len(spectrum))],
            chash,
        )
        pairs += [
            ("rescale_t", float(rescale_t)),
            ("scalar_curvature_before", r_before),
            ("scalar_curvature_after", r_after),
            ("negative_before", int(np.sum(spectrum < 0))),
            ("negative_after", int(np.sum(scaled < 0))),
        ]

    fam = cfg["family"]
    if fam["enabled"]:
        records = prod.pinching_family(
            [int(v) for v in fam["k_values"]], fb["eps"], fb["genus"], cfg["seed"], fam["t"], base
        )
        pre = prod.check_precompactness(records)
        reporting.write_csv(
            out / f"{prefix}_family.csv",
            ("k", "negative_count", "volume", "injectivity_radius", "ricci_lower", "diameter"),
            [
                (r.k, r.negative_count, r.volume, r.injectivity_radius, r.ricci_lower, r.diameter)
                for r in records
            ],
            chash,
        )
        pairs += [
            ("family_condition_vol_inj_ricci", bool(pre.condition_volume_inj_ricci)),
            ("family_condition_diam_ricci", bool(pre.condition_diam_ricci)),
            ("family_noncompactness_consistent", pre.noncompactness_consistent),
        ]
        for i, reason in enumerate(pre.reasons):
            pairs.append((f"family_reason_{i}", reason.replace(",", ";")))

    reporting.write_keyvalue_csv(out / f"{prefix}_report.csv", pairs, chash)
    reporting.sweep_figure(
        out / f"{prefix}_sweep.png",
        [r.t for r in report.rows],
        [r.negative_designated for r in report.rows],
        [r.admissible for r in report.rows],
        report.lower_bound,
        report.printed_upper_bound,
    )
    return EXIT_OK


def cmd_curvature_check(cfg, out: Path, chash: str, method_override=None) -> int:
    grid = build_grid(cfg["grid"])
    g = recipes.metric_from_recipe(grid, cfg["metric"])
    cc = cfg["conformal"]
    u = recipes.trig_scalar(
        grid, cc["seed"], cc["amplitude"], cc["max_frequency"], cc["modes"], offset=cc["offset"]
    )
    report = ops.conformal_covariance_check(g, u, k=cfg["window"], seed=cfg["seed"])
    prefix = cfg["output"]["prefix"]
    reporting.write_csv(
        out / f"{prefix}_eigenvalues.csv",
        ("index", "eigenvalue_before", "eigenvalue_after"),
        [
            (i, report.eigenvalues_before[i], report.eigenvalues_after[i])
            for i in range(len(report.eigenvalues_before))
        ],
        chash,
    )
    pairs = [
        ("counts_before", "{} {} {}".format(*report.counts_before)),
        ("counts_after", "{} {} {}".format(*report.counts_after)),
        ("counts_agree", report.counts_agree),
        ("tau_before", report.tau_before),
        ("tau_after", report.tau_after),
    ]
    for i, r in enumerate(report.kernel_residuals):
        pairs.append((f"kernel_mode_{i}_residual", r))
    reporting.write_keyvalue_csv(out / f"{prefix}_report.csv", pairs, chash)
    reporting.curvature_check_figure(
        out / f"{prefix}_compare.png", report.eigenvalues_before, report.eigenvalues_after
    )
    return EXIT_OK


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "perturb": cmd_perturb,
    "break-kernel": cmd_break_kernel,
    "product": cmd_product,
    "curvature-check": cmd_curvature_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confspec",
        description="Spectra of conformal Laplacians on discretized tori: "
        "eigensolves, perturbation experiments, kernel breaking, product sweeps.",
    )
    parser.add_argument("--version", action="version", version=f"confspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", default=None, help="output directory (default $CONFSPEC_OUT or ./confspec_out)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--dense", action="store_true", help="force the dense eigensolver")
        p.add_argument("--threads", type=int, default=None, help="sweep thread cap (default $CONFSPEC_THREADS or 1)")
        p.add_argument("--tol", type=float, default=None, help="override the kernel tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out or os.environ.get("CONFSPEC_OUT", "confspec_out"))
    out.mkdir(parents=True, exist_ok=True)
    threads = args.threads if args.threads is not None else int(os.environ.get("CONFSPEC_THREADS", "1"))
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.tol is not None:
            if args.command == "spectrum":
                cfg["kernel"]["tau"] = args.tol
            elif args.command == "perturb":
                cfg["kernel_tau"] = args.tol
            elif args.command == "break-kernel":
                cfg["break"]["tau"] = args.tol
        chash = config_hash(args.config)
        kwargs = {"threads": threads} if args.command == "product" else {}
        code = _COMMANDS[args.command](
            cfg, out, chash, method_override="dense" if args.dense else None, **kwargs
        )
        (out / "error.json").unlink(missing_ok=True)
        return code
    except Exception as err:  # noqa: BLE001 - every failure maps to a documented exit code
        code = _exit_code_for(err)
        record = {
            "error_class": type(err).__name__,
            "message": str(err),
            "exit_code": code,
            "command": args.command,
        }
        try:
            with open(out / "error.json", "w") as fh:
                json.dump(record, fh, indent=2)
        except OSError:
            pass
        print(f"confspec {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
        if code == EXIT_INTERNAL:
            traceback.print_exc()
        return code


if __name__ == "__main__":
    sys.exit(main())
