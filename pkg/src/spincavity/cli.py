"""Command-line entry point.

Each subcommand loads one configuration (file plus --set overrides),
runs its experiment, and writes result files into the output directory.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Unresolved quench runs are reported in the summary table and are not an
error; the near-critical regime is expected to produce them.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import io as tables
from .adiabatic import AdiabaticModel, adiabatic_fixed_points, adiabatic_rhs, potential
from .config import describe_keys, load_config, resolve_outdir
from .dynamics import Branch, fit_scaling, quench_ladder
from .ensemble import SpinClusters, cooperativity, discretize
from .errors import ConfigError, FitError, NumericalFailure, ParameterError
from .steady import find_folds, hysteresis_sweep
from .model import drive_from_power

_COMMON_SECTIONS = ("physical", "ensemble", "integrator", "experiment", "output")


def _epilog(command):
    sections = _COMMON_SECTIONS + (f"experiment.{command}",)
    lines = ["configuration keys:"]
    lines.extend(describe_keys(sections))
    return "\n".join(lines)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spincavity",
        description="Driven cavity + spin ensemble: bistability and quench dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("steady", "hysteresis sweep over drive power, fold report"),
        ("quench", "quench ladder, switching times, scaling fit"),
        ("adiabatic", "collective-spin fixed points and potential curve"),
        ("fit", "refit a scaling law from an existing summary table"),
    )
    for name, text in specs:
        p = sub.add_parser(
            name, help=text, epilog=_epilog(name),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", metavar="FILE",
                       help="YAML configuration; omitted = built-in defaults")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key by dotted path")
        p.add_argument("--outdir", metavar="DIR",
                       help="output directory (overrides config and SPINCAVITY_OUTDIR)")
        p.add_argument("--format", choices=("csv", "json"),
                       help="table format override")
        if name == "quench":
            p.add_argument("--workers", type=int, metavar="N",
                           help="parallel quench processes")
    return parser


def _load(args):
    overrides = list(args.set)
    if args.format:
        overrides.append(f"output.format={args.format}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"experiment.quench.workers={args.workers}")
    config = load_config(args.config, overrides)
    outdir = resolve_outdir(config, args.outdir)
    os.makedirs(outdir, exist_ok=True)
    return config, outdir


def _clusters(config):
    return discretize(config.ensemble, config.params.omega_coll)


def _folds(config, clusters):
    return find_folds(config.params, clusters, config.experiment.fold_window_flux)


def _reference_flux(config, folds):
    ref = config.experiment.reference
    if isinstance(ref, float):
        return ref
    if folds[1] is None:
        raise ConfigError(
            "experiment.reference: fold_upper requested but the configuration "
            "is monostable over the scan window; set a numeric reference flux")
    return folds[1]


def _critical_flux(spec, folds, path):
    if isinstance(spec, float):
        return spec
    index = 0 if spec == "fold_lower" else 1
    value = folds[index]
    if value is None:
        raise ConfigError(
            f"{path}: {spec} requested but the configuration is monostable "
            "over the scan window; set a numeric flux")
    return value


def _emit(path, written):
    written.append(path)
    print(f"wrote {path}")


def cmd_steady(config, outdir):
    clusters = _clusters(config)
    plan = config.experiment.steady
    folds = _folds(config, clusters)
    ref = _reference_flux(config, folds)
    grid_db = np.linspace(plan.power_min_db, plan.power_max_db, plan.power_count)
    powers = ref * 10.0 ** (grid_db / 10.0)
    diagram = hysteresis_sweep(powers, config.params, clusters)

    rows = []
    for label, branch in (("up", diagram.up_branch),
                          ("down", diagram.down_branch),
                          ("unstable", diagram.unstable_branch)):
        for bp in branch:
            rows.append((
                float(bp.p_in),
                float(10.0 * math.log10(bp.p_in / ref)),
                label,
                float(bp.intensity),
                float(10.0 * math.log10(bp.transmission)),
                bp.stability.value,
            ))

    written = []
    fmt = config.output.format
    _emit(tables.write_table(os.path.join(outdir, f"bistability.{fmt}"),
                             tables.DIAGRAM_COLUMNS, rows, fmt), written)
    c_sum = cooperativity(clusters, config.params.kappa, config.params.gamma_perp)[1]
    width = None
    if diagram.fold_lower is not None and diagram.fold_upper is not None:
        width = float(10.0 * math.log10(diagram.fold_upper / diagram.fold_lower))
    report = {
        "bistable": diagram.fold_upper is not None,
        "fold_lower_flux": None if diagram.fold_lower is None else float(diagram.fold_lower),
        "fold_upper_flux": None if diagram.fold_upper is None else float(diagram.fold_upper),
        "width_db": width,
        "reference_flux": float(ref),
        "c_coll": float(c_sum),
    }
    _emit(tables.write_report(os.path.join(outdir, "folds.json"), report), written)
    return written


def _scaling_reports(points, p_crit, outdir, written):
    try:
        fixed, free = fit_scaling(points, p_crit)
    except FitError as exc:
        print(f"scaling fit skipped: {exc}", file=sys.stderr)
        return
    for fit in (fixed, free):
        payload = {
            "alpha": float(fit.alpha),
            "p_crit": float(fit.p_crit_fit),
            "prefactor": float(fit.prefactor),
            "residual": float(fit.residual_norm),
            "mode": fit.mode,
        }
        path = os.path.join(outdir, f"scaling_{fit.mode}.json")
        _emit(tables.write_report(path, payload), written)


def cmd_quench(config, outdir):
    clusters = _clusters(config)
    plan = config.experiment.quench
    needs_folds = (not isinstance(config.experiment.reference, float)
                   or not isinstance(plan.critical, float))
    folds = _folds(config, clusters) if needs_folds else (None, None)
    ref = _reference_flux(config, folds)
    p_crit = _critical_flux(plan.critical, folds, "experiment.quench.critical")
    p_prepare = ref * 10.0 ** (plan.p_prepare_db / 10.0)

    if plan.targets_db is not None:
        targets = [ref * 10.0 ** (db / 10.0) for db in plan.targets_db]
    else:
        eps = np.geomspace(plan.ladder_epsilon_max, plan.ladder_epsilon_min,
                           plan.ladder_count)
        targets = [p_crit * (1.0 - e) for e in eps]

    results = quench_ladder(targets, p_prepare, config.params, clusters,
                            config.integrator, workers=plan.workers)

    written = []
    fmt = config.output.format
    summary = []
    for index, result in enumerate(results):
        eta = drive_from_power(result.p_target, config.params.kappa)
        rows = tables.trajectory_rows(result.trajectory, eta, config.params.kappa)
        path = os.path.join(outdir, f"quench_{index:03d}.{fmt}")
        _emit(tables.write_table(path, tables.TRAJECTORY_COLUMNS, rows, fmt), written)
        summary.append((
            float(result.p_target),
            float(10.0 * math.log10(result.p_target / ref)),
            result.t_steady,
            result.t_switch,
            result.final_state_branch.value,
        ))
    _emit(tables.write_table(os.path.join(outdir, f"quench_summary.{fmt}"),
                             tables.SUMMARY_COLUMNS, summary, fmt), written)

    points = []
    for result in results:
        if result.final_state_branch is not Branch.LOWER or result.t_switch is None:
            continue
        eps = 1.0 - result.p_target / p_crit
        if (plan.fit_epsilon_max is not None
                and eps > plan.fit_epsilon_max * (1.0 + 1e-9)):
            continue
        points.append((result.p_target, result.t_switch))
    _scaling_reports(points, p_crit, outdir, written)
    return written


def cmd_adiabatic(config, outdir):
    params = config.params
    plan = config.experiment.adiabatic
    coop = plan.cooperativity
    if coop is None:
        clusters = _clusters(config)
        coop = cooperativity(clusters, params.kappa, params.gamma_perp)[1]
    # homogeneous surrogate with the same collective cooperativity
    surrogate = SpinClusters.homogeneous(
        math.sqrt(coop * params.kappa * params.gamma_perp))
    folds = _folds(config, surrogate)
    ref = _reference_flux(config, folds)
    p_in = ref * 10.0 ** (plan.power_db / 10.0)
    model = AdiabaticModel(cooperativity=coop, kappa=params.kappa,
                           gamma_par=params.gamma_par,
                           eta=drive_from_power(p_in, params.kappa))

    points = adiabatic_fixed_points(model)
    x_top = max(x for x, _ in points)
    if x_top == 0.0:
        x_top = (model.eta / model.kappa) ** 2
    grid = np.linspace(0.0, plan.x_scale * x_top, plan.x_count)
    v = potential(model, grid)
    rhs = adiabatic_rhs(model, grid)

    written = []
    fmt = config.output.format
    rows = [(float(grid[i]), float(v[i]), float(rhs[i]))
            for i in range(grid.size)]
    _emit(tables.write_table(os.path.join(outdir, f"adiabatic_potential.{fmt}"),
                             tables.POTENTIAL_COLUMNS, rows, fmt), written)
    report = {
        "cooperativity": float(coop),
        "drive_flux": float(p_in),
        "fixed_points": [
            {"amplitude": float(math.sqrt(x)), "intensity": float(x),
             "stability": stab.value}
            for x, stab in points
        ],
    }
    _emit(tables.write_report(os.path.join(outdir, "adiabatic_fixed_points.json"),
                              report), written)
    return written


def cmd_fit(config, outdir):
    plan = config.experiment.fit
    if plan.summary_csv is None:
        raise ConfigError("experiment.fit.summary_csv: a summary table is required")
    columns, rows = tables.read_table(plan.summary_csv)
    flux = tables.column(columns, rows, "p_target_flux")
    t_switch = tables.column(columns, rows, "t_switch_s")
    branch = tables.column(columns, rows, "branch")

    if isinstance(plan.critical, float):
        p_crit = plan.critical
    else:
        clusters = _clusters(config)
        folds = _folds(config, clusters)
        p_crit = _critical_flux(plan.critical, folds, "experiment.fit.critical")

    points = []
    for p, t, b in zip(flux, t_switch, branch):
        if b != Branch.LOWER.value or t is None:
            continue
        eps = 1.0 - p / p_crit
        if (plan.fit_epsilon_max is not None
                and eps > plan.fit_epsilon_max * (1.0 + 1e-9)):
            continue
        points.append((p, t))
    written = []
    _scaling_reports(points, p_crit, outdir, written)
    if not written:
        raise ConfigError(
            "experiment.fit: no usable (p_target, t_switch) rows in the summary")
    return written


_COMMANDS = {
    "steady": cmd_steady,
    "quench": cmd_quench,
    "adiabatic": cmd_adiabatic,
    "fit": cmd_fit,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config, outdir = _load(args)
        _COMMANDS[args.command](config, outdir)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
