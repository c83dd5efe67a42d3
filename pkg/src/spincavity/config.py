"""Run configuration: YAML document -> validated domain objects.

The document has five sections: physical, ensemble, integrator,
experiment, output.  Keys ending in _hz are plain frequencies in the
file and are converted to angular rates on load.  Unknown keys are
rejected with the full dotted path, and every validation error names the
field it came from.  All defaults together form the high-cooperativity
working point, so an empty document is a complete, runnable
configuration.
"""

import math
import os

import yaml

from .dynamics import IntegratorConfig
from .ensemble import EnsembleSpec
from .errors import ConfigError, ParameterError
from .model import PhysicalParams

TWO_PI = 2.0 * math.pi

# single source of truth: (default, unit, help) per key, consumed by the
# parser, by --set validation, and by the CLI help epilog
SCHEMA = {
    "physical": {
        "kappa_hz": (0.44e6, "Hz", "cavity half linewidth"),
        "gamma_perp_hz": (0.40e6, "Hz", "transverse spin decay rate"),
        "gamma_par_hz": (6.25e-4, "Hz", "longitudinal spin decay rate"),
        "omega_coll_hz": (12.6e6, "Hz", "collective coupling strength"),
        "delta_c_hz": (0.0, "Hz", "cavity detuning from the drive"),
    },
    "ensemble": {
        "q": (1.39, "-", "q-Gaussian tail-weight parameter, 1 < q < 3"),
        "width_hz": (5.3e6, "Hz", "q-Gaussian width parameter"),
        "center_offset_hz": (0.0, "Hz", "ensemble center relative to the drive"),
        "cluster_count": (201, "-", "number of spin clusters, odd"),
        "truncation_hz": (21.2e6, "Hz", "half window of the detuning grid"),
    },
    "integrator": {
        "rel_tol": (1e-8, "-", "relative step error tolerance"),
        "abs_tol": (1e-14, "-", "absolute step error tolerance"),
        "max_step": (None, "s", "largest allowed step, null = unbounded"),
        "initial_step": (None, "s", "first step size, null = automatic"),
        "handoff_time": (None, "s", "switch to the slaved integrator, null = 1000/kappa"),
        "steady_threshold": (1e-6, "-", "steadiness bound on |d ln I/dt| in units of gamma_par"),
        "max_sim_time": (None, "s", "integration horizon, null = 1000/gamma_par"),
        "samples_per_decade": (48, "-", "stored samples per time decade"),
    },
    "experiment": {
        "reference": ("fold_upper", "1/s", "dB reference flux, or fold_upper for a fold pre-pass"),
        "fold_window_flux": ([1e-12, 1e6], "1/s", "flux window scanned by the fold pre-pass"),
    },
    "experiment.steady": {
        "power_min_db": (-10.0, "dB", "sweep start relative to the reference"),
        "power_max_db": (6.0, "dB", "sweep end relative to the reference"),
        "power_count": (41, "-", "log-spaced powers in the sweep"),
    },
    "experiment.quench": {
        "p_prepare_db": (4.8, "dB", "preparation drive relative to the reference"),
        "critical": ("fold_lower", "1/s", "divergence anchor: fold_lower, fold_upper, or a flux"),
        "targets_db": (None, "dB", "explicit target list relative to the reference, null = ladder"),
        "ladder_count": (12, "-", "targets in the generated ladder"),
        "ladder_epsilon_min": (4e-5, "-", "smallest fractional distance below the critical flux"),
        "ladder_epsilon_max": (0.1, "-", "largest fractional distance below the critical flux"),
        "fit_epsilon_max": (2e-3, "-", "drop targets farther below critical from the fit, null = keep all"),
        "workers": (1, "-", "parallel quench processes"),
    },
    "experiment.adiabatic": {
        "power_db": (-1.0, "dB", "drive at which the potential is evaluated"),
        "cooperativity": (None, "-", "collective cooperativity, null = ensemble sum"),
        "x_scale": (1.5, "-", "potential grid extent over the largest fixed point"),
        "x_count": (400, "-", "potential grid size"),
    },
    "experiment.fit": {
        "summary_csv": (None, "path", "quench summary table to refit"),
        "critical": ("fold_lower", "1/s", "critical flux: fold_lower, fold_upper, or a number"),
        "fit_epsilon_max": (None, "-", "drop targets farther below critical, null = keep all"),
    },
    "output": {
        "directory": ("runs", "path", "where result files are written"),
        "format": ("csv", "-", "table format, csv or json"),
    },
}


def _expect_mapping(raw, path):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(raw).__name__}")
    return dict(raw)


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _string(value, path):
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _section(raw, name):
    block = _expect_mapping(raw.pop(name, None), name)
    known = SCHEMA[name]
    values = {}
    for key, (default, _unit, _help) in known.items():
        values[key] = block.pop(key, default)
    if block:
        extra = ", ".join(f"{name}.{k}" for k in sorted(block))
        raise ConfigError(f"unknown keys: {extra}")
    return values


class RunConfig:
    """Validated run description.

    Domain objects (params, ensemble spec, integrator config) are built
    eagerly so field errors surface at load time with their path; the
    experiment and output sections stay as plain attribute records.
    """

    def __init__(self, params, ensemble, integrator, experiment, output):
        self.params = params
        self.ensemble = ensemble
        self.integrator = integrator
        self.experiment = experiment
        self.output = output


class _Record:
    def __init__(self, **kw):
        self.__dict__.update(kw)


def _build_physical(values):
    kw = {}
    for key, value in values.items():
        kw[key[:-3]] = _number(value, f"physical.{key}") * TWO_PI
    try:
        return PhysicalParams(eta=0.0, **kw)
    except ParameterError as exc:
        raise ConfigError(f"physical: {exc}") from None


def _build_ensemble(values):
    q = _number(values["q"], "ensemble.q")
    width = _number(values["width_hz"], "ensemble.width_hz") * TWO_PI
    offset = _number(values["center_offset_hz"], "ensemble.center_offset_hz") * TWO_PI
    count = _integer(values["cluster_count"], "ensemble.cluster_count")
    trunc = _number(values["truncation_hz"], "ensemble.truncation_hz") * TWO_PI
    try:
        return EnsembleSpec(q=q, delta_width=width, center_offset=offset,
                            cluster_count=count, truncation=trunc)
    except ParameterError as exc:
        raise ConfigError(f"ensemble: {exc}") from None


def _build_integrator(values):
    kw = {}
    for key, value in values.items():
        path = f"integrator.{key}"
        if key == "samples_per_decade":
            kw[key] = _integer(value, path)
        elif value is None and key in ("max_step", "initial_step",
                                       "handoff_time", "max_sim_time"):
            kw[key] = None
        else:
            kw[key] = _number(value, path)
    try:
        return IntegratorConfig(**kw)
    except ParameterError as exc:
        raise ConfigError(f"integrator: {exc}") from None


def _flux_or_fold(value, path, names=("fold_lower", "fold_upper")):
    if isinstance(value, str):
        if value not in names:
            allowed = ", ".join(names)
            raise ConfigError(f"{path}: expected {allowed} or a flux, got {value!r}")
        return value
    flux = _number(value, path)
    if flux <= 0.0:
        raise ConfigError(f"{path}: flux must be positive, got {flux!r}")
    return flux


def _build_steady(values):
    lo = _number(values["power_min_db"], "experiment.steady.power_min_db")
    hi = _number(values["power_max_db"], "experiment.steady.power_max_db")
    n = _integer(values["power_count"], "experiment.steady.power_count")
    if n < 1:
        raise ConfigError("experiment.steady.power_count: need at least one power")
    if not lo < hi and n > 1:
        raise ConfigError("experiment.steady: power_min_db must lie below power_max_db")
    return _Record(power_min_db=lo, power_max_db=hi, power_count=n)


def _build_quench(values):
    prep = _number(values["p_prepare_db"], "experiment.quench.p_prepare_db")
    critical = _flux_or_fold(values["critical"], "experiment.quench.critical")
    targets = values["targets_db"]
    if targets is not None:
        if not isinstance(targets, list) or not targets:
            raise ConfigError("experiment.quench.targets_db: expected a nonempty list")
        targets = [_number(v, f"experiment.quench.targets_db[{i}]")
                   for i, v in enumerate(targets)]
    count = _integer(values["ladder_count"], "experiment.quench.ladder_count")
    eps_min = _number(values["ladder_epsilon_min"], "experiment.quench.ladder_epsilon_min")
    eps_max = _number(values["ladder_epsilon_max"], "experiment.quench.ladder_epsilon_max")
    if count < 1:
        raise ConfigError("experiment.quench.ladder_count: need at least one target")
    if not 0.0 < eps_min <= eps_max < 1.0:
        raise ConfigError(
            "experiment.quench: need 0 < ladder_epsilon_min <= ladder_epsilon_max < 1")
    fit_eps = values["fit_epsilon_max"]
    if fit_eps is not None:
        fit_eps = _number(fit_eps, "experiment.quench.fit_epsilon_max")
    workers = _integer(values["workers"], "experiment.quench.workers")
    if workers < 1:
        raise ConfigError("experiment.quench.workers: need at least one worker")
    return _Record(p_prepare_db=prep, critical=critical, targets_db=targets,
                   ladder_count=count, ladder_epsilon_min=eps_min,
                   ladder_epsilon_max=eps_max, fit_epsilon_max=fit_eps,
                   workers=workers)


def _build_adiabatic(values):
    power_db = _number(values["power_db"], "experiment.adiabatic.power_db")
    coop = values["cooperativity"]
    if coop is not None:
        coop = _number(coop, "experiment.adiabatic.cooperativity")
        if coop < 0.0:
            raise ConfigError("experiment.adiabatic.cooperativity: must be nonnegative")
    x_scale = _number(values["x_scale"], "experiment.adiabatic.x_scale")
    x_count = _integer(values["x_count"], "experiment.adiabatic.x_count")
    if x_scale <= 0.0:
        raise ConfigError("experiment.adiabatic.x_scale: must be positive")
    if x_count < 2:
        raise ConfigError("experiment.adiabatic.x_count: need at least two grid points")
    return _Record(power_db=power_db, cooperativity=coop,
                   x_scale=x_scale, x_count=x_count)


def _build_fit(values):
    summary = values["summary_csv"]
    if summary is not None:
        summary = _string(summary, "experiment.fit.summary_csv")
    critical = _flux_or_fold(values["critical"], "experiment.fit.critical")
    fit_eps = values["fit_epsilon_max"]
    if fit_eps is not None:
        fit_eps = _number(fit_eps, "experiment.fit.fit_epsilon_max")
    return _Record(summary_csv=summary, critical=critical, fit_epsilon_max=fit_eps)


def _build_output(values):
    directory = _string(values["directory"], "output.directory")
    fmt = _string(values["format"], "output.format")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format: expected csv or json, got {fmt!r}")
    return _Record(directory=directory, format=fmt)


def parse_config(raw):
    """Validate a raw mapping (already YAML-parsed) into a RunConfig."""
    raw = _expect_mapping(raw, "config")
    physical = _section(raw, "physical")

    exp_block = _expect_mapping(raw.pop("experiment", None), "experiment")
    sub = {}
    for name in ("steady", "quench", "adiabatic", "fit"):
        wrapped = {f"experiment.{name}": exp_block.pop(name, None)}
        sub[name] = _section(wrapped, f"experiment.{name}")
    top = _section({"experiment": exp_block}, "experiment")

    ensemble = _section(raw, "ensemble")
    integrator = _section(raw, "integrator")
    output = _section(raw, "output")
    if raw:
        extra = ", ".join(sorted(raw))
        raise ConfigError(f"unknown keys: {extra}")

    reference = _flux_or_fold(top["reference"], "experiment.reference",
                              names=("fold_upper",))
    window = top["fold_window_flux"]
    if (not isinstance(window, list) or len(window) != 2):
        raise ConfigError("experiment.fold_window_flux: expected [low, high]")
    w_lo = _number(window[0], "experiment.fold_window_flux[0]")
    w_hi = _number(window[1], "experiment.fold_window_flux[1]")
    if not 0.0 < w_lo < w_hi:
        raise ConfigError("experiment.fold_window_flux: need 0 < low < high")

    experiment = _Record(
        reference=reference,
        fold_window_flux=(w_lo, w_hi),
        steady=_build_steady(sub["steady"]),
        quench=_build_quench(sub["quench"]),
        adiabatic=_build_adiabatic(sub["adiabatic"]),
        fit=_build_fit(sub["fit"]),
    )
    return RunConfig(
        params=_build_physical(physical),
        ensemble=_build_ensemble(ensemble),
        integrator=_build_integrator(integrator),
        experiment=experiment,
        output=_build_output(output),
    )


def _set_path(tree, dotted, value):
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = node[part] = {}
        elif not isinstance(nxt, dict):
            raise ConfigError(f"{dotted}: {part} is not a section")
        node = nxt
    node[parts[-1]] = value


def load_config(path=None, overrides=()):
    """Load a YAML file (or pure defaults) and apply KEY=VALUE overrides.

    Override values are parsed as YAML scalars, so numbers, booleans,
    nulls, and lists all work: --set physical.kappa_hz=1.2e6.
    """
    if path is None:
        tree = {}
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        try:
            tree = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        tree = _expect_mapping(tree, "config")
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r}: expected KEY=VALUE")
        try:
            parsed = yaml.safe_load(value) if value else None
        except yaml.YAMLError:
            parsed = value
        _set_path(tree, key, parsed)
    return parse_config(tree)


def resolve_outdir(config, flag=None):
    """Output directory precedence: --outdir flag, then SPINCAVITY_OUTDIR,
    then the config document."""
    if flag:
        return flag
    env = os.environ.get("SPINCAVITY_OUTDIR")
    if env:
        return env
    return config.output.directory


def describe_keys(sections):
    """Help lines 'path (unit)  description = default' for the given sections."""
    lines = []
    for name in sections:
        for key, (default, unit, text) in SCHEMA[name].items():
            shown = "null" if default is None else default
            lines.append(f"  {name}.{key} [{unit}]  {text} (default {shown})")
    return lines
