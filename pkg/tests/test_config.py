"""Configuration schema: defaults, overrides, validation paths."""

import numpy as np
import pytest

from spincavity.config import describe_keys, load_config, resolve_outdir
from spincavity.errors import ConfigError

TWO_PI = 2.0 * np.pi


def test_defaults_describe_the_working_point():
    cfg = load_config()
    assert cfg.params.kappa == pytest.approx(TWO_PI * 0.44e6)
    assert cfg.params.gamma_par == pytest.approx(TWO_PI * 6.25e-4)
    assert cfg.params.eta == 0.0
    assert cfg.ensemble.cluster_count == 201
    assert cfg.ensemble.q == pytest.approx(1.39)
    assert cfg.integrator.rel_tol == pytest.approx(1e-8)
    assert cfg.experiment.reference == "fold_upper"
    assert cfg.experiment.quench.critical == "fold_lower"
    assert cfg.experiment.steady.power_count == 41
    assert cfg.output.format == "csv"


def test_yaml_document_and_dotted_overrides(tmp_path):
    doc = tmp_path / "run.yaml"
    doc.write_text(
        "physical:\n"
        "  kappa_hz: 1.0e+6\n"
        "experiment:\n"
        "  steady:\n"
        "    power_count: 7\n"
    )
    cfg = load_config(doc, overrides=["experiment.steady.power_count=5",
                                      "ensemble.cluster_count=21"])
    assert cfg.params.kappa == pytest.approx(TWO_PI * 1.0e6)
    # the command line wins over the document
    assert cfg.experiment.steady.power_count == 5
    assert cfg.ensemble.cluster_count == 21


def test_unknown_keys_are_reported_with_their_path(tmp_path):
    doc = tmp_path / "bad.yaml"
    doc.write_text("physical:\n  zeta: 1.0\n")
    with pytest.raises(ConfigError, match="physical.zeta"):
        load_config(doc)
    with pytest.raises(ConfigError, match="unknown"):
        load_config(None, overrides=["nonsense.value=3"])


def test_empty_power_grid_is_rejected():
    with pytest.raises(ConfigError):
        load_config(None, overrides=["experiment.steady.power_count=0"])


def test_reference_accepts_only_the_upper_fold_or_a_flux():
    ok = load_config(None, overrides=["experiment.reference=0.5"])
    assert ok.experiment.reference == 0.5
    with pytest.raises(ConfigError):
        load_config(None, overrides=["experiment.reference=fold_lower"])
    with pytest.raises(ConfigError):
        load_config(None, overrides=["experiment.reference=-1.0"])


def test_quench_critical_accepts_either_fold_or_a_flux():
    cfg = load_config(None, overrides=["experiment.quench.critical=fold_upper"])
    assert cfg.experiment.quench.critical == "fold_upper"
    cfg = load_config(None, overrides=["experiment.quench.critical=0.25"])
    assert cfg.experiment.quench.critical == 0.25


def test_ladder_epsilon_ordering_is_enforced():
    with pytest.raises(ConfigError):
        load_config(None, overrides=["experiment.quench.ladder_epsilon_min=0.2",
                                     "experiment.quench.ladder_epsilon_max=0.1"])


def test_non_numeric_values_fail_with_the_key_path():
    with pytest.raises(ConfigError, match="physical.kappa_hz"):
        load_config(None, overrides=["physical.kappa_hz=abc"])


def test_fold_window_must_be_ordered():
    with pytest.raises(ConfigError):
        load_config(None, overrides=["experiment.fold_window_flux=[5.0, 1.0]"])


def test_outdir_precedence(monkeypatch):
    cfg = load_config(None, overrides=["output.directory=from_config"])
    monkeypatch.delenv("SPINCAVITY_OUTDIR", raising=False)
    assert resolve_outdir(cfg) == "from_config"
    monkeypatch.setenv("SPINCAVITY_OUTDIR", "from_env")
    assert resolve_outdir(cfg) == "from_env"
    assert resolve_outdir(cfg, flag="from_flag") == "from_flag"


def test_key_descriptions_cover_units_and_defaults():
    lines = describe_keys(("physical", "experiment.quench"))
    text = "\n".join(lines)
    assert "physical.kappa_hz [Hz]" in text
    assert "experiment.quench.ladder_count" in text
    assert "default" in text
