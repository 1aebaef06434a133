"""Test config parsing, validation and the TOML round trip."""
import logging
import textwrap

import pytest

from ql_order.config import ExperimentConfig, config_to_toml, dump_config, load_config, parse_config
from ql_order.errors import ConfigError
from ql_order.experiments import preset_five_tones


def gen_config(extra_run="", extra_sections=""):
    """Generate a small valid config document."""
    return textwrap.dedent(
        f"""\
        [scenario]
        name = "three tones"

        [signal]
        n_samples = 64
        amplitudes = [1.0, 0.8, 0.6]
        phases = [0.0, 0.5, 1.0]

        [errors]
        delta_a = 0.1
        delta_omega = 0.01
        delta_phi = 0.05

        [run]
        nu_true = 2
        nu_max = 3
        {extra_run}
        """
    ) + textwrap.dedent(extra_sections)


def test_parse_defaults(caplog):
    """Missing entries take their documented defaults."""
    caplog.set_level(logging.INFO)
    config = parse_config(gen_config())
    assert config.scenario.name == "three tones"
    assert config.signal.frequencies is None
    assert config.signal.envelope == "constant"
    assert config.errors.mode == "shared"
    assert config.run.snr_db == -11.0
    assert config.run.n_trials == 20_000
    assert config.run.snr_convention == "linear"
    assert config.box is None
    assert "Config validation successful" in caplog.text


def test_unknown_keys_rejected(caplog):
    """Unknown keys in any section are errors."""
    with pytest.raises(ConfigError):
        parse_config(gen_config(extra_run="colour = 'red'"))
    with pytest.raises(ConfigError):
        parse_config(gen_config(extra_sections="[plot]\nwidth = 3\n"))
    assert "Config validation failed" in caplog.text


@pytest.mark.parametrize(
    "replacement",
    [
        "nu_max = 3\nseed = 1.5",
        "nu_max = 3\nn_trials = 0",
        "nu_max = 3\nsnr_convention = 'decibel'",
        "nu_max = 4",
        "nu_max = 3\nworkers = 1.5",
        "nu_max = 3\nsnr_db = nan",
    ],
)
def test_invalid_run_values(replacement):
    """Values outside their domain are rejected."""
    with pytest.raises(ConfigError):
        parse_config(gen_config().replace("nu_max = 3", replacement))


def test_true_order_above_maximum():
    """nu_true may not exceed nu_max."""
    with pytest.raises(ConfigError):
        parse_config(gen_config().replace("nu_true = 2", "nu_true = 4"))


def test_component_lists_must_agree():
    """Amplitude, frequency and phase lists have one entry per component."""
    with pytest.raises(ConfigError):
        parse_config(gen_config().replace("phases = [0.0, 0.5, 1.0]", "phases = [0.0, 0.5]"))
    with pytest.raises(ConfigError):
        parse_config(gen_config().replace("phases = [0.0, 0.5, 1.0]", "phases = [0.0, 0.5, 1.0]\nfrequencies = [1.0]"))


def per_component_config(sections):
    """Config with ``[errors]`` in per-component mode followed by ``sections``."""
    shared = "delta_a = 0.1\ndelta_omega = 0.01\ndelta_phi = 0.05"
    return gen_config(extra_sections=sections).replace(shared, "mode = 'per_component'")


def test_per_component_errors():
    """Per-component mode needs one entry per component."""
    sections = """
        [[errors.per_component]]
        delta_a = 0.1

        [[errors.per_component]]
        delta_phi = 0.2
        """
    with pytest.raises(ConfigError):
        parse_config(per_component_config(sections))
    sections += """
        [[errors.per_component]]
        delta_omega = -0.3
        """
    config = parse_config(per_component_config(sections))
    assert [entry.delta_omega for entry in config.errors.per_component] == [0.0, 0.0, -0.3]
    assert config.errors.delta_a == 0.0


def test_per_component_mode_rejects_shared_errors(caplog):
    """Shared errors next to per-component entries would be ignored, so they are rejected."""
    sections = "[[errors.per_component]]\n" * 3
    text = per_component_config(sections).replace("mode = 'per_component'", "mode = 'per_component'\ndelta_phi = 0.05")
    with pytest.raises(ConfigError):
        parse_config(text)
    assert "delta_phi must be given per component" in caplog.text


def test_box_interval_order():
    """Box intervals are ``[low, high]``."""
    with pytest.raises(ConfigError):
        parse_config(gen_config(extra_sections="[box]\ndelta_a = [0.2, -0.2]\n"))
    with pytest.raises(ConfigError):
        parse_config(gen_config(extra_sections="[box]\ndelta_a = [0.2]\n"))


def test_invalid_toml():
    """Syntax errors are configuration errors."""
    with pytest.raises(ConfigError):
        parse_config("[signal\n")


def test_round_trip(tmp_path):
    """Dumping and loading reproduces the config."""
    preset = preset_five_tones()
    path = tmp_path / "preset.toml"
    dump_config(preset, path)
    loaded = load_config(path)
    assert loaded == preset
    assert config_to_toml(loaded) == config_to_toml(preset)
    parsed = parse_config(gen_config(extra_sections="[sweep]\nvariable = 'delta_phi'\ngrid = [0.0, 0.1]\n"))
    assert parse_config(config_to_toml(parsed)) == parsed


def test_dump_creates_directories_and_reports_failures(tmp_path):
    """Missing directories are created; a file in the way is a configuration error."""
    preset = preset_five_tones()
    nested = tmp_path / "a" / "b" / "preset.toml"
    dump_config(preset, nested)
    assert load_config(nested) == preset
    blocker = tmp_path / "file.txt"
    blocker.write_text("x")
    with pytest.raises(ConfigError, match="cannot write"):
        dump_config(preset, blocker / "preset.toml")


def test_load_missing_file(tmp_path):
    """Unreadable files are configuration errors."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_model_is_strict():
    """Pydantic models reject extra fields when built in code."""
    with pytest.raises(ValueError):
        ExperimentConfig(signal={"amplitudes": [1.0], "phases": [0.0]}, extra_field=1)
