# tests/test_config.py

from pathlib import Path

import pytest

from exciton_pimc.config import dump_config, load_config, locate_key, parse_config
from exciton_pimc.errors import ConfigError
from exciton_pimc.models.config_models import RunConfig

FULL = """\
[model]
name = "dimer"

[model.parameters]
J = 0.0
m1 = 1000.0

[run]
temperature_K = 77.0
n_beads = 16
kernel = "rwm"
n_steps = 2000000
n_chains = 4
seed = 12345
dt = 0.125

[stats]
batch_size = 50000

[histogram]
bins = [40, 40]
lo = [-3.0, -3.0]
hi = [4.0, 4.0]

[oracle]
lo = [-4.0, -4.0]
hi = [6.0, 6.0]
n_points = [48, 48]

[output]
directory = "out/dimer77"
"""


def test_minimal_config_fills_defaults():
    config = parse_config('[model]\nname = "alexander"\n')
    assert config.model.name == "alexander"
    assert config.run.kernel == "mala"
    assert config.run.n_beads == 16
    assert config.run.sampler().target() == 0.574
    assert config.stats.ljung_box_lags == 13
    assert config.output.directory == "results"
    assert not config.is_sweep


def test_full_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(FULL)
    config = load_config(path)
    assert config.model.parameters == {"J": 0.0, "m1": 1000.0}
    assert config.run.temperature_K == 77.0 and config.run.n_chains == 4
    assert config.run.sampler().target() == 0.234
    assert config.histogram.bins == [40, 40]
    assert config.oracle.n_points == [48, 48]


def test_negative_temperature_names_the_key():
    text = "[run]\nn_beads = 8\ntemperature_K = -5\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "run.temperature_K"
    assert info.value.line == 3
    assert "temperature_K" in str(info.value)


def test_unknown_key_is_rejected_with_its_line():
    with pytest.raises(ConfigError) as info:
        parse_config('[model]\nname = "dimer"\n\n[run]\nseed = 1\ncolour = "blue"\n')
    assert info.value.line == 6
    assert info.value.key == "run.colour"


def test_unknown_section_reports_the_header_line():
    with pytest.raises(ConfigError) as info:
        parse_config('[model]\nname = "dimer"\n[plots]\nwidth = 3\n')
    assert info.value.line == 3


def test_bad_parameter_override_is_located():
    text = '[model]\nname = "dimer"\n[model.parameters]\nm1 = -1.0\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "model.parameters.m1"
    assert info.value.line == 4


def test_syntax_error_has_a_line_number():
    with pytest.raises(ConfigError) as info:
        parse_config('[run]\nseed = 1\nkernel = "mala\n')
    assert info.value.line == 3


def test_external_model_needs_a_path():
    with pytest.raises(ConfigError):
        parse_config('[model]\nname = "external-spec"\n')


def test_half_specified_grids_are_rejected():
    with pytest.raises(ConfigError):
        parse_config("[histogram]\nlo = [0.0]\n")
    with pytest.raises(ConfigError):
        parse_config("[oracle]\nlo = [0.0]\nhi = [1.0]\nn_points = [8]\n")


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


def test_round_trip_is_lossless():
    config = parse_config(FULL)
    assert parse_config(dump_config(config)) == config
    tricky = RunConfig.model_validate({"run": {"temperature_K": 0.1 + 0.2, "dt": 1e-300}})
    assert parse_config(dump_config(tricky)) == tricky


def test_summary_echo_restores_the_config():
    config = parse_config(FULL)
    echo = config.model_dump(mode="json", exclude_none=True)
    assert RunConfig.model_validate(echo) == config


def test_locate_key():
    text = '[model]\nname = "dimer"\n[run]\nseed = 1\n'
    assert locate_key(text, ("run", "seed")) == 4
    assert locate_key(text, ("model", "name")) == 2
    assert locate_key(text, ("run", "missing")) is None


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.toml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    load_config(path)


def test_dimer_sweep_covers_the_temperature_layout():
    config = load_config(CONFIG_DIR / "dimer_sweep.toml")
    assert config.sweep.temperatures_K == [30.0, 50.0, 77.0, 140.0, 225.0, 300.0]
    assert config.sweep.bead_counts == [4, 8, 16]


def test_kernel_comparison_configs_differ_only_in_kernel():
    mala = load_config(CONFIG_DIR / "dimer_77K_M64_mala.toml")
    rwm = load_config(CONFIG_DIR / "dimer_77K_M64_rwm.toml")
    assert (mala.run.kernel, rwm.run.kernel) == ("mala", "rwm")
    for config in (mala, rwm):
        assert config.run.temperature_K == 77.0 and config.run.n_beads == 64
    assert mala.run.model_dump(exclude={"kernel"}) == rwm.run.model_dump(exclude={"kernel"})
