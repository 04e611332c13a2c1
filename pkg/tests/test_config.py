import pytest

from koiterfsi.config import RunConfig, load_config, parse_config, scenario_config
from koiterfsi.errors import ConfigurationError


def test_defaults_are_valid_and_round_trip_through_ini():
    cfg = RunConfig()
    again = parse_config(cfg.to_ini())
    assert again == cfg and again.digest() == cfg.digest()


def test_scenario_presets_fill_missing_data_keys():
    cfg = parse_config("[data]\nscenario = forced\ng_amp = 1.5\n")
    assert cfg.f_amp == 0.5 and cfg.g_amp == 1.5 and cfg.eta0_amp == 0.02


def test_types_are_converted():
    cfg = parse_config("[mesh]\nnx = 0x10\n[output]\nplot = off\n[time]\ndt = 0.005\nT = 0.1\n")
    assert cfg.nx == 16 and cfg.plot is False and cfg.n_steps == 20


@pytest.mark.parametrize("text,line", [
    ("[mesh]\nnx = 16\n[bogus]\nx = 1\n", 3),
    ("[mesh]\nnx = 16\nnz = 3\n", 3),
    ("[fluid]\n\ndensity = heavy\n", 3),
    ("[time]\ndt = 0.03\nT = 0.1\n", 2),
    ("[geometry]\nalpha = 0.9\n", 2),
    ("# comment\n[data]\nscenario = storm\n", 3),
])
def test_errors_name_the_offending_line(text, line):
    with pytest.raises(ConfigurationError, match=f"cfg.ini:{line}:"):
        parse_config(text, "cfg.ini")


def test_missing_file_is_a_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.ini")


def test_unknown_scenario_and_invalid_values():
    with pytest.raises(ConfigurationError):
        scenario_config("storm")
    with pytest.raises(ConfigurationError):
        RunConfig(theta=0.3)
    with pytest.raises(ConfigurationError):
        RunConfig(seed=-1)


def test_digest_tracks_every_setting():
    assert RunConfig().digest() != RunConfig(dt=0.005).digest()
    assert RunConfig().digest() == RunConfig(source_text="ignored").digest()
