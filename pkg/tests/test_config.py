from pathlib import Path

import pytest

from config import (
    DEFAULT_SEED,
    ConfigError,
    RunConfig,
    config_from_text,
    known_keys,
    load_config,
    parse_config_text,
)
from sc_codec import Pairing


def test_empty_config_is_all_defaults():
    cfg = config_from_text("")
    assert cfg == RunConfig()
    assert cfg.seed == DEFAULT_SEED
    assert cfg.engine.adc.bits == 8
    assert set(cfg.provenance) == set(known_keys())
    assert set(cfg.provenance.values()) == {"default"}


def test_load_config_without_path():
    assert load_config() == RunConfig()


def test_sections_and_dotted_keys():
    cfg = config_from_text(
        "# golden run\n"
        "[analog]\n"
        "noise_sigma_v = 0.005   # 5 mV\n"
        "vtc_nonlin = 0, 1e-10\n"
        "adc.bits = 10\n"
        "[codec]\n"
        "pairing = clock_division\n"
        "[engine]\n"
        "renorm_enabled = yes\n"
        "renorm_scale = 0.01\n"
        "[run]\n"
        "seed = 0x10\n",
        "golden.cfg",
    )
    assert cfg.analog.noise_sigma_v == 0.005
    assert cfg.analog.vtc_nonlin == (0.0, 1e-10)
    assert cfg.adc.bits == 10
    assert cfg.engine.adc.bits == 10
    assert cfg.engine.codec.pairing is Pairing.CLOCK_DIVISION
    assert cfg.engine.renorm_enabled
    assert cfg.engine.renorm_scale == 0.01
    assert cfg.seed == 16
    assert cfg.provenance["adc.bits"] == "golden.cfg:5"
    assert cfg.provenance["analog.vdd"] == "default"


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("adc.bits = 0\n", "adc.bits"),
        ("[codec]\nactivation_levels = 6\n", "codec.weight_levels"),
        ("run.trials = 0\n", "run.trials"),
        ("engine.taps = 27\n", "analog.sac_count_max"),
        ("analog.sac_v_min = 1.5\n", "analog.sac_v_min"),
    ],
)
def test_invariant_violations_name_the_key(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        config_from_text(text)


def test_unknown_key_suggests_nearest():
    with pytest.raises(ConfigError) as info:
        parse_config_text("[analog]\nsac_vmin = 0.4\n", "run.cfg")
    message = str(info.value)
    assert message.startswith("run.cfg:2:")
    assert "analog.sac_v_min" in message


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("[analog\n", ":1: malformed section"),
        ("[bogus]\n", ":1: unknown section"),
        ("vdd = 1.0\n", ":1: key 'vdd' outside any section"),
        ("[analog]\nvdd\n", ":2: expected 'key = value'"),
        ("adc.bits = 8\nadc.bits = 9\n", ":2: duplicate key"),
        ("adc.bits = eight\n", ":1: adc.bits: cannot parse"),
        ("engine.renorm_enabled = maybe\n", ":1: engine.renorm_enabled"),
    ],
)
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        config_from_text(text)


def test_overrides_are_recorded():
    cfg = load_config().with_overrides(seed=7, trials=20, out_dir=Path("results"))
    assert (cfg.seed, cfg.trials, cfg.out_dir) == (7, 20, Path("results"))
    assert cfg.provenance["run.seed"] == "cli"
    with pytest.raises(ConfigError, match="run.trials"):
        cfg.with_overrides(trials=0)
    with pytest.raises(ConfigError, match="run.seed"):
        cfg.with_overrides(seed=-1)


def test_load_config_from_file(tmp_path):
    path = tmp_path / "scmac.cfg"
    path.write_text("[energy]\nadc_per_conversion_fj = 3000\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.energy.adc_per_conversion_fj == 3000
    assert cfg.provenance["energy.adc_per_conversion_fj"] == f"{path}:2"


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/scmac.cfg")


def test_flattened_is_plain_data():
    flat = load_config().flattened()
    assert flat["codec.pairing"] == "repeat"
    assert flat["run.out_dir"] == "out"
    assert flat["analog.vtc_nonlin"] == []
    assert flat["codec.extended_length"] == 44
