import numpy as np
import pytest

from msqsim.config import (ConfigError, ExperimentConfig, parse_config,
                           serialize_config)


def test_empty_text_gives_full_defaults():
    cfg = parse_config("")
    assert cfg == ExperimentConfig()
    assert cfg.grid.nx == 32
    assert cfg.medium.length_mm == 12.5
    assert cfg.medium.wavelength_nm == 795.0
    assert cfg.detector.electronic_floor_db == -13.0


def test_minimal_config_fills_defaults():
    cfg = parse_config("[grid]\nnx = 16\nny = 16\n\n[scan]\nsteps = 8\n")
    assert cfg.grid.nx == 16
    assert cfg.grid.pitch_mm == 0.15  # default
    assert cfg.scan.steps == 8
    assert cfg.medium.gain == 4.0  # untouched section keeps defaults


def test_round_trip_identity():
    cfg = parse_config("[medium]\ngain = 2.5\nlength_mm = 3.25\n")
    assert parse_config(serialize_config(cfg)) == cfg


def test_round_trip_survives_awkward_floats():
    cfg = parse_config("[grid]\npitch_mm = 0.1\n\n[medium]\ngain = 1.0000000001\n")
    again = parse_config(cfg.serialize())
    assert again.medium.gain == cfg.medium.gain
    assert again == cfg


def test_comments_and_blank_lines_ignored():
    cfg = parse_config(
        "# leading comment\n\n[grid]\nnx = 8  # trailing comment\n\n# done\n")
    assert cfg.grid.nx == 8


def test_gain_below_one_reports_line():
    with pytest.raises(ConfigError) as err:
        parse_config("[medium]\n\ngain = 0.5\n")
    assert any("line 3" in e and "gain must be >= 1" in e for e in err.value.errors)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\nnx = 8\n[laser]\npower = 1\n")
    assert any("line 3" in e and "unknown section" in e for e in err.value.errors)
    # keys inside the unknown section are not reported again
    assert not any("power" in e for e in err.value.errors)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\nnnx = 8\n")
    assert any("line 2" in e and "unknown key" in e for e in err.value.errors)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\nnx = 8\nnx = 16\n")
    assert any("duplicate key" in e and "line 3" in e for e in err.value.errors)


def test_malformed_number_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\npitch_mm = fast\n")
    assert any("expected a number" in e for e in err.value.errors)


def test_non_finite_number_rejected():
    with pytest.raises(ConfigError):
        parse_config("[medium]\ngain = inf\n")


def test_odd_grid_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\nnx = 7\n")
    assert any("even" in e for e in err.value.errors)


def test_bool_parsing():
    cfg = parse_config("[overlap]\nenabled = false\n\n[lo]\nideal_balanced = true\n")
    assert cfg.overlap.enabled is False
    assert cfg.lo.ideal_balanced is True
    with pytest.raises(ConfigError):
        parse_config("[overlap]\nenabled = yes\n")


def test_key_outside_section_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("nx = 8\n")
    assert any("outside any" in e for e in err.value.errors)


def test_multiple_errors_collected():
    with pytest.raises(ConfigError) as err:
        parse_config("[grid]\nnx = 7\npitch_mm = -1\n\n[medium]\ngain = 0\n")
    assert len(err.value.errors) == 3


def test_filter_keys_mutually_exclusive():
    with pytest.raises(ConfigError) as err:
        parse_config("[lo]\nfilter_auto = true\nfilter_rad_per_mm = 12.0\n")
    assert any("conflicts" in e for e in err.value.errors)
    cfg = parse_config("[lo]\nfilter_auto = false\nfilter_rad_per_mm = 12.0\n")
    assert cfg.lo.filter_rad_per_mm == 12.0


def test_width_scan_range_validated():
    with pytest.raises(ConfigError) as err:
        parse_config("[scan]\ntype = width\nstart = 0.5\nstop = 0.1\n")
    assert any("stop > start" in e for e in err.value.errors)
    with pytest.raises(ConfigError):
        parse_config("[scan]\ntype = width\nstart = -0.5\nstop = 1.0\n")


def test_scan_choice_validated():
    with pytest.raises(ConfigError) as err:
        parse_config("[scan]\ntype = wobble\n")
    assert any("must be one of" in e for e in err.value.errors)


def test_shipped_paper_default_matches_reference_parameters(paper_default_text):
    cfg = parse_config(paper_default_text)
    assert cfg.medium.length_mm == 12.5
    assert cfg.medium.wavelength_nm == 795.0
    assert cfg.medium.gain == 4.0
    assert cfg.medium.pump_waist_mm == 1.0
    assert cfg.detector.electronic_floor_db == -13.0
    assert parse_config(cfg.serialize()) == cfg


def test_shipped_default32_round_trips(default32_text):
    cfg = parse_config(default32_text)
    assert cfg.grid.nx == 32
    assert parse_config(cfg.serialize()) == cfg


def test_sha256_stable_under_round_trip(paper_default_text):
    cfg = parse_config(paper_default_text)
    assert cfg.sha256() == parse_config(cfg.serialize()).sha256()
