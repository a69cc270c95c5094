import pytest

from tremorsketch.config import build_config, dump_config, load_config, parse_config_text
from tremorsketch.errors import InvalidConfig, InvalidValue, ParseError, UnknownKey


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_file_spiral_defaults(tmp_path):
    cfg = load_config(write(tmp_path, ""), drawing_type="spiral", env={})
    assert cfg.train.learning_rate == 0.0005
    assert (cfg.train.epochs, cfg.train.batch_size) == (150, 32)
    assert cfg.augment.rotation_range == 5
    assert cfg.model_preset == "vgg16"


def test_wave_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "drawing_type = wave\n"), env={})
    assert cfg.train.learning_rate == 0.0001
    assert cfg.augment.rotation_range == 10
    assert cfg.model_preset == "vgg19"


def test_single_override(tmp_path):
    base = load_config(write(tmp_path, ""), "spiral", env={})
    cfg = load_config(write(tmp_path, "# short run\nepochs = 10   # inline comment\n"), "spiral", env={})
    assert cfg.train.epochs == 10
    assert cfg.train.learning_rate == base.train.learning_rate
    assert cfg.augment == base.augment


def test_bad_value_reports_line(tmp_path):
    with pytest.raises(InvalidValue) as info:
        load_config(write(tmp_path, "seed = 1\n\nepochs = banana\n"), "spiral", env={})
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_unknown_key(tmp_path):
    with pytest.raises(UnknownKey) as info:
        load_config(write(tmp_path, "epochz = 3\n"), "spiral", env={})
    assert info.value.line == 1


def test_missing_equals():
    with pytest.raises(ParseError):
        parse_config_text("epochs 3\n")


def test_invalid_combination():
    with pytest.raises(InvalidConfig):
        build_config(parse_config_text("learning_rate = 0\n"), "spiral", env={})
    with pytest.raises(InvalidConfig):
        build_config(parse_config_text("model_preset = resnet\n"), "spiral", env={})


def test_fraction_values():
    assert parse_config_text("rescale = 1/255\n")["rescale"] == 1 / 255


def test_env_seed_override(tmp_path):
    p = write(tmp_path, "seed = 3\n")
    assert load_config(p, env={}).seed == 3
    cfg = load_config(p, env={"TREMORSKETCH_SEED": "41"})
    assert cfg.seed == 41 and cfg.train.seed == 41
    with pytest.raises(InvalidValue):
        load_config(p, env={"TREMORSKETCH_SEED": "x"})


def test_round_trip(tmp_path):
    text = "drawing_type = wave\nepochs = 7\nshear_range = 0.05\nmodel_preset = desk19\nimage_size = 64\n"
    cfg = load_config(write(tmp_path, text), env={})
    again = load_config(write(tmp_path, dump_config(cfg), "dumped.cfg"), env={})
    assert again == cfg
