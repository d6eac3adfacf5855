import json

import pytest

from maxwellinv.config import (
    PRESETS,
    ExperimentConfig,
    InversionConfig,
    MeshConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    paper_scale,
    preset,
    save_config,
    support_from_dict,
    support_to_dict,
)
from maxwellinv.errors import ConfigError
from maxwellinv.supports import Ball, Ellipse, FourierStar, Union


def test_default_config_valid():
    cfg = config_from_dict(config_to_dict(ExperimentConfig()))
    assert cfg.meshes.h_data == 0.03
    assert cfg.meshes.h_inverse == 0.04
    assert cfg.inversion.stages == ("ball",)


def test_json_round_trip(tmp_path):
    cfg = preset("table1")
    path = tmp_path / "cfg.json"
    save_config(cfg, str(path))
    back = load_config(str(path))
    assert back == cfg
    assert back.checksum() == cfg.checksum()


def test_checksum_changes_with_settings():
    a = preset("table1")
    b = preset("table5")
    assert a.checksum() != b.checksum()


def test_support_round_trip():
    for s in (Ball((-0.4, 0.0), 0.2),
              Ellipse((0.1, -0.2), 0.1, 0.3),
              FourierStar((-0.4, 0.0), 0.2, ((0.0, 0.0), (0.04, 0.0))),
              Union((Ball((0.0, 0.0), 0.1), Ball((0.2, 0.2), 0.05)))):
        assert support_from_dict(support_to_dict(s)) == s


def test_support_bad_shape():
    with pytest.raises(ConfigError, match="shape"):
        support_from_dict({"shape": "cube", "center": [0, 0]})
    with pytest.raises(ConfigError, match="truth"):
        support_from_dict({"shape": "ball"})


def test_unknown_field_rejected():
    d = config_to_dict(ExperimentConfig())
    d["typo_field"] = 1
    with pytest.raises(ConfigError, match="typo_field"):
        config_from_dict(d)
    d = config_to_dict(ExperimentConfig())
    d["meshes"]["h_typo"] = 0.1
    with pytest.raises(ConfigError, match="meshes.h_typo"):
        config_from_dict(d)


def test_inverse_crime_guard():
    d = config_to_dict(ExperimentConfig())
    d["meshes"]["h_data"] = 0.04
    d["meshes"]["h_inverse"] = 0.04
    with pytest.raises(ConfigError, match="inverse crime"):
        config_from_dict(d)
    d["meshes"]["allow_matching"] = True
    cfg = config_from_dict(d)
    assert cfg.meshes.h_data == cfg.meshes.h_inverse


def test_geometry_ordering_validated():
    d = config_to_dict(ExperimentConfig())
    d["geometry"]["inner_radius"] = 0.9
    with pytest.raises(ConfigError, match="geometry"):
        config_from_dict(d)


def test_stage_validation():
    d = config_to_dict(ExperimentConfig())
    d["inversion"]["stages"] = ["ball", "banana"]
    with pytest.raises(ConfigError, match="banana"):
        config_from_dict(d)
    d["inversion"]["stages"] = ["fourier"]
    with pytest.raises(ConfigError, match="fourier"):
        config_from_dict(d)


def test_amplitude_bounds():
    d = config_to_dict(ExperimentConfig())
    d["amplitude"] = 1.5
    with pytest.raises(ConfigError, match="amplitude"):
        config_from_dict(d)
    d["amplitude"] = 0.1
    d["sweep_amplitudes"] = [0.1, 2.0]
    with pytest.raises(ConfigError, match="sweep"):
        config_from_dict(d)


def test_bad_json_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(str(path))
    with pytest.raises(ConfigError, match="read"):
        load_config(str(tmp_path / "missing.json"))


def test_all_presets_load():
    for name in PRESETS:
        cfg = preset(name)
        assert cfg.name == name
        # every preset survives a JSON round trip
        assert config_from_dict(config_to_dict(cfg)) == cfg
    with pytest.raises(ConfigError, match="preset"):
        preset("table9")


def test_preset_shapes():
    assert isinstance(preset("table1").truth, Ball)
    assert preset("table5").skip_completion
    assert len(preset("table2_sweep").sweep_amplitudes) == 6
    assert isinstance(preset("ellipse").truth, Ellipse)
    two = preset("two_ball")
    assert isinstance(two.truth, Union) and len(two.truth.parts) == 2
    assert two.inversion.inner_radius == 0.95
    star = preset("star_fourier")
    assert isinstance(star.truth, FourierStar)
    assert star.inversion.stages == ("ball", "fourier")


def test_paper_scale():
    cfg = paper_scale(preset("table1"))
    assert cfg.meshes.h_data == 0.0138
    assert cfg.meshes.h_v == 0.02
    assert cfg.meshes.h_inverse == 0.041


def test_config_file_is_plain_json(tmp_path):
    path = tmp_path / "cfg.json"
    save_config(preset("star_fourier"), str(path))
    d = json.loads(path.read_text())
    assert d["truth"]["shape"] == "star"
