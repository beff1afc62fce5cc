import pytest

from cli.config import PRESETS, RunConfig, build_config, config_summary, load_config_file
from core.errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults():
    config = build_config("radial", {})
    assert config.seed == 0
    assert config.preset == "quick"
    assert config.output_dir == "furthlab-out"
    assert config.constants.hbar == 1.0 and config.constants.mass == 1.0
    assert config.potential == "coulomb"
    assert config.geometry == "spherical"


def test_flags_override_file_override_defaults(tmp_path):
    path = _write(tmp_path, "seed=7\nhbar=2.0\nn_paths=50\n")
    config = build_config("paths", {"seed": 9, "hbar": None, "out": str(tmp_path)}, path)
    assert config.seed == 9
    assert config.constants.hbar == 2.0
    assert config.constants.diffusivity == pytest.approx(1.0)
    assert config.n_paths == 50
    assert config.output_dir == str(tmp_path)


def test_file_keys_accept_dashes_and_case(tmp_path):
    path = _write(tmp_path, "L_MAX=3\nphase_convention=minus\n")
    values = load_config_file(path)
    assert values == {"l_max": "3", "phase_convention": "minus"}
    config = build_config("dispersions", {}, path)
    assert config.l_max == 3
    assert config.phase_convention == "minus"


def test_unknown_file_key(tmp_path):
    path = _write(tmp_path, "seed=1\ncolour=blue\n")
    with pytest.raises(ConfigError, match="colour"):
        build_config("paths", {}, path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        build_config("paths", {}, tmp_path / "absent.cfg")


@pytest.mark.parametrize("text", ["seed=abc\n", "seed=-1\n", "hbar=0\n", "mass=-2\n", "n_steps=0\n",
                                  "preset=medium\n", "phase_convention=sideways\n"])
def test_bad_values(tmp_path, text):
    with pytest.raises(ConfigError):
        build_config("paths", {}, _write(tmp_path, text))


def test_unknown_verb():
    with pytest.raises(ConfigError, match="unknown experiment"):
        RunConfig("bogus")


def test_preset_values():
    quick = build_config("paths", {})
    full = build_config("paths", {"preset": "full"})
    assert quick.preset_value("n_paths") == PRESETS["quick"]["n_paths"]
    assert full.preset_value("n_paths") == PRESETS["full"]["n_paths"]
    assert build_config("paths", {"n_paths": 50}).preset_value("n_paths") == 50
    assert len(full.sweep) > len(quick.sweep)
    assert min(full.dampings) < min(quick.dampings)


def test_as_dict_is_reproducible_record():
    config = build_config("kernels", {"out": "/tmp/elsewhere"})
    record = config.as_dict()
    assert "output_dir" not in record
    assert record["experiment"] == "kernels"
    assert record["constants"] == {"hbar": 1.0, "mass": 1.0, "diffusivity": 0.5}
    assert list(record) == sorted(record)
    assert build_config("kernels", {"out": "other"}).as_dict() == record


def test_config_summary_mentions_seed():
    assert "seed=0" in config_summary(build_config("wkb", {}))
