import pytest

from progadjust.config import (ConfigError, apply_overrides, read_config_file, seed_from_env)
from progadjust.simulate import ExperimentConfig, fast_config

GOOD = """
[simulate]
r2_values = 0.2, 0.5
n_hist_values = 50 100
replications = 20
master_seed = 7

[forest]
n_trees = 30
max_depth = none
bootstrap = yes

[friedman]
scale = 5.0

[run]
workers = 3
"""


def write(tmp_path, text):
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return path


def test_parse_and_apply(tmp_path):
    sections = read_config_file(write(tmp_path, GOOD))
    assert sections["run"] == {"workers": 3}
    config = apply_overrides(ExperimentConfig(), sections)
    assert config.r2_values == (0.2, 0.5)
    assert config.n_hist_values == (50, 100)
    assert config.replications == 20 and config.master_seed == 7
    assert config.forest.n_trees == 30 and config.forest.max_depth is None
    assert config.friedman.scale == 5.0
    assert config.friedman.center == ExperimentConfig().friedman.center


def test_overrides_keep_fast_base(tmp_path):
    config = apply_overrides(fast_config(), {"simulate": {"replications": 5}})
    assert config.replications == 5
    assert config.forest == fast_config().forest


@pytest.mark.parametrize("text, word", [
    ("[simulate]\nreplicates = 3\n", "replicates"),
    ("[forest]\nntree = 3\n", "ntree"),
    ("[plots]\nx = 1\n", "plots"),
    ("[simulate]\nreplications = many\n", "replications"),
    ("[forest]\nbootstrap = maybe\n", "bootstrap"),
    ("no section\n", "exp.ini"),
])
def test_errors_name_the_culprit(tmp_path, text, word):
    with pytest.raises(ConfigError, match=word):
        read_config_file(write(tmp_path, text))


def test_invalid_value_is_config_error():
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), {"simulate": {"replications": 0}})


def test_seed_env():
    assert seed_from_env({}) is None
    assert seed_from_env({"PROGADJUST_SEED": ""}) is None
    assert seed_from_env({"PROGADJUST_SEED": "42"}) == 42
    with pytest.raises(ConfigError):
        seed_from_env({"PROGADJUST_SEED": "x"})


def test_invalid_forest_value_is_config_error():
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), {"forest": {"n_trees": 0}})
