# test_config.py
import json

import pytest

from config import (
    DEFAULT_VIEWER_PARAMS,
    SETTINGS_KEY_VIEWER,
    ConfigError,
    default_run_config,
    load_run_config,
    load_viewer_settings,
    save_viewer_settings,
    validate_config,
)

RUN_TOML = """
master_seed = 7

[domain]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0

[potential]
kind = "quadratic"
center = [0.0, 0.0]
weight = 2.0

[grid]
M = 15
a = [0.0, 0.0]
b = [0.0, 0.0]

[integrator]
n = 50.0
dt = 0.001
t_end = 0.1
record_every = 5
"""


@pytest.mark.non_gui
def test_default_run_config_is_valid():
    validate_config(default_run_config())


@pytest.mark.non_gui
def test_default_run_config_returns_independent_copies():
    first = default_run_config()
    first["grid"]["M"] = 99
    assert default_run_config()["grid"]["M"] == 31


@pytest.mark.non_gui
def test_load_run_config_from_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(RUN_TOML)
    config = load_run_config(path)
    assert config["master_seed"] == 7
    assert config["domain"]["radius"] == 1.0
    assert config["integrator"]["record_every"] == 5


@pytest.mark.non_gui
def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.toml")


@pytest.mark.non_gui
def test_malformed_toml_is_config_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("master_seed = \n[domain")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_run_config(path)


@pytest.mark.non_gui
@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda c: c["domain"].update(color="red"), "unknown key"),
        (lambda c: c.update(extras={}), "unknown section"),
        (lambda c: c.pop("master_seed"), "master_seed"),
        (lambda c: c["grid"].pop("M"), "missing key 'M'"),
        (lambda c: c["grid"].update(M=True), "invalid type bool"),
        (lambda c: c["integrator"].update(dt=0.01), "violates dt <= 1/\\(4n\\)"),
        (lambda c: c["grid"].update(M=2), "grid.M"),
        (lambda c: c["domain"].update(kind="torus"), "unknown domain kind"),
        (lambda c: c.setdefault("verify", {}).update(tests=["nonsense"]), "unknown verification test"),
        (lambda c: c["verify"].update(n_list=[100.0, 10.0]), "increasing"),
        (lambda c: c["verify"].update(tests=["stability"], n_list=[10.0, 100.0]), "at least 3 entries"),
    ],
)
def test_invalid_configs_are_rejected(mutate, message):
    config = default_run_config()
    mutate(config)
    with pytest.raises(ConfigError, match=message):
        validate_config(config)


@pytest.mark.non_gui
def test_viewer_settings_round_trip(dummy_qsettings):
    params = dict(DEFAULT_VIEWER_PARAMS, n=400.0, dt=5e-4)
    save_viewer_settings(params)
    assert load_viewer_settings() == params


@pytest.mark.non_gui
def test_viewer_settings_fall_back_to_defaults(dummy_qsettings):
    assert load_viewer_settings() == DEFAULT_VIEWER_PARAMS
    dummy_qsettings.setValue(SETTINGS_KEY_VIEWER, json.dumps({"n": 1.0}))
    assert load_viewer_settings() == DEFAULT_VIEWER_PARAMS
    dummy_qsettings.setValue(SETTINGS_KEY_VIEWER, "{not json")
    assert load_viewer_settings() == DEFAULT_VIEWER_PARAMS
