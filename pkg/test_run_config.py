"""
Tests for config file parsing and parameter precedence
"""
import pytest

from run_config import (
    CONFIG_ENV_VAR,
    VERSION,
    ConfigError,
    config_path,
    header_lines,
    load_config,
    parse_config,
    resolved_parameters,
)


def test_parse_config():
    values = parse_config([
        "# channel",
        "loss_db = 20",
        "",
        "dark-count=2e-5   # four detectors",
        "protocols=dps, bb84-poisson",
        "integer_k=yes",
    ])
    assert values == {
        "loss_db": 20.0,
        "dark_count": 2e-5,
        "protocols": ["dps", "bb84-poisson"],
        "integer_k": True,
    }


@pytest.mark.parametrize("line, message", [
    ("loss_db", "expected key=value"),
    ("colour=red", "unknown key"),
    ("pulses=many", "bad value for pulses"),
    ("integer_k=maybe", "bad value for integer_k"),
])
def test_parse_config_errors(line, message):
    with pytest.raises(ConfigError) as info:
        parse_config([line], source="run.cfg")
    assert message in str(info.value)
    assert str(info.value).startswith("run.cfg:1:")


def test_config_path_precedence(monkeypatch):
    monkeypatch.setenv(CONFIG_ENV_VAR, "/from/env.cfg")
    assert config_path("/from/flag.cfg") == "/from/flag.cfg"
    assert config_path(None) == "/from/env.cfg"
    monkeypatch.delenv(CONFIG_ENV_VAR)
    assert config_path(None) is None


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("nbar=0.2\nseed=7\n")
    assert load_config(str(path)) == {"nbar": 0.2, "seed": 7}
    assert load_config(None) == {}


def test_load_missing_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_resolved_parameters_precedence():
    defaults = {"loss_db": 0.0, "nbar": None, "seed": 0}
    merged = resolved_parameters(defaults, {"loss_db": 10.0, "seed": 3}, {"loss_db": 20.0, "seed": None})
    assert merged == {"loss_db": 20.0, "nbar": None, "seed": 3}


def test_header_lines():
    lines = header_lines("sweep", {"protocols": ["dps", "dps-seq"], "loss_min": 0.0}, ("loss_db", "rate"))
    assert lines == [
        f"# dpsrate {VERSION} sweep",
        "# loss_min=0.0",
        "# protocols=dps,dps-seq",
        "# columns: loss_db,rate",
    ]
