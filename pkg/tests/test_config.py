import pytest
import yaml

from provchain.clock import SteppingClock
from provchain.config import ConfigurationError, load_config
from provchain.locations import config_file


def test_defaults_are_written_back(tmp_path):
    config = load_config(tmp_path)

    assert config.clock.mode == "system"
    assert config.limits.inline_threshold == 1024
    written = yaml.safe_load(config_file(tmp_path).read_text())
    assert written["defaults"]["operator"] == "operator"
    assert written["logging"]["level"] == "WARNING"


def test_partial_file_keeps_user_values(tmp_path):
    config_file(tmp_path).write_text("clock:\n  mode: fixed\n  step_ms: 5\nkeys:\n  seed: demo\n")

    config = load_config(tmp_path)

    assert (config.clock.mode, config.clock.step_ms) == ("fixed", 5)
    assert config.keys.seed == "demo"
    written = yaml.safe_load(config_file(tmp_path).read_text())
    assert written["clock"]["mode"] == "fixed"
    assert "start_ms" in written["clock"]


def test_invalid_value(tmp_path):
    config_file(tmp_path).write_text("clock:\n  mode: lunar\n")
    with pytest.raises(ConfigurationError, match="clock.mode"):
        load_config(tmp_path)


def test_stepping_clock_resumes_after_tip():
    clock = SteppingClock(1000, step_ms=10)
    assert [clock.now(), clock.now()] == [1000, 1010]

    clock.resume_after(5000)
    assert clock.now() == 5010
    clock.resume_after(10)
    assert clock.now() == 5020
