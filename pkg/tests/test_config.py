"""Unit tests for relay configuration files."""

import pytest

from relaygap.config import (
    dump_relay_config,
    load_relay_config,
    parse_relay_config,
    save_relay_config,
)
from relaygap.relaybp import RelayConfig


class TestParseRelayConfig:
    """key=value parsing."""

    @pytest.mark.unit
    def test_overrides_and_comments(self):
        text = """
        # forced-run parameters
        num_sets = 25
        pre-iter=40   # hyphenated spelling
        gamma_min=-0.1
        """
        cfg = parse_relay_config(text)
        assert cfg.num_sets == 25
        assert cfg.pre_iter == 40
        assert cfg.gamma_min == -0.1
        assert cfg.set_max_iter == RelayConfig().set_max_iter

    @pytest.mark.unit
    def test_base_is_kept(self):
        base = RelayConfig(stop_nconv=7)
        assert parse_relay_config("seed=3", base) == RelayConfig(stop_nconv=7, seed=3)

    @pytest.mark.unit
    @pytest.mark.parametrize(
        ("text", "message"),
        [
            ("alpha=1", "unknown key"),
            ("num_sets", "expected key=value"),
            ("num_sets=2.5", "bad value"),
            ("gamma0=fast", "bad value"),
        ],
    )
    def test_errors(self, text, message):
        with pytest.raises(ValueError, match=message):
            parse_relay_config(text)

    @pytest.mark.unit
    def test_validation_applies(self):
        """The resulting configuration is validated."""
        with pytest.raises(ValueError, match="gamma_min"):
            parse_relay_config("gamma_min=1\ngamma_max=0")

    @pytest.mark.unit
    def test_error_names_line(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_relay_config("seed=1\nbogus=2")


class TestConfigFiles:
    """Loading and saving."""

    @pytest.mark.unit
    def test_save_and_load(self, tmp_path):
        cfg = RelayConfig(gamma0=0.2, num_sets=50, seed=11)
        path = save_relay_config(cfg, tmp_path / "baseline.cfg")
        assert load_relay_config(path) == cfg
        assert "num_sets=50" in dump_relay_config(cfg)

    @pytest.mark.unit
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_relay_config(tmp_path / "missing.cfg")

    @pytest.mark.unit
    def test_error_names_file(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("nope=1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="bad.cfg"):
            load_relay_config(path)
