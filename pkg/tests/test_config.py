"""Tests for RunConfig parsing, precedence and validation."""
import pytest

from frac_schrodinger.tool import config
from frac_schrodinger.tool.config import ConfigError, RunConfig, parse_config

pytestmark = pytest.mark.level1


class TestEnvironment:
    def test_workers_from_env(self, monkeypatch):
        monkeypatch.setenv(config.ENV_WORKERS, "3")
        assert config.default_workers() == 3

    def test_bad_workers_fall_back(self, monkeypatch):
        monkeypatch.setenv(config.ENV_WORKERS, "many")
        assert config.default_workers() == 1

    def test_output_default(self):
        assert config.default_output_dir() == "runs"

    def test_output_from_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv(config.ENV_OUTPUT, str(tmp_path))
        assert parse_config().output == str(tmp_path)


class TestPrecedence:
    def test_defaults(self):
        cfg = parse_config()
        assert cfg == RunConfig(subcommand="solve")

    def test_flag_beats_section_beats_run(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nalpha = 0.3\nN = 64\n\n[solve]\nalpha = 0.4\n")
        assert parse_config(ini).alpha == 0.4
        assert parse_config(ini).N == 64
        assert parse_config(ini, {"alpha": 0.6}).alpha == 0.6

    def test_none_overrides_are_ignored(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nM = 8\n")
        assert parse_config(ini, {"M": None}).M == 8

    def test_nested_section(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[verify]\ns_max = 100.0\n\n[verify.ialpha]\ns_max = 200.0\n")
        assert parse_config(ini, subcommand="verify ialpha").s_max == 200.0
        assert parse_config(ini, subcommand="verify mikhlin").s_max == 100.0

    def test_bool_and_optional(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nplot_data = yes\nbeta = 0.25\n")
        cfg = parse_config(ini)
        assert cfg.plot_data is True
        assert cfg.beta == 0.25

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "absent.ini")

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(overrides={"gamma": 1.0})
        assert exc.value.key == "gamma"

    def test_bad_number(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nN = lots\n")
        with pytest.raises(ConfigError) as exc:
            parse_config(ini)
        assert exc.value.key == "N"


class TestValidation:
    @pytest.mark.parametrize("overrides,key", [
        ({"alpha": 1.0}, "alpha"),
        ({"alpha": 0.0}, "alpha"),
        ({"N": 4}, "N"),
        ({"M": 0}, "M"),
        ({"T": -1.0}, "T"),
        ({"p": 0.5}, "p"),
        ({"ensemble": 0}, "ensemble"),
        ({"quadrature": "simpson"}, "quadrature"),
        ({"forcing": "noise"}, "forcing"),
        ({"radius": 0.0}, "radius"),
        ({"only": "1,16"}, "only"),
        ({"only": "first"}, "only"),
    ])
    def test_rejects(self, overrides, key):
        with pytest.raises(ConfigError) as exc:
            parse_config(overrides=overrides)
        assert exc.value.key == key

    def test_alpha_one_allowed_for_mlf(self):
        assert parse_config(overrides={"alpha": 1.0}, subcommand="mlf eval").alpha == 1.0

    def test_semilinear_needs_alpha_p(self):
        with pytest.raises(ConfigError, match="alpha\\*p must exceed 1"):
            parse_config(overrides={"alpha": 0.4, "p": 2.0}, subcommand="semilinear")

    def test_damping_order(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(overrides={"alpha": 0.6, "beta": 0.7, "damping": 1.0},
                         subcommand="semilinear")
        assert exc.value.key == "beta"

    def test_mrconstant_needs_p_above_one(self):
        with pytest.raises(ConfigError):
            parse_config(overrides={"p": 1.0}, subcommand="verify mrconstant")

    def test_only_list(self):
        assert parse_config(overrides={"only": "1, 15"}, subcommand="accept").only == "1, 15"


class TestEffectiveConfig:
    def test_round_trip(self, tmp_path):
        cfg = parse_config(overrides={"alpha": 0.7, "N": 256, "beta": 0.35,
                                      "plot_data": True, "only": "3"},
                           subcommand="solve")
        path = cfg.write_effective(tmp_path)
        assert path.name == "effective_config.ini"
        assert parse_config(path, subcommand="solve") == cfg

    def test_ini_text(self):
        text = RunConfig(alpha=0.25).to_ini()
        assert text.startswith("[run]\n")
        assert "alpha = 0.25" in text
        assert "beta = \n" in text
        assert "\r" not in text
