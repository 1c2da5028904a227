import pytest

from mimocal.config import ExperimentConfig, dumps_config, load_config, parse_config, save_config
from mimocal.errors import ConfigError


class TestDefaults:
    def test_empty_file_gives_table_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        cfg = load_config(path)
        assert cfg == ExperimentConfig()
        assert (cfg.M, cfg.N, cfg.P) == (32, 4, 10240)
        assert cfg.hidden_dims == (128, 128, 128)
        assert (cfg.learning_rate, cfg.epochs, cfg.batch_size) == (0.01, 256, 4)
        assert cfg.validation_fraction == 0.4
        assert cfg.snr_grid_db == tuple(float(s) for s in range(0, 45, 5))

    def test_train_config(self):
        tc = ExperimentConfig(hidden_dims=(8,), epochs=3).train_config(seed=9)
        assert tc.seed == 9 and tc.hidden_dims == (8,) and tc.epochs == 3


class TestParsing:
    def test_values_and_comments(self):
        cfg = parse_config(
            "# header\nM = 8  # antennas\nN=2\nsnr_grid_db = 0, 10,20\nmethods = dnn,crb\n"
            "strict = yes\ntrain_snr_db = none\nul_pilot_length = 4\nscenario = tanhtype\n"
        )
        assert (cfg.M, cfg.N, cfg.snr_grid_db, cfg.methods) == (8, 2, (0.0, 10.0, 20.0), ("dnn", "crb"))
        assert cfg.strict and cfg.train_snr_db is None and cfg.ul_pilot_length == 4
        assert cfg.scenario == "TanhType"

    def test_not_increasing(self):
        with pytest.raises(ConfigError, match="strictly increasing"):
            parse_config("snr_grid_db = 10,5")

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match=r"line 2: unknown key 'antennas'"):
            parse_config("M = 4\nantennas = 4\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="line 2: duplicate"):
            parse_config("M = 4\nM = 5\n")

    def test_bad_value_has_line(self):
        with pytest.raises(ConfigError, match="line 3: bad value for trials"):
            parse_config("M = 4\n\ntrials = many\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("M 4")

    @pytest.mark.parametrize(
        "text,field",
        [
            ("trials = 0", "trials"),
            ("methods = dnn,svm", "methods"),
            ("methods = dnn,dnn", "methods"),
            ("scenario = Cubic", "scenario"),
            ("reference_antenna = 40", "reference_antenna"),
            ("crosstalk_level = 2", "crosstalk_level"),
            ("snr_grid_db = ", "snr_grid_db"),
            ("master_seed = -1", "master_seed"),
            ("tanh_mode = cubic", "tanh_mode"),
            ("validation_fraction = 1.5", "validation_fraction"),
        ],
    )
    def test_validation_names_field(self, text, field):
        with pytest.raises(ConfigError, match=field):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.cfg")


class TestRoundTrip:
    def test_defaults(self, tmp_path):
        save_config(ExperimentConfig(), tmp_path / "c.cfg")
        assert load_config(tmp_path / "c.cfg") == ExperimentConfig()

    def test_custom(self):
        cfg = ExperimentConfig(
            M=5, snr_grid_db=(-2.5, 0.1, 7.0), train_snr_db=12.25, learning_rate=0.1 + 0.2,
            hidden_dims=(3, 9), methods=("crb", "dnn"), strict=True, dl_pilot_length=7, master_seed=2**64 - 1,
        )
        assert parse_config(dumps_config(cfg)) == cfg

    def test_overrides_skip_none(self):
        cfg = ExperimentConfig().with_overrides(trials=3, master_seed=None)
        assert cfg.trials == 3 and cfg.master_seed == 0
