import pytest

from evtalign.config import RunConfig, load_config, parse_config_text
from evtalign.errors import ConfigError


class TestParsing:
    def test_defaults_from_empty_text(self):
        cfg = parse_config_text("")
        assert cfg.preset == "toy"
        assert cfg.embed_dim == 64
        assert cfg.epochs == 200

    def test_key_value_and_comments(self):
        cfg = parse_config_text("""
# a comment
seed=7

lr=0.005
no_image=true
""")
        assert cfg.seed == 7
        assert cfg.lr == 0.005
        assert cfg.no_image is True

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("bogus_key=1")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("seed=1\nseed=2")

    def test_bad_value_type_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("epochs=soon")
        with pytest.raises(ConfigError):
            parse_config_text("no_image=probably")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key=value"):
            parse_config_text("seed 7")

    def test_fullscale_preset_overridable(self):
        cfg = parse_config_text("preset=fullscale\nepochs=3")
        assert cfg.embed_dim == 768
        assert cfg.patch_size == 16
        assert cfg.lr == 1e-5
        assert cfg.weight_decay == 2e-4
        assert cfg.min_lr == 1e-8
        assert cfg.epochs == 3

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("seed=3\nepochs=2\n")
        cfg, text = load_config(p)
        assert cfg.seed == 3
        assert text == "seed=3\nepochs=2\n"

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/run.cfg")


class TestValidation:
    def test_divisibility_checks(self):
        with pytest.raises(ConfigError):
            RunConfig(events_total=100, events_per_frame=32)
        with pytest.raises(ConfigError):
            RunConfig(target_resolution=30, patch_size=8)

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(alpha=-1.0)

    def test_bad_dtype_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(dtype="float16")

    def test_image_absent_weights(self):
        cfg = RunConfig(no_image=True)
        w = cfg.loss_weights()
        assert (w.alpha, w.beta, w.theta, w.gamma) == (0.0, 1.0, 0.0, 0.0)

    def test_round_trip_through_text(self):
        cfg = RunConfig(seed=9, lr=0.0025, no_image=True, epochs=17)
        back = parse_config_text(cfg.to_text())
        assert back == cfg
