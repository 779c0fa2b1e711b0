"""Tests for experiment configuration parsing, validation and persistence."""

from __future__ import annotations

import pytest
from pydantic import ValidationError

from src.errors import ConfigurationError
from src.models.config import (
    CONTINUOUS_BATCHSIZE,
    DISCRETE_BATCHSIZE,
    ExperimentConfig,
    KLEstimator,
    Variant,
    build_config,
    dump_config,
    load_config,
    parse_config,
    parse_config_text,
    save_config,
)


class TestDefaults:
    def test_discrete_defaults(self):
        config = build_config({})
        assert config.env == "bitflip:8"
        assert config.variant is Variant.HTRPO
        assert config.batchsize == DISCRETE_BATCHSIZE
        assert config.hidden_sizes == (64, 64)
        assert config.kl_estimator is KLEstimator.QKL
        assert not config.record_wall_time

    def test_continuous_batchsize(self):
        assert build_config({"env": "pointreach:0.1"}).batchsize == CONTINUOUS_BATCHSIZE

    def test_radius_is_derived(self):
        assert build_config({"max_kl": 2e-5, "gamma": 0.98}).radius == 1e-3

    def test_run_name(self):
        config = build_config({"env": "gridnav:8:far", "variant": "trpo", "seed": 4})
        assert config.run_name == "gridnav-8-far_trpo_s4"

    def test_only_htrpo_uses_hindsight(self):
        assert Variant.HTRPO.uses_hindsight
        assert not Variant.QKL_TRPO.uses_hindsight
        assert not Variant.TRPO.uses_hindsight


class TestValidation:
    @pytest.mark.parametrize(
        "values",
        [
            {"env": "maze:4"},
            {"gamma": 1.0},
            {"max_kl": 0.0},
            {"n_goals": 0},
            {"variant": "ppo"},
            {"hidden_sizes": "0,8"},
            {"goal_metric": "no-such-metric"},
            {"unknown_key": 1},
        ],
    )
    def test_invalid_values(self, values):
        with pytest.raises(ConfigurationError):
            build_config(values)

    def test_batchsize_below_horizon(self):
        with pytest.raises(ConfigurationError, match="horizon"):
            build_config({"env": "bitflip:16", "batchsize": 8})

    def test_hidden_sizes_from_text(self):
        assert build_config({"hidden_sizes": "32, 16"}).hidden_sizes == (32, 16)

    def test_frozen(self):
        config = build_config({})
        with pytest.raises(ValidationError):
            config.seed = 3


class TestTextFormat:
    def test_round_trip(self):
        config = build_config(
            {"env": "gridnav:6", "variant": "qkltrpo", "max_kl": 1e-4, "use_wis": False,
             "hidden_sizes": (32, 32), "kl_estimator": "naive"}
        )
        assert parse_config(dump_config(config)).model_dump() == config.model_dump()

    def test_comments_and_blank_lines(self):
        text = "# header\n\nenv = bitflip:4  # small\nseed=2\n"
        assert parse_config_text(text) == {"env": "bitflip:4", "seed": "2"}

    def test_line_without_equals(self):
        with pytest.raises(ConfigurationError, match="line 2"):
            parse_config_text("seed = 1\nbroken\n")

    def test_booleans_are_lowercase(self):
        assert "use_wis = true" in dump_config(ExperimentConfig())


class TestLoad:
    def test_overrides_win_and_none_is_ignored(self, tmp_path):
        path = save_config(build_config({"seed": 1, "n_goals": 8}), tmp_path / "config.txt")
        config = load_config(path, {"seed": 5, "n_goals": None})
        assert config.seed == 5
        assert config.n_goals == 8

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "absent.txt")

    def test_no_file_uses_defaults(self):
        assert load_config(None, {"env": "bitflip:4"}).env == "bitflip:4"
