"""Config file loading and environment override tests."""

from __future__ import annotations

import json

import pytest

from rolereward.config import ConfigError, load_config
from rolereward.metrics import ngram_precision_config


class TestFile:
    def test_defaults(self):
        config = load_config(environ={})
        assert config.port == 8080
        assert config.weights.w_focus == 0.4
        assert config.decay == 0.99
        assert config.epsilon_norm == 1e-8
        assert config.ref_metrics == (1, 2)

    def test_file_values(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps(
                {
                    "port": 9000,
                    "weights": {"focus": 0.5, "attr": 0.25, "ref": 0.25},
                    "decay": 0.95,
                    "epsilon_norm": 1e-6,
                    "epsilon_adv": 1e-3,
                    "clip_epsilon": 0.1,
                    "kl_beta": 0.05,
                    "ref_metrics": [1, 2, 3],
                    "snapshot_path": "/tmp/snap.json",
                }
            ),
            encoding="utf-8",
        )
        config = load_config(path, environ={})
        assert config.port == 9000
        assert config.weights.w_attr == 0.25
        assert config.ref_metrics == (1, 2, 3)
        assert config.snapshot_path == "/tmp/snap.json"
        assert config.ref_config().metrics == tuple(
            ngram_precision_config(n) for n in (1, 2, 3)
        )

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"prot": 1}', encoding="utf-8")
        with pytest.raises(ConfigError, match="prot"):
            load_config(path, environ={})

    def test_unknown_weight_key_named(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"weights": {"focu": 0.4}}', encoding="utf-8")
        with pytest.raises(ConfigError, match="focu"):
            load_config(path, environ={})

    def test_invalid_values_rejected(self, tmp_path):
        for document in (
            {"decay": 1.5},
            {"epsilon_norm": 0},
            {"clip_epsilon": 2.0},
            {"kl_beta": -1},
            {"ref_metrics": [0]},
            {"ref_metrics": "abc"},
        ):
            path = tmp_path / "config.json"
            path.write_text(json.dumps(document), encoding="utf-8")
            with pytest.raises(ConfigError):
                load_config(path, environ={})

    def test_not_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{oops", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path, environ={})


class TestEnvOverrides:
    def test_simple_overrides(self):
        config = load_config(
            environ={
                "ROLEREWARD_PORT": "9100",
                "ROLEREWARD_DECAY": "0.9",
                "ROLEREWARD_REF_METRICS": "1,3",
                "ROLEREWARD_KL_BETA": "0.1",
            }
        )
        assert config.port == 9100
        assert config.decay == 0.9
        assert config.ref_metrics == (1, 3)
        assert config.kl_beta == 0.1

    def test_weight_overrides_merge_with_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"weights": {"focus": 0.6, "attr": 0.3}}', encoding="utf-8")
        config = load_config(
            path, environ={"ROLEREWARD_WEIGHTS_ATTR": "0.1", "ROLEREWARD_WEIGHTS_REF": "0.05"}
        )
        assert config.weights.w_focus == 0.6   # from file
        assert config.weights.w_attr == 0.1    # env beats file
        assert config.weights.w_ref == 0.05

    def test_unknown_env_key_named(self):
        with pytest.raises(ConfigError, match="protocol"):
            load_config(environ={"ROLEREWARD_PROTOCOL": "h2"})

    def test_unrelated_env_ignored(self):
        config = load_config(environ={"PATH": "/usr/bin", "HOME": "/root"})
        assert config.port == 8080
