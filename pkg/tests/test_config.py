"""Tests for configuration loading, overrides, and canonical hashing."""

from __future__ import annotations

import pytest
import yaml

from metapop.config import (
    ConfigError,
    RunConfig,
    SuiteSpec,
    apply_override,
    canonical_mapping,
    config_from_mapping,
    config_hash,
    load_config,
)
from metapop.problems import Family


def _base_tree():
    return {
        "suite": {
            "families": ["sphere", "rastrigin"],
            "dimension": 2,
            "instances_per_family": 10,
            "split_ratio": [0.5, 0.2, 0.3],
            "seed": 7,
        },
        "policy": {"lambda": 6, "hidden_size": 8, "num_layers": 2},
        "ga": {"population_size": 8, "n_elites": 2, "n_parents": 4, "generations": 2},
        "episode": {"fe_max": 60, "tolerance": 0.05},
        "runs_per_task": 2,
        "master_seed": 3,
        "output_dir": "out",
        "workers": 2,
    }


def _write(tmp_path, tree, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(tree))
    return path


class TestLoading:
    def test_full_round_trip(self, tmp_path):
        cfg = load_config(_write(tmp_path, _base_tree()))
        assert cfg.suite.families == (Family.SPHERE, Family.RASTRIGIN)
        assert cfg.suite.dimension == 2
        assert cfg.policy.lam == 6
        assert cfg.policy.hidden_size == 8
        assert cfg.ga.population_size == 8
        assert cfg.fe_max == 60
        assert cfg.tolerance == 0.05
        assert cfg.runs_per_task == 2
        assert cfg.master_seed == 3
        assert cfg.workers == 2

    def test_defaults_when_sections_omitted(self, tmp_path):
        cfg = load_config(_write(tmp_path, {"suite": {"families": ["sphere"]}}))
        assert cfg.policy.lam == 10
        assert cfg.ga.population_size == 512
        assert cfg.fe_max is None
        assert cfg.tolerance == 1e-3
        assert cfg.runs_per_task == 5
        assert cfg.workers is None

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(ConfigError, match="no_such.yaml"):
            load_config(tmp_path / "no_such.yaml")

    def test_non_mapping_root(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("- just\n- a list\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(path)

    def test_suite_build_matches_spec(self, tmp_path):
        cfg = load_config(_write(tmp_path, _base_tree()))
        suite = cfg.suite.build()
        assert len(suite) == 20
        assert len(suite.train_tasks) == 10
        assert len(suite.test_tasks) == 6


class TestValidation:
    def test_unknown_top_level_key(self):
        tree = _base_tree()
        tree["budget"] = 3
        with pytest.raises(ConfigError, match="'budget'"):
            config_from_mapping(tree)

    def test_unknown_nested_key(self):
        tree = _base_tree()
        tree["ga"]["mutation_rate"] = 0.5
        with pytest.raises(ConfigError, match="ga.*mutation_rate"):
            config_from_mapping(tree)

    def test_type_error_names_field(self):
        tree = _base_tree()
        tree["suite"]["dimension"] = "two"
        with pytest.raises(ConfigError, match="suite.dimension"):
            config_from_mapping(tree)

    def test_bool_is_not_an_integer(self):
        tree = _base_tree()
        tree["master_seed"] = True
        with pytest.raises(ConfigError, match="master_seed"):
            config_from_mapping(tree)

    def test_unknown_family_lists_valid_names(self):
        tree = _base_tree()
        tree["suite"]["families"] = ["ackley"]
        with pytest.raises(ConfigError, match="linear-slope"):
            config_from_mapping(tree)

    def test_budget_below_lambda(self):
        tree = _base_tree()
        tree["episode"]["fe_max"] = 5
        with pytest.raises(ConfigError, match="fe_max"):
            config_from_mapping(tree)

    def test_default_budget_checked_against_lambda(self):
        tree = _base_tree()
        del tree["episode"]["fe_max"]
        tree["policy"]["lambda"] = 300
        with pytest.raises(ConfigError, match="fe_max"):
            config_from_mapping(tree)

    def test_ga_cross_field_wrapped(self):
        tree = _base_tree()
        tree["ga"]["n_elites"] = 99
        with pytest.raises(ConfigError, match="ga"):
            config_from_mapping(tree)

    def test_split_ratio_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="split_ratio"):
            SuiteSpec((Family.SPHERE,), 2, 10, (0.5, 0.5, 0.5))

    def test_requires_suite_section(self):
        with pytest.raises(ConfigError, match="suite"):
            config_from_mapping({"master_seed": 1})


class TestOverrides:
    def test_set_nested_value(self, tmp_path):
        cfg = load_config(_write(tmp_path, _base_tree()), ("ga.generations=0",))
        assert cfg.ga.generations == 0

    def test_later_override_wins(self, tmp_path):
        cfg = load_config(
            _write(tmp_path, _base_tree()), ("master_seed=1", "master_seed=9")
        )
        assert cfg.master_seed == 9

    def test_creates_missing_section(self):
        tree = {"suite": {"families": ["sphere"]}}
        apply_override(tree, "episode.fe_max=40")
        assert tree["episode"]["fe_max"] == 40

    def test_typed_parsing(self):
        tree = {}
        apply_override(tree, "episode.tolerance=1e-2")
        assert tree["episode"]["tolerance"] == 0.01

    def test_malformed_assignment(self):
        with pytest.raises(ConfigError, match="dotted.key=value"):
            apply_override({}, "no_equals_sign")

    def test_override_through_scalar_fails(self):
        with pytest.raises(ConfigError, match="not a section"):
            apply_override({"ga": 3}, "ga.generations=1")


class TestHashing:
    def test_execution_fields_excluded(self):
        a = config_from_mapping(_base_tree())
        tree = _base_tree()
        tree["workers"] = 7
        tree["output_dir"] = "elsewhere"
        b = config_from_mapping(tree)
        assert config_hash(a) == config_hash(b)
        assert "workers" not in canonical_mapping(a)
        assert "output_dir" not in canonical_mapping(a)

    def test_numeric_fields_included(self):
        a = config_from_mapping(_base_tree())
        for key, value in (("master_seed", 99), ("runs_per_task", 3)):
            tree = _base_tree()
            tree[key] = value
            assert config_hash(config_from_mapping(tree)) != config_hash(a)

    def test_stable_across_yaml_key_order(self, tmp_path):
        tree = _base_tree()
        reordered = dict(reversed(list(tree.items())))
        h1 = config_hash(load_config(_write(tmp_path, tree, "a.yaml")))
        h2 = config_hash(load_config(_write(tmp_path, reordered, "b.yaml")))
        assert h1 == h2
        assert len(h1) == 64


class TestDerivedSettings:
    def test_episode_config_uses_policy_lambda(self):
        cfg = config_from_mapping(_base_tree())
        ep = cfg.episode_config()
        assert ep.lam == 6
        assert ep.fe_max == 60
        assert ep.tolerance == 0.05

    def test_targets_end_at_tolerance(self):
        cfg = config_from_mapping(_base_tree())
        ts = cfg.targets()
        assert ts.tolerance == pytest.approx(0.05)
        assert ts.precisions[0] == pytest.approx(100.0)

    def test_direct_construction_validates(self):
        with pytest.raises(ConfigError, match="runs_per_task"):
            RunConfig(suite=SuiteSpec((Family.SPHERE,), 2, 10), runs_per_task=0)
