"""The experiment runner and the command line interface."""

import csv
import json
import math

import numpy as np
import pytest

from shiftopt import UtilityStream, ValidationError
from shiftopt.bench import RunConfig, resolve_algorithm, run
from shiftopt.cli import main

BASE_CONFIG = {
    "stream": {"generator": "counterexample"},
    "algorithms": [
        {"name": "exponential", "preset": {"kind": "static"}},
        {"name": "fixed_share", "preset": {"kind": "shifted", "s": 2}},
    ],
    "horizons": [16, 32],
    "replicates": 2,
    "master_seed": 77,
    "baselines": {"s": 2},
    "beta": 0.5,
}


class TestRunConfig:
    def test_field_level_messages(self):
        with pytest.raises(ValidationError, match="stream"):
            RunConfig.from_dict({"algorithms": [], "horizons": [4]})
        with pytest.raises(ValidationError, match="algorithms"):
            RunConfig.from_dict({"stream": {"generator": "counterexample"},
                                 "algorithms": [], "horizons": [4]})
        with pytest.raises(ValidationError, match="horizons"):
            RunConfig.from_dict({"stream": {"generator": "counterexample"},
                                 "algorithms": [{"name": "exponential",
                                                 "preset": {"kind": "static"}}],
                                 "horizons": []})
        with pytest.raises(ValidationError, match="duplicate"):
            RunConfig.from_dict({
                "stream": {"generator": "counterexample"},
                "algorithms": [{"name": "exponential"}, {"name": "exponential"}],
                "horizons": [4],
            })

    def test_resolves_presets(self):
        label, name, cfg = resolve_algorithm(
            {"name": "generalized_share", "preset": {"kind": "sparse", "s": 4, "m": 2}},
            100, 1.0, 0.5)
        assert label == "generalized_share"
        assert cfg.alpha == pytest.approx(0.04)
        assert cfg.gamma == pytest.approx(0.02)

    def test_params_override(self):
        _, _, cfg = resolve_algorithm(
            {"name": "fixed_share", "preset": {"kind": "shifted", "s": 2},
             "params": {"alpha": 0.125}}, 64, 1.0, 0.5)
        assert cfg.alpha == 0.125


class TestRunDeterminism:
    def test_identical_artifacts(self, tmp_path):
        cfg = RunConfig.from_dict(BASE_CONFIG)
        a = run(cfg, out_dir=tmp_path / "a")
        b = run(cfg, out_dir=tmp_path / "b")
        assert (tmp_path / "a" / "rounds.csv").read_bytes() == \
            (tmp_path / "b" / "rounds.csv").read_bytes()
        assert (tmp_path / "a" / "summary.json").read_bytes() == \
            (tmp_path / "b" / "summary.json").read_bytes()

    def test_seed_changes_random_algorithms(self):
        data = dict(BASE_CONFIG)
        data["algorithms"] = [{"name": "random_restart",
                               "preset": {"kind": "shifted", "s": 2}}]
        a = run(RunConfig.from_dict({**data, "master_seed": 1}))
        b = run(RunConfig.from_dict({**data, "master_seed": 2}))
        assert a.rounds_csv() != b.rounds_csv()

    def test_adding_algorithm_keeps_other_draws(self):
        base = dict(BASE_CONFIG)
        base["algorithms"] = [{"name": "random_restart",
                               "preset": {"kind": "shifted", "s": 2}}]
        solo = run(RunConfig.from_dict(base))
        both = dict(BASE_CONFIG)
        both["algorithms"] = base["algorithms"] + [
            {"name": "exponential", "preset": {"kind": "static"}}]
        paired = run(RunConfig.from_dict(both))
        for t_solo, t_both in zip(solo.tasks, paired.tasks):
            assert (t_solo["algorithms"]["random_restart"]["expected"]
                    == t_both["algorithms"]["random_restart"]["expected"])


class TestAggregation:
    def test_matches_recomputation_from_rows(self, tmp_path):
        cfg = RunConfig.from_dict(BASE_CONFIG)
        artifact = run(cfg, out_dir=tmp_path)
        with open(tmp_path / "rounds.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        summary = json.loads((tmp_path / "summary.json").read_text())
        for label in ("exponential", "fixed_share"):
            for T in (16, 32):
                finals = [float(r["avg_regret"]) for r in rows
                          if r["algorithm"] == label and int(r["T"]) == T
                          and int(r["t"]) == T]
                got = summary["aggregates"][label][str(T)]
                assert got["mean_avg_regret"] == pytest.approx(np.mean(finals), abs=1e-12)
                want_se = (np.std(finals, ddof=1) / math.sqrt(len(finals))
                           if len(finals) > 1 else 0.0)
                assert got["stderr_avg_regret"] == pytest.approx(want_se, abs=1e-12)
                assert got["replicates"] == 2

    def test_sweep_shape(self):
        artifact = run(RunConfig.from_dict({
            "stream": {"generator": "random", "params": {"K": 2}},
            "algorithms": [{"name": "fixed_share", "preset": {"kind": "shifted", "s": 1}}],
            "horizons": [8, 16, 24],
            "replicates": 1,
            "baselines": {"s": 1},
        }))
        agg = artifact.aggregates()["fixed_share"]
        assert sorted(agg) == ["16", "24", "8"]

    def test_resolved_parameters_embedded(self):
        artifact = run(RunConfig.from_dict(BASE_CONFIG))
        resolved = artifact.aggregates()["fixed_share"]["32"]["resolved"]
        assert resolved["alpha"] == pytest.approx(2 / 32)
        assert 0 < resolved["lam"] <= 1.0

    def test_curves_match_rows(self, tmp_path):
        cfg = RunConfig.from_dict(BASE_CONFIG)
        artifact = run(cfg, out_dir=tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        with open(tmp_path / "rounds.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        curve = summary["curves"]["fixed_share"]["16"]
        for t in (1, 8, 16):
            vals = [float(r["avg_regret"]) for r in rows
                    if r["algorithm"] == "fixed_share" and int(r["T"]) == 16
                    and int(r["t"]) == t]
            assert curve["mean_avg_regret"][t - 1] == pytest.approx(
                np.mean(vals), abs=1e-12)

    def test_adaptive_baseline_recorded(self):
        artifact = run(RunConfig.from_dict({
            **BASE_CONFIG, "horizons": [16],
            "baselines": {"s": 2, "tau": 8},
        }))
        entry = artifact.tasks[0]["algorithms"]["exponential"]
        assert entry["adaptive_regret"] >= -1e-9

    def test_top_decile_recorded(self):
        artifact = run(RunConfig.from_dict({
            **BASE_CONFIG, "horizons": [12], "replicates": 1,
            "record_top_decile": True,
        }))
        entry = artifact.tasks[0]["algorithms"]["fixed_share"]
        counts = entry["top_decile"]["counts"]
        assert sum(counts) >= 12  # every round marks at least one piece

    def test_parallel_matches_serial(self, tmp_path):
        cfg_serial = RunConfig.from_dict(BASE_CONFIG)
        cfg_parallel = RunConfig.from_dict({**BASE_CONFIG, "jobs": 2})
        a = run(cfg_serial, out_dir=tmp_path / "serial")
        b = run(cfg_parallel, out_dir=tmp_path / "parallel")
        assert (tmp_path / "serial" / "rounds.csv").read_bytes() == \
            (tmp_path / "parallel" / "rounds.csv").read_bytes()


class TestStreamFileInput:
    def test_run_from_file(self, tmp_path):
        rc = main(["gen", "counterexample", "--param", "T=32",
                   "--out", str(tmp_path / "stream.json")])
        assert rc == 0
        config = {**BASE_CONFIG,
                  "stream": {"file": str(tmp_path / "stream.json")},
                  "horizons": [16, 32]}
        artifact = run(RunConfig.from_dict(config))
        assert len(artifact.tasks) == 4

    def test_too_short_file(self, tmp_path):
        main(["gen", "counterexample", "--param", "T=8",
              "--out", str(tmp_path / "stream.json")])
        config = {**BASE_CONFIG, "stream": {"file": str(tmp_path / "stream.json")},
                  "horizons": [16]}
        with pytest.raises(ValidationError):
            run(RunConfig.from_dict(config))


class TestCli:
    def test_gen_counterexample(self, tmp_path):
        out = tmp_path / "ce.json"
        assert main(["gen", "counterexample", "--param", "T=100", "--out", str(out)]) == 0
        stream = UtilityStream.load(out)
        assert len(stream) == 100

    def test_gen_lower_bound_with_profile(self, tmp_path):
        out = tmp_path / "lb.json"
        rc = main(["gen", "lower_bound", "--param", "T=512", "--param", "s=4",
                   "--param", "beta=0.6", "--seed", "3", "--out", str(out)])
        assert rc == 0
        stream = UtilityStream.load(out)
        assert stream.declared_beta == 0.6
        assert len(stream) == 512

    def test_gen_boundary_beta_rejected(self, tmp_path):
        T, s = 512, 4
        boundary = math.log(3 * s) / math.log(T)
        rc = main(["gen", "lower_bound", "--param", "T=512", "--param", "s=4",
                   "--param", f"beta={boundary}", "--out", str(tmp_path / "x.json")])
        assert rc == 1

    def test_verify_suite_passes(self):
        assert main(["verify", "oracles"]) == 0

    def test_unknown_suite_is_usage_error(self):
        assert main(["verify", "nonesuch"]) == 1

    def test_run_subcommand(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({**BASE_CONFIG, "horizons": [8]}))
        rc = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "rounds.csv").exists()
        assert (tmp_path / "out" / "summary.json").exists()

    def test_bad_config_validation_exit(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({"stream": {}, "algorithms": [], "horizons": []}))
        assert main(["run", "--config", str(cfg_path)]) == 1

    def test_budget_exit_code(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({
            "stream": {"generator": "random", "params": {"K": 3}},
            "algorithms": [{"name": "exponential", "preset": {"kind": "static"}}],
            "horizons": [40],
            "replicates": 1,
            "baselines": {"s": 6, "m": 5},
        }))
        assert main(["run", "--config", str(cfg_path),
                     "--out", str(tmp_path / "out")]) == 3
