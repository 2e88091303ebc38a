import json

import numpy as np
import pytest

from erwlab.cookie_env import CookieLaw, save_law
from erwlab.experiments import (DEFAULTS, EXPERIMENTS, ConfigError, ExperimentConfig,
                                first_passage_cdf, run_experiment)
from erwlab.stats import first_passage_survival

SMALL = {
    "THEOREM1": dict(law="delta_0.5", n=[400], replicas=500, params=dict(dt=1e-3, pbm_paths=500)),
    "THEOREM2": dict(n=[100, 1000], replicas=300),
    "DUAL": dict(n=[2], replicas=2000),
    "TAILS": dict(replicas=20_000, params=dict(fit_range=[10, 100], progeny_cap_generations=1000,
                                                cap_progeny=10**6)),
    "EATALL": dict(n=[20, 40], replicas=200),
    "RANGE": dict(n=[30], replicas=300),
    "QUADVAR": dict(n=[100, 1000], replicas=100),
    "BACKTRACK": dict(n=[1000], replicas=100),
    "FDD": dict(n=[100], replicas=500, params=dict(subordinator_samples=2000)),
    "PBM_SELF": dict(replicas=20),
}


def small(exp, **over):
    raw = {"experiment": exp, "seed": 5, **SMALL[exp], **over}
    return ExperimentConfig.from_dict(raw)


def test_every_experiment_has_small_settings():
    assert set(SMALL) == set(EXPERIMENTS) == set(DEFAULTS)


@pytest.mark.parametrize("exp", EXPERIMENTS)
def test_small_runs_write_reports(exp, tmp_path):
    rep = run_experiment(small(exp), out=tmp_path)
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["experiment"] == exp and s["checks"]
    assert s["passed"] == all(c["passed"] for c in s["checks"])
    assert s["failures"] == rep.failures
    # thresholds the run was judged against are recorded
    assert s["thresholds"] == dict(sorted(DEFAULTS[exp]["thresholds"].items()))
    assert any((tmp_path / "samples").iterdir())
    assert any(p.suffix == ".csv" for p in (tmp_path / "plots").iterdir())


@pytest.mark.parametrize("exp", ["THEOREM2", "FDD", "QUADVAR", "PBM_SELF"])
def test_summary_byte_identical_across_workers(exp, tmp_path):
    run_experiment(small(exp), out=tmp_path / "a")
    run_experiment(small(exp, workers=3), out=tmp_path / "b")
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes()
    for f in (tmp_path / "a" / "samples").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "samples" / f.name).read_bytes()


def test_single_replica(tmp_path):
    rep = run_experiment(small("THEOREM1", law="fair", replicas=1), out=tmp_path)
    assert rep.samples["erw_n400"].shape == (1,)


def test_defaults_and_overrides():
    cfg = ExperimentConfig.from_dict({"experiment": "THEOREM1", "thresholds": {"ks_normal": 0.5}})
    assert cfg.replicas == 100_000 and cfg.n == [10_000] and cfg.law.name == "fair"
    assert cfg.thresholds["ks_normal"] == 0.5 and cfg.thresholds["ks_pbm"] == 0.03


@pytest.mark.parametrize("raw", [
    {"experiment": "NOPE"},
    {"experiment": "THEOREM1", "n": [5]},
    {"experiment": "THEOREM1", "replicas": 0},
    {"experiment": "THEOREM1", "seed": -1},
    {"experiment": "THEOREM1", "bogus": 1},
    {"experiment": "THEOREM1", "thresholds": {"unknown": 1}},
    {"experiment": "THEOREM1", "law": "no_such_law"},
    {"experiment": "THEOREM1", "law": {"M": 1, "support": [{"probs": [1.0], "weight": 1.0}]}},
    {"experiment": "DUAL", "n": [7]},
    {"experiment": "THEOREM1", "n": "many"},
])
def test_config_errors(raw):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(raw)


def test_law_file_relative_to_config(tmp_path):
    save_law(CookieLaw.single(0.8), tmp_path / "law.json")
    (tmp_path / "c.json").write_text(json.dumps({"experiment": "RANGE", "law": "law.json"}))
    assert ExperimentConfig.load(tmp_path / "c.json").law.stacks[0].probs == (0.8,)


def test_wrong_delta_rejected():
    with pytest.raises(ConfigError):
        run_experiment(small("FDD", law="delta_0.5"))
    with pytest.raises(ConfigError):
        run_experiment(small("THEOREM1", law="delta_1"))


def test_first_passage_cdf():
    t = np.array([0.0, 0.5, 1.0, 10.0])
    assert np.allclose(first_passage_cdf(t), 1 - first_passage_survival(np.maximum(t, 1e-300)))
