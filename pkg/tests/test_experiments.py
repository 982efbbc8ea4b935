import json
import math

import pytest

from salnav.errors import UnknownExperiment
from salnav.experiments import EXPERIMENTS, ExperimentConfig, localization_outcomes, run_experiment

SMALL = dict(queries=30, rooms=9, fov_rooms=9, scale_rooms=(4, 9), positioning_trials=20,
             nav_rooms=6, episodes=6)


def small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def test_unknown_experiment():
    with pytest.raises(UnknownExperiment):
        run_experiment("table-ix")


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"queries": 5, "bogus": 1})
    path = tmp_path / "cfg.json"
    path.write_text(small().to_json())
    assert ExperimentConfig.from_file(path) == small()


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(queries=0)
    with pytest.raises(ValueError):
        ExperimentConfig(workers=0)


def test_world_overrides_reach_spec():
    spec = small(world={"cell_size": 0.25, "door_cells": 5}).world_spec(4)
    assert spec.cell_size == 0.25 and spec.door_cells == 5 and spec.rooms == 4


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_every_experiment_runs(name, tmp_path):
    res = run_experiment(name, small(), out=tmp_path / "table.txt")
    assert res.name == name and res.rows
    assert (tmp_path / "table.txt").read_text() == res.table
    rows = [json.loads(ln) for ln in (tmp_path / "table.txt.jsonl").read_text().splitlines()]
    assert len(rows) == len(res.rows)


def test_positioning_recovery_is_exact():
    rep = run_experiment("positioning-recovery", small()).report
    assert rep.n_trials > 0 and rep.e_p < 1e-6 and rep.e_theta < 1e-6
    se3 = rep.breakdown["se3-centroids"]
    assert se3.e_p < 1e-6 and se3.e_theta < 1e-6


def test_headline_is_unperturbed():
    res = run_experiment("perturbation", small(conditions={"none": [], "drop66": ["drop:0.66"]}))
    assert res.report.acc == res.report.breakdown["none"].acc
    assert res.report.acc >= res.report.breakdown["drop66"].acc
    assert not math.isnan(res.report.sr)


def test_parallel_matches_serial():
    a = localization_outcomes(small(), 9)
    b = localization_outcomes(small(workers=2), 9)
    assert a == b
    r1 = run_experiment("navigation", small(conditions={"none": []}))
    r2 = run_experiment("navigation", small(conditions={"none": []}, workers=2))
    assert r1.rows == r2.rows


def test_seed_changes_corpus():
    assert localization_outcomes(small(seed=1), 9) != localization_outcomes(small(seed=2), 9)
