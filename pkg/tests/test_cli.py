import json

import pytest

from salnav.cli import main, parse_noise
from salnav.scene import ObjectInstance, write_observation
from salnav.topomap import load_map


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    world = root / "world"
    assert main(["gen-world", "--seed", "4", "--out", str(world), "--queries", "3"]) == 0
    assert main(["build-map", "--world", str(world), "--out", str(root / "m.topo")]) == 0
    return root


def test_gen_world_outputs(built):
    world = built / "world"
    assert (world / "world.manifest").exists()
    assert sorted(p.name for p in (world / "queries").iterdir()) == ["q000.obs", "q001.obs", "q002.obs"]


def test_gen_world_with_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"rooms": 4}))
    assert main(["gen-world", "--spec", str(spec), "--seed", "1", "--out", str(tmp_path / "w")]) == 0
    assert (tmp_path / "w" / "rooms" / "r003.obs").exists()


def test_localize_and_pose(built, capsys):
    q = built / "world" / "queries" / "q000.obs"
    truth = q.read_text().splitlines()[0].split()[3]
    assert main(["localize", "--map", str(built / "m.topo"), "--obs", str(q)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == f"scene {truth}"
    assert out[1].startswith("score ") and out[2].startswith("candidates ")
    assert main(["pose", "--map", str(built / "m.topo"), "--obs", str(q)]) == 0
    out = capsys.readouterr().out
    assert "shift " in out and "orientation " in out and "determinate " in out


def test_localize_no_candidates_exits_2(built, tmp_path):
    obs = tmp_path / "odd.obs"
    write_observation(obs, [ObjectInstance("unicorn", (1.0, 0.0, 0.0), (1, 1, 1))])
    assert main(["localize", "--map", str(built / "m.topo"), "--obs", str(obs)]) == 2


def test_navigate(built, tmp_path, capsys):
    topo = load_map(built / "m.topo")
    a, b = topo.ids[0], topo.ids[3]
    trace = tmp_path / "trace.txt"
    args = ["navigate", "--map", str(built / "m.topo"), "--start", a, "--goal", b, "--seed", "0",
            "--trace", str(trace)]
    assert main(args) == 0
    assert capsys.readouterr().out.startswith("success path ")
    assert trace.read_text().startswith(f"# trace {a} -> {b}")


def test_navigate_requires_seed(built):
    assert main(["navigate", "--map", str(built / "m.topo"), "--start", "r000", "--goal", "r001"]) == 1


def test_bad_noise_spec_is_usage_error(built):
    args = ["navigate", "--map", str(built / "m.topo"), "--start", "r000", "--goal", "r001",
            "--seed", "0", "--noise", "melt:3"]
    assert main(args) == 1


def test_parse_noise():
    assert parse_noise("none") == ()
    assert [p.kind.value for p in parse_noise("orientation:10deg,drop:0.5")] == ["ORIENTATION", "OBJECT_DROP"]


def test_missing_files_exit_1(tmp_path):
    assert main(["build-map", "--world", str(tmp_path / "nope"), "--out", str(tmp_path / "m")]) == 1
    assert main(["localize", "--map", str(tmp_path / "nope.topo"), "--obs", "x.obs"]) == 1


def test_corrupt_map_exit_1(built, tmp_path):
    bad = tmp_path / "bad.topo"
    bad.write_text((built / "m.topo").read_text().replace("TOPOMAP v1", "TOPOMAP v7", 1))
    q = built / "world" / "queries" / "q000.obs"
    assert main(["localize", "--map", str(bad), "--obs", str(q)]) == 1


def test_evaluate(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"queries": 10, "rooms": 6, "positioning_trials": 5}))
    out = tmp_path / "table.txt"
    assert main(["evaluate", "--experiment", "positioning-recovery", "--config", str(cfg),
                 "--seed", "3", "--out", str(out)]) == 0
    assert "Positioning recovery" in capsys.readouterr().out
    assert out.exists() and (tmp_path / "table.txt.jsonl").exists()


def test_evaluate_unknown_experiment():
    assert main(["evaluate", "--experiment", "nope", "--seed", "0"]) == 1


def test_unknown_subcommand():
    assert main(["fly"]) == 1
