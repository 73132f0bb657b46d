import json
from pathlib import Path

import numpy as np
import pytest

from asip import cli
from asip.bench import SuiteResult
from asip.render import read_ppm
from asip.world import GridSpec, ReferenceMap, grid_to_text, reference_to_text

SMALL = """
[scenario]
config_ids = [1]
boundary = [6.0, 6.0]
component_range = [0, 0]
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return str(p)


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_parse_seeds():
    assert cli.parse_seeds("0-3") == [0, 1, 2, 3]
    assert cli.parse_seeds("5,0,2-3,2") == [0, 2, 3, 5]
    assert cli.parse_seeds("7") == [7]
    for bad in ("", "3-1", "a", "-2", "1,,2"):
        with pytest.raises(cli.UsageError):
            cli.parse_seeds(bad)


def test_usage_errors_exit_1(tmp_path, small_cfg, capsys):
    with pytest.raises(SystemExit) as exc:
        run("generate", "--out", tmp_path)
    assert exc.value.code == cli.EXIT_USAGE
    assert run("generate", "--out", tmp_path, "--seeds", "9-1") == cli.EXIT_USAGE
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario]\nno_such_key = 1\n")
    assert run("generate", "--config", bad, "--out", tmp_path, "--seeds", "0") == cli.EXIT_USAGE
    assert run("generate", "--config", tmp_path / "missing.toml", "--out", tmp_path, "--seeds", "0") == cli.EXIT_USAGE
    assert run("plan", "--scene", tmp_path / "nowhere", "--out", tmp_path / "p") == cli.EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_single_seed_generates_one_scene_per_config(tmp_path, small_cfg):
    out = tmp_path / "g"
    assert run("generate", "--config", small_cfg, "--out", out, "--seeds", "4") == cli.EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["c1_s4", "manifest.json"]
    assert {p.name for p in (out / "c1_s4").iterdir()} == {"reference.txt", "truth.txt", "scene.json"}


def test_infeasible_exit_2(tmp_path, small_cfg):
    crowded = tmp_path / "crowded.toml"
    crowded.write_text("[scenario]\nobstacle_count = 1\nobstacle_size_range = [5.0, 5.5]\n")
    code = run("generate", "--config", small_cfg, "--params", crowded, "--out", tmp_path / "g", "--seeds", "0")
    assert code == cli.EXIT_INFEASIBLE


def test_manifest_checksums_rerun_identical(tmp_path, small_cfg):
    for name in ("a", "b"):
        assert run("generate", "--config", small_cfg, "--out", tmp_path / name, "--seeds", "0-1") == cli.EXIT_OK
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["files"] == mb["files"]
    assert set(ma["files"]) == {f"c1_s{s}/{f}" for s in (0, 1) for f in ("reference.txt", "truth.txt", "scene.json")}
    for rel, digest in ma["files"].items():
        assert cli.sha256_file(tmp_path / "a" / rel) == digest


def test_boundary_only_pipeline(tmp_path, small_cfg):
    assert run("generate", "--config", small_cfg, "--out", tmp_path / "g", "--seeds", "0") == 0
    scene = tmp_path / "g" / "c1_s0"
    assert run("plan", "--config", small_cfg, "--scene", scene, "--out", tmp_path / "p") == 0
    plan = json.loads((tmp_path / "p" / "plan.json").read_text())
    diag = json.loads((tmp_path / "p" / "diagnostics.json").read_text())
    # four walls, four coherent clusters
    assert diag["segments"] == 4 and diag["clusters"] == 4
    assert len(plan["clusters"]) == 4

    results = []
    for name in ("s1", "s2"):
        code = run("simulate", "--config", small_cfg, "--scene", scene, "--plan", tmp_path / "p" / "plan.json",
                   "--adaptation", "off", "--out", tmp_path / name)
        assert code == 0
        results.append((tmp_path / name / "result.json").read_bytes())
    assert results[0] == results[1]
    res = json.loads(results[0])
    assert res["coverage"] >= 99.0

    assert run("render", "--scene", scene, "--result", tmp_path / "s1" / "result.json", "--scale", 2,
               "--out", tmp_path / "r") == 0
    img = read_ppm((tmp_path / "r" / "render_0.ppm").read_bytes())
    assert img.shape == (120, 120, 3)


def _write_scene(root: Path, ref: ReferenceMap):
    root.mkdir(parents=True)
    (root / "reference.txt").write_text(reference_to_text(ref))
    (root / "truth.txt").write_text(grid_to_text(ref.as_grid()))
    (root / "scene.json").write_text(json.dumps({"start": [1.0, 1.0]}))


def test_empty_map_plans_empty_with_warning(tmp_path, capsys):
    spec = GridSpec(0.1, 20, 20)
    _write_scene(tmp_path / "empty", ReferenceMap.from_structure(spec, np.zeros(spec.shape, bool), start=(1.0, 1.0)))
    assert run("plan", "--scene", tmp_path / "empty", "--out", tmp_path / "p") == cli.EXIT_OK
    assert "empty plan" in capsys.readouterr().err
    plan = json.loads((tmp_path / "p" / "plan.json").read_text())
    assert plan["clusters"] == []


def test_benchmark_outputs_and_fault_exit(tmp_path, small_cfg, monkeypatch, capsys):
    out = tmp_path / "b"
    code = run("benchmark", "--config", small_cfg, "--out", out, "--seeds", "0", "--no-occlusion", "--format", "csv")
    assert code == cli.EXIT_OK
    printed = capsys.readouterr().out
    assert printed.splitlines()[0].startswith("config_id,seed,planner")
    lines = (out / "records.csv").read_text().splitlines()
    assert len(lines) == 3
    # timings are zeroed in files unless asked for
    col = lines[0].split(",").index("planning_time")
    assert all(float(line.split(",")[col]) == 0.0 for line in lines[1:])

    def faulty(*a, **k):
        return SuiteResult([], [], {}, [(("bench", 1, 0), "ours: collision")], [])

    monkeypatch.setattr(cli, "run_suite", faulty)
    assert run("benchmark", "--config", small_cfg, "--out", tmp_path / "f", "--seeds", "0") == cli.EXIT_INVARIANT
    assert "collision" in capsys.readouterr().err
