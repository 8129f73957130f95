import json
from pathlib import Path

import pytest

from maskboost.cli import main

from .synth import build_run


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_synth")
    manifest, fss_dir, episodes = build_run(root, n=20, seed=5)
    return {"root": root, "manifest": str(manifest), "fss_dir": str(fss_dir)}


def run_args(synth, out, extra=()):
    return [
        "--manifest", synth["manifest"],
        "--fold", "0",
        "--seed", "5",
        "--n-episodes", "20",
        "--fss-dir", synth["fss_dir"],
        "--out", str(out),
        *extra,
    ]


def test_run_command(synth, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", *run_args(synth, out, ["--backend", "mock:identity"])])
    assert code == 0
    printed = capsys.readouterr().out
    assert "episodes 20" in printed
    assert "report.json" in printed
    assert (out / "report.json").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["final"] == report["base"]


def test_run_respects_threshold_flag(synth, tmp_path):
    out = tmp_path / "out"
    code = main(
        ["run", *run_args(synth, out, ["--backend", "mock:gt", "--threshold", "0.25"])]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["threshold"] == 0.25


def test_config_file_with_flag_override(synth, tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "manifest": synth["manifest"],
                "fold": 0,
                "seed": 5,
                "n_episodes": 20,
                "fss_dir": synth["fss_dir"],
                "backend": "mock:gt",
                "threshold": 0.75,
                "out": str(tmp_path / "out"),
            }
        )
    )
    code = main(["run", "--config", str(config_path), "--threshold", "0.5"])
    assert code == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["threshold"] == 0.5  # flag beat the file value
    assert report["config"]["backend"] == "mock:gt"  # file value kept


def test_gen_prompts_command(synth, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(
        ["gen-prompts", *run_args(synth, out, ["--prompt-mode", "mixed"])]
    )
    assert code == 0
    assert "prompt records" in capsys.readouterr().out
    lines = (out / "prompts.jsonl").read_text().splitlines()
    assert len(lines) == 20
    promptful = [json.loads(l) for l in lines if json.loads(l)["prompts"]]
    assert all(r["prompts"]["mode"] == "mixed" for r in promptful)


def test_sweep_command_custom_grid(synth, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(
        [
            "sweep",
            *run_args(synth, out, ["--backend", "mock:dilate:1"]),
            "--thresholds", "0,0.5,1",
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert printed.count("T=") == 3
    sweep = json.loads((out / "sweep.json").read_text())
    assert sweep["thresholds"] == [0.0, 0.5, 1.0]


def test_ablate_command(synth, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["ablate-prompts", *run_args(synth, out)])
    assert code == 0
    assert capsys.readouterr().out.count("mode=") == 3
    assert (out / "ablation.json").exists()


def test_validate_manifest_command(synth, capsys):
    code = main(["validate-manifest", "--manifest", synth["manifest"]])
    assert code == 0
    assert "manifest ok" in capsys.readouterr().out


def test_validate_manifest_missing_masks(tmp_path, capsys):
    manifest = {
        "name": "custom",
        "class_count": 4,
        "entries": [
            {"image_ref": "i.jpg", "gt_mask_ref": "gt/missing.png", "class_id": 1}
        ],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    code = main(["validate-manifest", "--manifest", str(path)])
    assert code == 1
    assert "missing" in capsys.readouterr().err


def test_bad_backend_is_usage_error(synth, tmp_path, capsys):
    code = main(["run", *run_args(synth, tmp_path / "o", ["--backend", "psychic"])])
    assert code == 2
    assert "backend" in capsys.readouterr().err


def test_bad_threshold_list_is_usage_error(synth, tmp_path, capsys):
    code = main(
        ["sweep", *run_args(synth, tmp_path / "o"), "--thresholds", "a,b"]
    )
    assert code == 2


def test_missing_inputs_is_usage_error(tmp_path, capsys):
    code = main(["run", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "manifest" in capsys.readouterr().err


def test_pipeline_failure_exit_code(synth, tmp_path, capsys):
    code = main(
        ["run", *run_args(synth, tmp_path / "o", ["--fss-dir", str(tmp_path / "empty")])]
    )
    assert code == 1
    assert "no coarse mask" in capsys.readouterr().err


def test_no_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_module_invocation_help():
    import subprocess
    import sys

    result = subprocess.run(
        [sys.executable, "-m", "maskboost.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "gen-prompts" in result.stdout
    assert "validate-manifest" in result.stdout
