import json
import os

import numpy as np
import pytest

from crpshape.cli import main
from crpshape.dataset import read_descriptor_cache, read_manifest


FAMILIES = "ellipsoid:1,1,1;ellipsoid:1,1,1.6;ellipsoid:1,1,2.4"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthesize a small labeled mesh set and cache its descriptors once."""
    root = tmp_path_factory.mktemp("cli")
    mesh_dir = root / "meshes"
    cache = root / "cache.jsonl"
    code = main([
        "synth", "--out", str(mesh_dir), "--families", FAMILIES,
        "--per-class", "4", "--subdiv", "1", "--noise", "0.01", "--seed", "0",
    ])
    assert code == 0
    manifest = mesh_dir / "manifest.csv"
    code = main([
        "descriptors", "--mesh-dir", str(mesh_dir), "--manifest", str(manifest),
        "--cache", str(cache), "--kind", "gps", "--dim", "8",
    ])
    assert code == 0
    return {"root": root, "mesh_dir": mesh_dir, "manifest": manifest, "cache": cache}


def common_flags(ws):
    return [
        "--manifest", str(ws["manifest"]), "--cache", str(ws["cache"]),
        "--kind", "gps", "--dim", "8",
    ]


class TestSynth:
    def test_counts(self, workspace):
        files = [n for n in os.listdir(workspace["mesh_dir"]) if n.endswith(".off")]
        assert len(files) == 12
        assert len(read_manifest(workspace["manifest"])) == 12

    def test_three_by_thirty_default(self, tmp_path):
        out = tmp_path / "meshes90"
        assert main(["synth", "--out", str(out), "--per-class", "30", "--subdiv", "0"]) == 0
        files = [n for n in os.listdir(out) if n.endswith(".off")]
        assert len(files) == 90
        assert len(read_manifest(out / "manifest.csv")) == 90

    def test_synth_meshes_parse(self, workspace):
        from crpshape.mesh import parse_off, validate_mesh

        name, _ = read_manifest(workspace["manifest"])[0]
        with open(workspace["mesh_dir"] / name, encoding="utf-8") as handle:
            mesh = parse_off(handle, name=name)
        assert validate_mesh(mesh).closed


class TestDescriptors:
    def test_cache_lines_match_manifest(self, workspace):
        entries = read_descriptor_cache(workspace["cache"])
        assert len(entries) == 12
        descriptor, sha = next(iter(entries.values()))
        assert descriptor.kind == "gps" and descriptor.p == 8
        assert len(sha) == 64

    def test_rerun_is_idempotent_byte_for_byte(self, workspace):
        before = workspace["cache"].read_bytes()
        code = main([
            "descriptors", "--mesh-dir", str(workspace["mesh_dir"]),
            "--manifest", str(workspace["manifest"]),
            "--cache", str(workspace["cache"]), "--kind", "gps", "--dim", "8",
        ])
        assert code == 0
        assert workspace["cache"].read_bytes() == before

    def test_corrupt_mesh_isolated(self, tmp_path, capsys):
        mesh_dir = tmp_path / "meshes"
        mesh_dir.mkdir()
        good = "OFF\n4 4 0\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 2 3\n3 0 3 1\n3 1 3 2\n"
        (mesh_dir / "good.off").write_text(good)
        (mesh_dir / "bad.off").write_text("OFF\n3 1 0\n0 0 0\n")
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("good.off,a\nbad.off,b\n")
        cache = tmp_path / "cache.jsonl"
        code = main([
            "descriptors", "--mesh-dir", str(mesh_dir), "--manifest", str(manifest),
            "--cache", str(cache), "--kind", "shapedna", "--dim", "1",
        ])
        assert code == 2
        assert "bad.off" in capsys.readouterr().err
        assert set(read_descriptor_cache(cache)) == {"good.off"}


class TestCodeCommand:
    def test_exports_triplets_and_header(self, workspace):
        out = workspace["root"] / "coding.csv"
        code = main(["code", *common_flags(workspace), "--method", "nnls", "--out", str(out)])
        assert code == 0
        header = json.loads((workspace["root"] / "coding.csv.json").read_text())
        assert header["N"] == 12 and header["method"] == "nnls"
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "row,col,weight"
        assert all(float(line.split(",")[2]) >= 0 for line in lines[1:])


class TestTrainPredict:
    def test_train_then_predict_recovers_labels(self, workspace):
        bundle = workspace["root"] / "bundle"
        code = main([
            "train", *common_flags(workspace), "--method", "l2", "--d", "4",
            "--out", str(bundle),
        ])
        assert code == 0
        assert (bundle / "bundle.json").exists()
        assert (bundle / "projection.json").exists()
        out = workspace["root"] / "predictions.csv"
        code = main([
            "predict", "--bundle", str(bundle), *common_flags(workspace),
            "--out", str(out),
        ])
        assert code == 0
        rows = out.read_text().strip().splitlines()[1:]
        truth = dict(read_manifest(workspace["manifest"]))
        predicted = dict(row.split(",") for row in rows)
        assert predicted == truth  # separable training data memorized

    def test_bundle_reload_bit_identical(self, workspace):
        bundle = workspace["root"] / "bundle2"
        main(["train", *common_flags(workspace), "--method", "nnls", "--d", "3",
              "--out", str(bundle)])
        first = json.loads((bundle / "svm.json").read_text())
        main(["train", *common_flags(workspace), "--method", "nnls", "--d", "3",
              "--out", str(bundle)])
        assert json.loads((bundle / "svm.json").read_text()) == first

    def test_missing_cache_entry_is_data_error(self, workspace, tmp_path, capsys):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("ghost1.off,a\nghost2.off,a\nreal.off,b\nreal2.off,b\n")
        code = main([
            "train", "--manifest", str(manifest), "--cache", str(workspace["cache"]),
            "--kind", "gps", "--dim", "8", "--out", str(tmp_path / "bundle"),
        ])
        assert code == 2
        err = capsys.readouterr().err
        assert "ghost1.off" in err and "ghost2.off" in err


class TestEvaluateSweep:
    def test_report_consistent_with_runs_csv(self, workspace):
        out = workspace["root"] / "report.json"
        code = main([
            "evaluate", *common_flags(workspace), "--method", "l2", "--d", "3",
            "--train-fraction", "0.5", "--repetitions", "4", "--seed", "1",
            "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        csv_rows = (workspace["root"] / "report.json.runs.csv").read_text().strip().splitlines()[1:]
        accuracies = [float(row.split(",")[1]) for row in csv_rows]
        assert len(accuracies) == 4
        assert report["meanAccuracy"] == pytest.approx(float(np.mean(accuracies)), abs=1e-15)
        assert report["config"]["protocol"]["repetitions"] == 4

    def test_sweep_row_count(self, workspace):
        out = workspace["root"] / "sweep.csv"
        code = main([
            "sweep-dim", *common_flags(workspace), "--method", "l2",
            "--train-fraction", "0.5", "--repetitions", "2", "--dims", "1,2,4",
            "--out", str(out),
        ])
        assert code == 0
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "d,meanAccuracy,stdAccuracy"
        assert len(rows) == 4


class TestManifestCommand:
    def test_consecutive_manifest(self, tmp_path):
        mesh_dir = tmp_path / "meshes"
        mesh_dir.mkdir()
        for i in range(1, 7):
            (mesh_dir / f"T{i}.off").write_text("OFF\n0 0 0\n")
        out = tmp_path / "manifest.csv"
        code = main(["manifest", "--mesh-dir", str(mesh_dir), "--consecutive", "3",
                     "--out", str(out)])
        assert code == 0
        rows = read_manifest(out)
        assert [label for _, label in rows] == ["class000"] * 3 + ["class001"] * 3


class TestConfigAndExitCodes:
    def test_config_file_with_flag_override(self, workspace, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text(
            "[paths]\n"
            f"manifest = {workspace['manifest']}\n"
            f"cache = {workspace['cache']}\n"
            "[descriptor]\nkind = gps\np = 8\n"
            "[coding]\nmethod = l2\n"
            "[projection]\nd = 2\n"
            "[protocol]\nrepetitions = 2\ntrain_fraction = 0.5\n"
        )
        out = tmp_path / "report.json"
        code = main(["evaluate", "--config", str(config), "--d", "3", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["config"]["d"] == 3  # flag wins over file

    def test_usage_error_exit_code(self, capsys):
        assert main(["evaluate", "--no-such-flag"]) == 1
        assert main(["descriptors"]) == 1  # missing required settings

    def test_unknown_config_key_is_usage_error(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("[descriptor]\nbogus = 1\n")
        assert main(["evaluate", "--config", str(config), "--out", "x.json"]) == 1

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        assert main([
            "evaluate", "--manifest", str(tmp_path / "none.csv"),
            "--cache", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "r.json"),
        ]) == 2
