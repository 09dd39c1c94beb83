import json
import os
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from sempri.cli import EXIT_DATA, EXIT_USAGE, main
from sempri.io import load_saliency_map, parse_manifest, saliency_to_uint8
from sempri.metrics import evaluate_dataset, read_report_csv
from sempri.pipeline import PipelineConfig, SemanticPriorSaliency
from sempri.synth import write_dataset

FAST = {"n_segments": 60, "n_trees": 6, "max_depth": 8, "texton_samples": 4000}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "cfg.json").write_text(json.dumps(FAST))
    assert main(["synth", "--count", "10", "--seed", "1", "--out", str(root / "train")]) == 0
    assert main(["synth", "--count", "2", "--seed", "2", "--out", str(root / "test"), "--split", "test"]) == 0
    cfg = ["--config", str(root / "cfg.json"), "--jobs", "1"]
    assert main(["train", str(root / "train" / "manifest.tsv"), "--out", str(root / "art"), *cfg]) == 0
    return root, cfg


def test_train_artifacts(workspace):
    root, _ = workspace
    names = sorted(p.name for p in (root / "art").iterdir())
    assert names == ["forest.sprf", "priors.txt", "textons.txt", "training_log.json"]
    log = json.loads((root / "art" / "training_log.json").read_text())
    assert log["n_images"] == 10 and log["seed"] == 0 and "alpha_mean" in log and log["n_samples"] > 0
    SemanticPriorSaliency.load(root / "art", PipelineConfig(**FAST))


def test_train_bit_identical(workspace):
    root, cfg = workspace
    assert main(["train", str(root / "train" / "manifest.tsv"), "--out", str(root / "art2"), *cfg]) == 0
    assert (root / "art" / "forest.sprf").read_bytes() == (root / "art2" / "forest.sprf").read_bytes()
    assert (root / "art" / "priors.txt").read_bytes() == (root / "art2" / "priors.txt").read_bytes()


def test_infer_and_eval(workspace):
    root, cfg = workspace
    out = root / "maps"
    argv = ["infer", str(root / "test" / "manifest.tsv"), "--artifacts", str(root / "art"), "--out", str(out)]
    assert main([*argv, *cfg]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["scene_0000.png", "scene_0001.png"]
    with Image.open(out / "scene_0000.png") as im:
        assert im.size == (200, 150) and im.mode == "L"

    assert main(["eval", str(out), str(root / "test" / "manifest.tsv"), "--out", str(root / "r.csv")]) == 0
    report = read_report_csv(root / "r.csv")
    direct = evaluate_dataset(out, parse_manifest(root / "test" / "manifest.tsv"))
    assert report.n_images == 2
    assert report.mae == pytest.approx(direct.mae, rel=1e-8)


def test_intermediates_and_recomposition(workspace):
    root, cfg = workspace
    out = root / "maps_full"
    sp_dir = root / "sp"
    argv = ["infer", str(root / "test" / "manifest.tsv"), "--artifacts", str(root / "art"), "--out", str(out)]
    assert main([*argv, *cfg, "--save-intermediates", "--save-superpixels", str(sp_dir)]) == 0
    assert len(list(out.glob("scene_0000*.png"))) == 3
    assert (sp_dir / "scene_0000.png").is_file()

    est = SemanticPriorSaliency.load(root / "art", PipelineConfig(**FAST))
    entry = parse_manifest(root / "test" / "manifest.tsv").entries[0]
    from sempri.io import load_entry

    image, scores, _ = load_entry(entry)
    r = est.predict_components(image, scores)
    written = np.round(load_saliency_map(out / "scene_0000.png") * 255).astype(np.uint8)
    np.testing.assert_array_equal(written, saliency_to_uint8(r.fused))
    labels = np.asarray(Image.open(sp_dir / "scene_0000.png"))
    np.testing.assert_array_equal(labels, r.segmentation.labels)


def test_single_image_eval(tmp_path):
    write_dataset(tmp_path, 1, seed=4, split="test", shape=(20, 30))
    from sempri.io import load_mask, write_saliency_map

    m = parse_manifest(tmp_path / "manifest.tsv")
    (tmp_path / "maps").mkdir()
    write_saliency_map(load_mask(m.entries[0].mask).astype(float), tmp_path / "maps" / "scene_0000.png")
    assert main(["eval", str(tmp_path / "maps"), str(tmp_path / "manifest.tsv"), "--out", str(tmp_path / "r.csv")]) == 0
    r = read_report_csv(tmp_path / "r.csv")
    assert r.n_images == 1 and r.f_measure == 1.0 and r.mae == 0.0


def test_missing_map(workspace, capsys):
    root, _ = workspace
    (root / "empty_maps").mkdir()
    rc = main(["eval", str(root / "empty_maps"), str(root / "test" / "manifest.tsv"), "--out", str(root / "x.csv")])
    assert rc == EXIT_DATA
    assert "scene_0000" in capsys.readouterr().err


def test_empty_manifest(tmp_path):
    (tmp_path / "m.tsv").write_text("# split: train\n")
    assert main(["train", str(tmp_path / "m.tsv"), "--out", str(tmp_path / "a")]) == EXIT_DATA


def test_bad_entry_named(tmp_path, capsys):
    write_dataset(tmp_path, 2, seed=5, shape=(20, 30))
    (tmp_path / "scene_0001.spst").write_bytes(b"SPST")
    assert main(["train", str(tmp_path / "manifest.tsv"), "--out", str(tmp_path / "a")]) == EXIT_DATA
    assert "scene_0001.png" in capsys.readouterr().err


def test_missing_artifacts(workspace, tmp_path):
    root, _ = workspace
    argv = ["infer", str(root / "test" / "manifest.tsv"), "--artifacts", str(tmp_path), "--out", str(tmp_path / "o")]
    assert main(argv) == EXIT_DATA


def test_bad_config(workspace, tmp_path):
    root, _ = workspace
    (tmp_path / "c.json").write_text('{"n_tree": 3}')
    argv = ["train", str(root / "train" / "manifest.tsv"), "--out", str(tmp_path), "--config", str(tmp_path / "c.json")]
    assert main(argv) == EXIT_DATA


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["train"],
        ["synth", "--count", "x", "--out", "o"],
        ["synth", "--count", "1", "--out", "o", "--jobs", "0"],
    ],
)
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        rc = main(argv)
        raise SystemExit(rc)
    assert exc.value.code == EXIT_USAGE


def test_subprocess_entry_point(tmp_path):
    env = dict(os.environ, SEMPRI_LOG="DEBUG")
    proc = subprocess.run(
        [sys.executable, "-m", "sempri", "synth", "--count", "1", "--seed", "7", "--out", str(tmp_path / "s")],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(list((tmp_path / "s").iterdir())) == 4
    proc = subprocess.run([sys.executable, "-m", "sempri", "nope"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
