import numpy as np
import pytest

from sempri.exceptions import DataError
from sempri.explicit import ExplicitPriors
from sempri.io import load_image, load_mask, load_score_tensor, parse_manifest
from sempri.semantics import argmax_labels
from sempri.synth import default_palette, generate_scenes, make_scene, write_dataset


def test_deterministic_files(tmp_path):
    write_dataset(tmp_path / "a", 1, seed=7)
    write_dataset(tmp_path / "b", 1, seed=7)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(names) == 4
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_scene_independent_of_count():
    a = list(generate_scenes(3, seed=5, shape=(30, 40)))
    b = list(generate_scenes(5, seed=5, shape=(30, 40)))
    np.testing.assert_array_equal(a[2].image, b[2].image)


def test_argmax_equals_layout():
    for scene in generate_scenes(5, seed=1, shape=(40, 50)):
        np.testing.assert_array_equal(argmax_labels(scene.scores), scene.layout)
        assert np.allclose(scene.scores.sum(-1), 1, atol=1e-6)
        assert scene.scores.max() == np.float32(0.9)


def test_preference_rule():
    for scene in generate_scenes(8, seed=2, n_classes=6, shape=(40, 50)):
        objects = set(np.unique(scene.layout).tolist()) - {0}
        assert scene.salient_class == max(objects)
        np.testing.assert_array_equal(scene.mask, scene.layout == scene.salient_class)


def test_written_dataset_loads(tmp_path):
    write_dataset(tmp_path, 2, seed=3, n_classes=4, split="test", shape=(30, 40))
    m = parse_manifest(tmp_path / "manifest.tsv")
    assert m.split == "test" and len(m) == 2
    e = m.entries[1]
    assert load_image(e.image).shape == (30, 40, 3)
    assert load_score_tensor(e.tensor).shape == (30, 40, 4)
    assert load_mask(e.mask).any()


def test_palette():
    assert default_palette(21) == (1, 7, 14, 20)
    assert default_palette(3) == (1, 2)
    rng = np.random.default_rng(0)
    scene = make_scene(rng, n_classes=5, shape=(30, 30), palette=(2,))
    assert set(np.unique(scene.layout)) <= {0, 2}
    with pytest.raises(DataError):
        make_scene(rng, n_classes=5, palette=(5,))
    with pytest.raises(DataError):
        make_scene(rng, n_classes=1)
    with pytest.raises(DataError):
        list(generate_scenes(0, seed=1))


def test_planted_preference_recovered():
    scenes = list(generate_scenes(50, seed=4, n_classes=6, shape=(40, 50), palette=(1, 2, 3, 4, 5)))
    sp = ExplicitPriors(6).fit([s.layout for s in scenes], [s.mask for s in scenes]).table_.sp
    for hi in range(1, 6):
        for lo in range(1, hi):
            if sp[hi, lo] or sp[lo, hi]:
                assert sp[hi, lo] > sp[lo, hi]
