import json

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sempri.exceptions import DataError
from sempri.fusion import fuse
from sempri.pipeline import PipelineConfig, SemanticPriorSaliency


def test_params_round_trip():
    est = SemanticPriorSaliency(n_trees=7, seed=3)
    params = est.get_params()
    assert params["n_trees"] == 7 and params["seed"] == 3 and params["n_classes"] == 21
    twin = clone(est)
    assert twin.get_params() == params
    assert est.set_params(n_segments=50).n_segments == 50


def test_not_fitted():
    with pytest.raises(NotFittedError):
        SemanticPriorSaliency().predict_one(np.zeros((4, 4, 3), np.uint8), np.full((4, 4, 21), 1 / 21))


def test_predict_shapes_and_recomposition(small_estimator, small_scenes):
    scene = small_scenes[0]
    r = small_estimator.predict_components(scene.image, scene.scores)
    for m in (r.explicit, r.implicit, r.fused):
        assert m.shape == scene.mask.shape and m.min() >= 0 and m.max() <= 1
    np.testing.assert_array_equal(r.fused, fuse(r.explicit, r.implicit))
    assert r.alpha == pytest.approx(r.implicit.mean())
    assert r.segmentation.labels.shape == scene.mask.shape


def test_predict_batch(small_estimator, small_scenes):
    out = small_estimator.predict([s.image for s in small_scenes[:2]], [s.scores for s in small_scenes[:2]])
    assert len(out) == 2
    np.testing.assert_array_equal(out[1], small_estimator.predict_one(small_scenes[1].image, small_scenes[1].scores))
    assert (
        0
        <= small_estimator.score(
            [s.image for s in small_scenes[:3]],
            [s.scores for s in small_scenes[:3]],
            [s.mask for s in small_scenes[:3]],
        )
        <= 1
    )


def test_training_summary(small_estimator):
    s = small_estimator.training_summary_
    assert s["n_images"] == 10 and 0 < s["n_salient"] < s["n_samples"]
    assert 0 <= s["alpha_min"] <= s["alpha_mean"] <= s["alpha_max"] <= 1


def test_save_load(tmp_path, small_estimator, small_scenes):
    cfg = PipelineConfig(n_segments=60, n_trees=8, max_depth=8)
    paths = small_estimator.save(tmp_path, cfg)
    assert sorted(p.name for p in paths.values()) == ["forest.sprf", "priors.txt", "textons.txt"]
    loaded = SemanticPriorSaliency.load(tmp_path, cfg)
    scene = small_scenes[4]
    np.testing.assert_array_equal(
        loaded.predict_one(scene.image, scene.scores), small_estimator.predict_one(scene.image, scene.scores)
    )


def test_load_missing_artifact(tmp_path):
    with pytest.raises(DataError, match="missing artifact"):
        SemanticPriorSaliency.load(tmp_path)


def test_load_class_mismatch(tmp_path, small_estimator):
    small_estimator.save(tmp_path)
    with pytest.raises(DataError, match="classes"):
        SemanticPriorSaliency.load(tmp_path, PipelineConfig(n_classes=5))


def test_fit_validation(small_scenes):
    s = small_scenes[0]
    with pytest.raises(DataError):
        SemanticPriorSaliency().fit([], [], [])
    with pytest.raises(DataError):
        SemanticPriorSaliency().fit([s.image], [s.scores], [])
    with pytest.raises(DataError):
        SemanticPriorSaliency(n_classes=5).fit([s.image], [s.scores], [s.mask])
    with pytest.raises(DataError):
        SemanticPriorSaliency().fit([s.image], [s.scores[:-1]], [s.mask])


def test_fit_deterministic(small_scenes):
    args = (
        [s.image for s in small_scenes[:4]],
        [s.scores for s in small_scenes[:4]],
        [s.mask for s in small_scenes[:4]],
    )
    kw = dict(n_segments=40, n_trees=3, texton_samples=2000, seed=5)
    a = SemanticPriorSaliency(**kw).fit(*args)
    b = SemanticPriorSaliency(**kw).fit(*args)
    assert a.forest_.to_bytes() == b.forest_.to_bytes()
    np.testing.assert_array_equal(a.textons_.centers_, b.textons_.centers_)


class TestConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert (cfg.n_classes, cfg.n_segments, cfg.n_trees, cfg.max_depth, cfg.min_leaf) == (21, 200, 200, 20, 5)
        assert cfg.epsilon == 1e-8 and cfg.n_textons == 15

    def test_json_round_trip(self, tmp_path):
        cfg = PipelineConfig(n_trees=9, seed=4)
        (tmp_path / "c.json").write_text(cfg.to_json())
        assert PipelineConfig.from_json(tmp_path / "c.json") == cfg

    def test_overrides(self):
        cfg = PipelineConfig().updated(seed=9, jobs=None)
        assert cfg.seed == 9 and cfg.jobs is None

    @pytest.mark.parametrize("payload", [{"bogus": 1}, {"n_trees": "many"}, {"n_trees": 0}, {"epsilon": -1}, [1, 2]])
    def test_rejects(self, tmp_path, payload):
        (tmp_path / "c.json").write_text(json.dumps(payload))
        with pytest.raises(DataError):
            PipelineConfig.from_json(tmp_path / "c.json")

    def test_estimator(self):
        est = PipelineConfig(n_trees=3, jobs=2).estimator()
        assert est.n_trees == 3 and est.n_jobs == 2
