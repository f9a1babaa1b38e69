import numpy as np
import pytest
from sklearn.metrics import f1_score, roc_auc_score

import cjcrf

EYES = (6, 12)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cjcrf")
    data = root / "data"
    cjcrf.synth(data, n=20, aus=4, seed=3, image_size=64)
    model = cjcrf.train(data, root / "model.json", stages=2, hidden=8, epochs=20,
                        augmentations=2, seed=1)
    return root, data, model


def test_generate_schema():
    samples = cjcrf.generate(3, aus=5, seed=2, image_size=48)
    assert len(samples) == 3
    s = samples[0]
    assert s["image"].shape == (48, 48)
    assert s["shape"].shape == (28, 2)
    assert len(s["labels"]) == 5
    assert set(s["labels"]) <= {0, 1}
    assert 0.0 <= s["image"].min() and s["image"].max() <= 1.0


def test_generate_is_deterministic():
    a = cjcrf.generate(2, seed=9, image_size=48)
    b = cjcrf.generate(2, seed=9, image_size=48)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x["image"], y["image"])
        np.testing.assert_array_equal(x["shape"], y["shape"])


def test_model_round_trip_and_detect(trained, tmp_path):
    root, data, model = trained
    assert model.variant == "full"
    assert model.stages == 2
    loaded = cjcrf.Model.load(root / "model.json")
    sample = cjcrf.generate(1, aus=4, seed=77, image_size=64)[0]
    shape, probs, labels = loaded.detect(sample["image"], sample["box"])
    assert shape.shape == (28, 2)
    assert np.all((probs >= 0) & (probs <= 1))
    assert list(labels) == [int(p >= 0.5) for p in probs]
    again = model.detect(sample["image"], sample["box"])
    np.testing.assert_array_equal(shape, again[0])


def test_evaluate_model_reports_stage_trace(trained):
    _, data, model = trained
    report = cjcrf.evaluate_model(model, data)
    assert report["samples"] == 20
    assert len(report["per_stage_error"]) == 3
    assert report["mean_normalized_error"] < report["baseline_error"]


def test_metrics_match_sklearn():
    rng = np.random.default_rng(0)
    probs = rng.random((40, 3))
    labels = (rng.random((40, 3)) < 0.4).astype(int)
    per_f1, _ = cjcrf.f1_scores(list(probs), labels.tolist(), 0.5)
    per_auc, weighted = cjcrf.auc_scores(list(probs), labels.tolist())
    for i in range(3):
        assert per_f1[i] == pytest.approx(f1_score(labels[:, i], probs[:, i] >= 0.5), abs=1e-12)
        assert per_auc[i] == pytest.approx(roc_auc_score(labels[:, i], probs[:, i]), abs=1e-12)
    assert min(per_auc) <= weighted <= max(per_auc)


def test_normalized_error_similarity_invariance():
    rng = np.random.default_rng(1)
    gt = rng.random((28, 2)) * 100
    pred = gt + rng.normal(scale=2.0, size=gt.shape)
    c, s = np.cos(0.3), np.sin(0.3)
    rot = np.array([[c, -s], [s, c]])
    moved = lambda p: 2.5 * p @ rot.T + np.array([10.0, -4.0])
    assert cjcrf.normalized_error(moved(pred), moved(gt), EYES) == pytest.approx(
        cjcrf.normalized_error(pred, gt, EYES), abs=1e-9)


def test_cli_exit_codes(tmp_path):
    code, _, err = cjcrf.run_cli(["synth", "--out", str(tmp_path / "d"), "--n", "0"])
    assert code == 2 and "error" in err
    code, out, _ = cjcrf.run_cli(["synth", "--out", str(tmp_path / "d"), "--n", "2", "--image-size", "48"])
    assert code == 0
    assert (tmp_path / "d" / "manifest.txt").exists()


def test_bad_model_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(ValueError):
        cjcrf.Model.load(bad)
