import json
import math
import os
import subprocess

import numpy as np
import pytest

import ccvol


def test_volume_triple_thresholds_are_strict():
    values = np.array([0.7, 0.5, 0.3, 0.9, 0.1, 0.6], dtype=np.float32).reshape(1, 2, 3)
    t = ccvol.volume_triple(values, (1.0, 2.0, 0.5))
    # float32(0.3) is slightly above 0.3, so it counts towards the high volume.
    assert tuple(t) == (1.0, 3.0, 5.0)


def test_histogram_feature_matches_numpy():
    rng = np.random.default_rng(3)
    values = rng.random((4, 5, 6), dtype=np.float32)
    feature = ccvol.histogram_feature(values)
    assert feature.shape == (ccvol.HISTOGRAM_BINS,)
    # Right-closed bins of width 0.01 over (0.2, 1].
    edges = [np.float32(0.2 + 0.01 * b) for b in range(81)]
    expected = [np.count_nonzero((values > edges[b]) & (values <= edges[b + 1])) for b in range(80)]
    expected[-1] = np.count_nonzero(values > edges[79])
    assert feature.tolist() == expected


def test_invalid_map_raises_value_error():
    with pytest.raises(ValueError):
        ccvol.volume_triple(np.full((2, 2, 2), 1.5, dtype=np.float32))
    with pytest.raises(ValueError):
        ccvol.volume_triple(np.zeros((2, 2), dtype=np.float32))


def test_mean_maps():
    a = np.zeros((1, 1, 2), dtype=np.float32)
    b = np.ones((1, 1, 2), dtype=np.float32)
    assert ccvol.mean_maps([a, b]).tolist() == [[[0.5, 0.5]]]


def test_quantile_and_kmeans():
    assert ccvol.conformal_rank(849, 0.15) == 723
    assert ccvol.conformal_quantile(list(range(1, 11)), 0.5) == 6.0
    assert math.isinf(ccvol.conformal_quantile([5.0], 0.15))

    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(0, 1, (21, 2)), rng.normal(10, 1, (20, 2))])
    model, assignments = ccvol.fit_constrained_kmeans(pts, 2, seed=1)
    assert sorted(model.sizes) == [20, 21]
    assert len(set(assignments[:20])) == 1
    assert all(b <= a for a, b in zip(model.inertia_history, model.inertia_history[1:]))
    assert model.assign(np.array([10.0, 10.0])) == assignments[-1]


def test_pipeline_end_to_end(tmp_path):
    cfg = ccvol.GeneratorConfig()
    cfg.dims = (8, 24, 24)
    cfg.lesion_count_mean = 6.0
    cfg.noise_regimes = [(0.5, 0.02), (0.5, 0.2)]
    cfg.seed = 11
    samples = ccvol.generate(cfg, 60)
    again = ccvol.generate(cfg, 60, threads=2)
    assert all(np.array_equal(s["values"], t["values"]) for s, t in zip(samples, again))

    records = [ccvol.make_record(s["id"], s["values"], s["spacing"], s["true_volume_mm3"]) for s in samples]
    cal, test = records[:40], records[40:]
    model = ccvol.calibrate(cal, 0.2, method="clustered", k=2, seed=5)
    assert model.method == "clustered"
    assert sorted(model.cluster_model.sizes) == [20, 20]
    assert ccvol.CalibrationModel.from_json(model.to_json()) == model

    path = tmp_path / "model.json"
    model.save(path)
    assert json.loads(path.read_text())["method"] == "clustered"
    assert ccvol.CalibrationModel.load(path) == model

    triage = []
    for r in test:
        p = ccvol.predict(model, r)
        assert p.low_mm3 <= p.high_mm3
        assert p.cluster_index in (0, 1)
        triage.append(ccvol.classify(p, r.true_volume_mm3, r.id))
    summary = ccvol.summarize(triage)
    assert summary.ca + summary.ce + summary.ua + summary.ue == 20
    assert 0.0 <= summary.coverage <= 1.0

    conventional = ccvol.calibrate(cal, 0.2, method="conventional")
    scores = sorted(ccvol.conformity_score(r.triple, r.true_volume_mm3) for r in cal)
    assert conventional.q_global == scores[ccvol.conformal_rank(40, 0.2) - 1]


def test_map_files_round_trip(tmp_path):
    values = np.linspace(0, 1, 24, dtype=np.float32).reshape(2, 3, 4)
    ccvol.save_map(tmp_path, "case01", values, (2.0, 0.5, 0.5))
    loaded, spacing = ccvol.load_map(tmp_path / "case01.npy")
    assert np.array_equal(loaded, values)
    assert spacing == (2.0, 0.5, 0.5)
    assert np.array_equal(np.load(tmp_path / "case01.npy"), values)


def test_triage_and_risk():
    assert ccvol.risk_category(ccvol.agatston_score(10.0)) == "Low"
    r = ccvol.classify(ccvol.IntervalPrediction(5, 10, 15), 10)
    assert r.cell == "CA" and r.covered


@pytest.mark.skipif("CCVOL_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_featurize_matches_module(tmp_path):
    values = np.random.default_rng(9).random((3, 4, 5), dtype=np.float32)
    (tmp_path / "maps").mkdir()
    ccvol.save_map(tmp_path / "maps", "m1", values, (1.0, 0.7, 0.7))
    out = tmp_path / "records.csv"
    subprocess.run([os.environ["CCVOL_CLI"], "featurize", "--in", str(tmp_path / "maps"), "--out", str(out)],
                   check=True, capture_output=True)
    (record,) = ccvol.read_records_csv(out)
    assert record.triple == ccvol.volume_triple(values, (1.0, 0.7, 0.7))
    assert record.feature.tolist() == ccvol.histogram_feature(values).tolist()
