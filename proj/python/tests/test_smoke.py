import numpy as np
import pytest

import tracklabel as tl


def test_heatmap_round_trip():
    points = np.array([[20.0, 30.0], [60.0, 25.0]])
    h = tl.encode_heatmap(points, 96, 64, 3.0)
    assert h.shape == (64, 96)
    assert h.dtype == np.float32
    assert h[30, 20] == pytest.approx(1.0)
    peaks = tl.detect_peaks(h, 0.3, 4.0)
    np.testing.assert_array_equal(peaks, [[60.0, 25.0], [20.0, 30.0]])


def test_masked_mse_ignores_masked_pixels():
    pred = np.zeros((2, 2), np.float32)
    target = np.zeros((2, 2), np.float32)
    pred[0, 0] = 1.0
    pred[1, 1] = 7.0
    mask = np.ones((2, 2), np.uint8)
    mask[1, 1] = 0
    assert tl.masked_mse(pred, target, mask) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_fully_masked_raises_library_error():
    z = np.zeros((3, 3), np.float32)
    with pytest.raises(tl.Error) as info:
        tl.masked_mse(z, z, np.zeros((3, 3), np.uint8))
    assert info.value.kind == "fully-masked-frame"


def test_association_counts_before_cost():
    m = tl.associate_frames(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([[1.0, 0.0], [-2.0, 0.0]]), 3.0)
    assert len(m["pairs"]) == 2
    assert m["total_cost"] == pytest.approx(3.0)


def test_tracks_and_frame_range_on_simulated_truth():
    images, gt = tl.simulate({"frames": 20, "width": 64, "height": 64, "cells": 5, "division_rate": 0.0})
    assert images.shape == (20, 64, 64)
    assert 0.0 <= images.min() and images.max() <= 1.0
    tracks = tl.build_tracks(gt, 8, 10.0)
    assert len(tracks) == 5
    ratios = tl.tracked_ratios(tracks, gt)
    assert ratios == [1.0] * 20
    r = tl.select_frame_range(ratios, 0.8, 8)
    assert tuple(r) == (1, 20)
    frames, warnings = tl.build_pseudo_labels(tracks, gt, (1, 20), gt[7], 64, 64, 2.0, 6.0)
    assert len(frames) == 20 and not warnings
    assert all(f["mask"].all() for f in frames)


def test_detector_fit_and_score(tmp_path):
    images, gt = tl.simulate({"frames": 4, "width": 64, "height": 64, "cells": 4, "seed": 3})
    target = tl.encode_heatmap(gt[0], 64, 64, 2.0)
    d = tl.CorrelationDetector(radius=5)
    loss = d.fit([images[0]], [target], [np.ones((64, 64), np.uint8)])
    assert d.version == 1
    assert loss >= 0.0
    detections = [tl.detect_peaks(d.predict(img), 0.3, 3.0) for img in images]
    score = tl.score_sequence(detections, gt, 6.0)
    assert 0.0 <= score["f1"] <= 1.0
    assert score["tp"] + score["fn"] == sum(len(g) for g in gt)
    saved = d.save(tmp_path / "model")
    assert tl.CorrelationDetector.load(saved).threshold == d.threshold


def test_run_pipeline(tmp_path):
    tl.write_synthetic_sequence(tmp_path / "data", {"frames": 16, "width": 64, "height": 64, "cells": 4}, 8)
    result = tl.run_pipeline(
        {"data_root": tmp_path / "data", "output_root": tmp_path / "out", "labeled_frame": 8,
         "beta": 12, "gamma": 2, "log": False})
    assert 1 <= len(result["iterations"]) <= 2
    a, b = result["iterations"][0]["range"]
    assert a <= 8 <= b
    assert result["score"]["f1"] > 0.5
    assert (tmp_path / "out" / "report.csv").exists()


def test_unknown_setting_is_a_usage_error():
    with pytest.raises(tl.Error) as info:
        tl.run_pipeline({"betta": 3})
    assert info.value.kind == "usage"
