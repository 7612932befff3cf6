"""One test per headline guarantee, each printing a PASS/FAIL summary line.

These are deliberately heavier than the unit suites: large randomized sweeps
against the independent oracles in oracles.py, plus a full command-line run
on a synthetic corpus. Each test wraps its body in criterion(), so the
terminal summary always ends with one line per guarantee.
"""

import csv
import json
import time

import numpy as np

from acceptance_log import criterion
from oracles import (
    auroc_pairwise,
    cluster_walk,
    ewma_closed_form,
    flood_fill_label,
    quantile_order_statistic,
)
from winspect.analysis import AreaSample, ClusterParams, cluster_areas
from winspect.cli import main
from winspect.evaluation import ConfusionMatrix, ScoredLabel, compute_auroc, compute_metrics
from winspect.kernels import label_components
from winspect.monitor import calibrate_ucl, calibrate_z0, ewma_series
from winspect.raster import ImageRaster, WindowSpec, split_image
from winspect.segmenter import reference_segment
from winspect.synth import read_manifest


def _samples(areas):
    return [AreaSample(int(a), (0, 0), i) for i, a in enumerate(areas)]


def _canon(outcome):
    return (
        [[s.area for s in c] for c in outcome.clusters],
        outcome.selected_index,
        outcome.intersection,
    )


def test_windowing_count():
    with criterion("windowing-count"):
        started = time.perf_counter()
        rng = np.random.default_rng(101)
        checked = 0
        while checked < 1000:
            width = int(rng.integers(1, 513))
            height = int(rng.integers(1, 513))
            ww = int(rng.integers(1, width + 1))
            wh = int(rng.integers(1, height + 1))
            ws = int(rng.integers(1, ww + 1))
            hs = int(rng.integers(1, wh + 1))
            expected = ((height - wh) // hs + 1) * ((width - ww) // ws + 1)
            if expected > 3000 or expected * ww * wh > 4_000_000:
                continue  # resample pathological copy volumes, keep runtime bounded
            image = ImageRaster(pixels=np.zeros((height, width), dtype=np.uint8))
            windows = split_image(image, WindowSpec(ww, wh, ws, hs))
            assert len(windows) == expected
            checked += 1

        image = ImageRaster(pixels=np.zeros((512, 512), dtype=np.uint8))
        assert len(split_image(image, WindowSpec(128, 128, 64, 64))) == 49
        # degenerate extremes: window equals image; step exceeds the leftover
        one = ImageRaster(pixels=np.zeros((37, 53), dtype=np.uint8))
        assert len(split_image(one, WindowSpec(53, 37, 1, 1))) == 1
        assert len(split_image(one, WindowSpec(40, 30, 50, 50))) == 1
        assert time.perf_counter() - started < 5.0


def test_clustering_oracle():
    with criterion("clustering-oracle"):
        rng = np.random.default_rng(103)
        for _ in range(10_000):
            n = int(rng.integers(0, 201))
            areas = rng.integers(1, 300, n).tolist()
            tol = float(rng.uniform(0.0, 20.0))
            got = cluster_areas(_samples(areas), ClusterParams(tolerance=tol))
            want_clusters, want_index, want_inter = cluster_walk(areas, tol)
            assert [[s.area for s in c] for c in got.clusters] == want_clusters
            assert got.selected_index == want_index
            assert got.intersection == want_inter

        hand = [
            ([40, 41, 42, 50], 2.0, 41.0),
            ([10, 50], 2.0, 0.0),
            ([10, 11, 13], 1.5, 10.5),
        ]
        for areas, tol, expected in hand:
            got = cluster_areas(_samples(areas), ClusterParams(tolerance=tol))
            assert got.intersection == expected


def test_permutation_invariance():
    with criterion("permutation-invariance"):
        rng = np.random.default_rng(107)
        for _ in range(100):
            n = int(rng.integers(1, 80))
            base = _samples(rng.integers(1, 120, n).tolist())
            params = ClusterParams(tolerance=float(rng.uniform(0.0, 15.0)))
            reference = cluster_areas(base, params)
            ref_full = [
                [(s.area, s.mask_index) for s in c] for c in reference.clusters
            ]
            for _ in range(100):
                shuffled = list(base)
                rng.shuffle(shuffled)
                got = cluster_areas(shuffled, params)
                assert _canon(got) == _canon(reference)
                assert [
                    [(s.area, s.mask_index) for s in c] for c in got.clusters
                ] == ref_full


def test_ewma_closed_form():
    with criterion("ewma-closed-form"):
        rng = np.random.default_rng(109)
        for _ in range(1000):
            xs = rng.uniform(0.0, 100.0, 500)
            lam = float(rng.uniform(0.01, 0.99))
            z0 = float(rng.uniform(0.0, 50.0))
            got = np.asarray(ewma_series(xs.tolist(), lam, z0))
            want = ewma_closed_form(xs, lam, z0)
            np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)
            lo = min(float(xs.min()), z0) - 1e-9
            hi = max(float(xs.max()), z0) + 1e-9
            assert got.min() >= lo and got.max() <= hi


def test_ucl_quantile():
    with criterion("ucl-quantile"):
        grid = [float(v) for v in range(1, 101)]
        assert calibrate_ucl(grid, quantile=0.95).ucl == 95.0

        rng = np.random.default_rng(113)
        for _ in range(300):
            n = int(rng.integers(1, 200))
            values = rng.normal(50.0, 15.0, n).tolist()
            q = float(rng.uniform(0.05, 0.99))
            ucl = calibrate_ucl(values, q).ucl
            assert ucl == quantile_order_statistic(values, q)
            assert sum(v <= ucl for v in values) / n >= q

        # chart run back over its own calibration stream: alarm rate is capped
        for _ in range(100):
            n = int(rng.integers(20, 400))
            xs = rng.gamma(4.0, 8.0, n).tolist()  # nonnegative, like area scores
            z0 = calibrate_z0(xs)
            zs = ewma_series(xs, 0.1, z0)
            ucl = calibrate_ucl(zs, quantile=0.95).ucl
            rate = sum(z > ucl for z in zs) / n
            assert rate <= 0.05 + 2.0 / np.sqrt(n)


def test_metric_reproduction(tmp_path):
    with criterion("metric-reproduction"):
        report = compute_metrics(ConfusionMatrix(tp=46, fp=0, tn=50, fn=4))
        assert report.accuracy == 0.96  # 96 of 100 correct
        assert report.precision == 1.0
        assert report.recall == 0.92  # 46 of 50 positives found
        assert round(report.f1, 2) == 0.96
        assert abs(report.f1 - 23 / 24) < 1e-12  # harmonic mean of 1 and 23/25

        degenerate = compute_metrics(ConfusionMatrix(tp=0, fp=0, tn=50, fn=50))
        assert degenerate.precision == 0.0
        assert degenerate.recall == 0.0
        assert degenerate.f1 == 0.0

        # chart-mode scoring of a cleanly separated stream is error-free on
        # every metric: 20 zero-score clean images then 20 high-score faulty
        preds = tmp_path / "stream.csv"
        with open(preds, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["image_id", "score", "predicted", "label"])
            for i in range(20):
                w.writerow([f"clean_{i}.png", "0.0", "0", "0"])
            for i in range(20):
                w.writerow([f"faulty_{i}.png", "500.0", "0", "1"])
        limits = tmp_path / "limits.json"
        limits.write_text(json.dumps({
            "ucl": 0.0, "quantile": 0.95, "z0": 0.0, "lambda": 0.1,
            "calibration_size": 20,
        }))
        out = tmp_path / "eval.json"
        rc = main(["evaluate", str(preds), "--ewma", "--limits", str(limits),
                   "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["mode"] == "ewma"
        for key in ("accuracy", "precision", "recall", "f1", "auroc"):
            assert doc[key] == 1.0


def test_auroc_oracle():
    with criterion("auroc-oracle"):
        rng = np.random.default_rng(127)
        for trial in range(1000):
            n = int(rng.integers(2, 201))
            if trial % 2 == 0:
                scores = rng.integers(0, 5, n).astype(np.float64)  # heavy ties
            else:
                scores = rng.normal(0.0, 1.0, n)
            labels = rng.integers(0, 2, n)
            labels[0], labels[1] = 0, 1
            got = compute_auroc(
                [ScoredLabel(float(s), int(l)) for s, l in zip(scores, labels)]
            )
            assert abs(got - auroc_pairwise(scores, labels)) <= 1e-12

        separated = [ScoredLabel(float(v), int(v >= 100)) for v in range(200)]
        assert compute_auroc(separated) == 1.0
        tied = [ScoredLabel(7.0, i % 2) for i in range(50)]
        assert compute_auroc(tied) == 0.5


def test_synthetic_end_to_end(tmp_path):
    with criterion("synthetic-end-to-end"):
        started = time.perf_counter()
        main_dir = tmp_path / "main"
        held_dir = tmp_path / "held"
        assert main(["synth", "--out", str(main_dir), "--count", "50",
                     "--image-size", "128", "--texture", "value_noise",
                     "--seed", "7"]) == 0
        assert main(["synth", "--out", str(held_dir), "--count", "30",
                     "--image-size", "128", "--texture", "value_noise",
                     "--seed", "8"]) == 0

        # calibration manifest: the held-out run's fault-free half only
        calib = held_dir / "calib.csv"
        clean = [
            (p, label)
            for p, label in read_manifest(held_dir / "manifest.csv")
            if label == 0
        ]
        assert len(clean) == 30
        with open(calib, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "label"])
            w.writerows(clean)

        limits = tmp_path / "limits.json"
        assert main(["calibrate", str(calib), "--out", str(limits),
                     "--workers", "1"]) == 0

        preds_a = tmp_path / "preds_a.csv"
        rc = main(["batch", str(main_dir / "manifest.csv"),
                   "--limits", str(limits), "--out", str(preds_a),
                   "--metrics", str(tmp_path / "metrics.json"), "--workers", "1"])
        assert rc == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["count"] == 100
        assert metrics["accuracy"] >= 0.95

        # scoring the calibration set with its own calibrated threshold
        # must raise no false alarms
        rc = main(["batch", str(calib), "--limits", str(limits),
                   "--out", str(tmp_path / "preds_calib.csv"),
                   "--metrics", str(tmp_path / "metrics_calib.json"),
                   "--workers", "1"])
        assert rc == 0
        calib_metrics = json.loads((tmp_path / "metrics_calib.json").read_text())
        assert calib_metrics["confusion"]["fp"] == 0

        preds_b = tmp_path / "preds_b.csv"
        rc = main(["batch", str(main_dir / "manifest.csv"),
                   "--limits", str(limits), "--out", str(preds_b),
                   "--metrics", str(tmp_path / "metrics_b.json"), "--workers", "1"])
        assert rc == 0
        assert preds_a.read_bytes() == preds_b.read_bytes()

        assert time.perf_counter() - started < 60.0


def test_reference_segmenter():
    with criterion("reference-segmenter"):
        rng = np.random.default_rng(131)
        for _ in range(1000):
            h = int(rng.integers(1, 33))
            w = int(rng.integers(1, 33))
            mask = (rng.random((h, w)) < rng.uniform(0.05, 0.95)).astype(np.uint8)
            for connectivity in (4, 8):
                got_labels, got_n = label_components(mask, connectivity)
                want_labels, want_n = flood_fill_label(mask, connectivity)
                assert got_n == want_n
                assert np.array_equal(got_labels, want_labels)

        for _ in range(200):
            h = int(rng.integers(1, 48))
            w = int(rng.integers(1, 48))
            gray = rng.integers(0, 256, (h, w)).astype(np.uint8)
            t = int(rng.integers(1, 255))
            dark = reference_segment(gray, threshold=t, polarity="dark_foreground")
            assert sum(m.pixel_count for m in dark) == int(np.sum(gray < t))
            light = reference_segment(gray, threshold=t, polarity="light_foreground")
            assert sum(m.pixel_count for m in light) == int(np.sum(gray > t))
