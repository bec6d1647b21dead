"""Acceptance gate: one test per top-level criterion, each printing a
single PASS/FAIL line with its measured values and runtime."""

import filecmp
import time
from pathlib import Path

import numpy as np

from protoseg.cli import EXIT_OK, main
from protoseg.coarse_mask import CoarseMaskParams
from protoseg.metrics import f_measure, iou, mae
from protoseg.mining import ImageProtoRecord, build_libraries, cross_category_prototypes
from protoseg.numerics import affinity_matrix, cosine, normalized_laplacian, smallest_eigpairs
from protoseg.retrieval import (
    ALL_VIEWS,
    RetrievalParams,
    View,
    build_index,
    inverse,
    knn_vote,
    transform_grid,
)
from protoseg.synth import SynthSpec, compare
from protoseg.tensor_store import BACKGROUND, FOREGROUND, PrototypeLibrary


def report(name, ok, detail, t0, limit):
    elapsed = time.time() - t0
    line = f"{'PASS' if ok else 'FAIL'}: {name} ({detail}; {elapsed:.1f}s / limit {limit:.0f}s)"
    print(line)
    assert ok, line
    assert elapsed < limit, f"{name} exceeded runtime limit: {elapsed:.1f}s >= {limit}s"


def test_eigensolver_oracle():
    """Eigenvalues within 1e-6 of a dense full decomposition; residuals
    below 1e-5; 50 random feature maps up to 8x8x16."""
    t0 = time.time()
    rng = np.random.default_rng(0)
    worst_gap = worst_res = 0.0
    for _ in range(50):
        h = int(rng.integers(2, 9))
        w = int(rng.integers(2, 9))
        d = int(rng.integers(2, 17))
        X = rng.standard_normal((h * w, d))
        L = normalized_laplacian(affinity_matrix(X))
        m = min(4, h * w)
        vals, vecs = smallest_eigpairs(L, m)
        ref = np.sort(np.linalg.eigvalsh(L))[:m]
        worst_gap = max(worst_gap, float(np.abs(vals - ref).max()))
        for k in range(m):
            v = vecs[:, k]
            res = np.linalg.norm(L @ v - vals[k] * v) / np.linalg.norm(v)
            worst_res = max(worst_res, float(res))
    ok = worst_gap <= 1e-6 and worst_res <= 1e-5
    report("eigensolver oracle", ok,
           f"max eigenvalue gap {worst_gap:.2e} (tol 1e-6), max residual {worst_res:.2e} (tol 1e-5)",
           t0, 10)


def test_knn_exactness():
    """200 randomized trials (n <= 4096, d <= 64, K in {1, 7, 512}) against
    an exhaustive-scan oracle; must agree on label and both vote counts in
    100% of trials."""
    t0 = time.time()
    rng = np.random.default_rng(1)
    agree = trials = 0
    for _ in range(200):
        n = int(rng.integers(2, 4097))
        d = int(rng.integers(2, 65))
        n_f = int(rng.integers(1, n))
        protos = rng.standard_normal((n, d)).astype(np.float32)
        idx = build_index(
            PrototypeLibrary(FOREGROUND, protos[:n_f], tuple(f"f{i}" for i in range(n_f))),
            PrototypeLibrary(BACKGROUND, protos[n_f:], tuple(f"b{i}" for i in range(n - n_f))),
        )
        f = rng.standard_normal(d)
        k = int(rng.choice([1, 7, 512]))
        label, fg, bg = knn_vote(f, idx, k, True)
        unit = protos.astype(np.float64)
        unit /= np.linalg.norm(unit, axis=1, keepdims=True)
        sims = unit @ (f / np.linalg.norm(f))
        order = sorted(range(n), key=lambda i: (-sims[i], i))[: min(k, n)]
        ofg = sum(1 for i in order if i < n_f)
        obg = len(order) - ofg
        olabel = 1 if ofg >= obg else 0
        trials += 1
        agree += (label, fg, bg) == (olabel, ofg, obg)
    report("knn exactness", agree == trials, f"{agree}/{trials} trials agree", t0, 30)


def test_cross_category_argmin():
    """100 randomized trials with set sizes <= 50: exact match against a
    brute-force argmin with lowest-index tie-breaking."""
    t0 = time.time()
    rng = np.random.default_rng(2)
    agree = 0
    for _ in range(100):
        nf = int(rng.integers(1, 51))
        nb = int(rng.integers(1, 51))
        d = int(rng.integers(2, 17))
        s_f = rng.standard_normal((nf, d))
        s_b = rng.standard_normal((nb, d))
        fg_g = rng.standard_normal(d)
        bg_g = rng.standard_normal(d)
        p_f, p_b = cross_category_prototypes(s_f, s_b, fg_g, bg_g)
        bf = min(range(nf), key=lambda i: (cosine(s_f[i], bg_g), i))
        bb = min(range(nb), key=lambda i: (cosine(s_b[i], fg_g), i))
        agree += np.array_equal(p_f, s_f[bf]) and np.array_equal(p_b, s_b[bb])
    report("cross-category argmin", agree == 100, f"{agree}/100 trials exact", t0, 5)


def test_view_group():
    """inverse(v) after v is the identity bit-exactly on random masks and
    feature grids; rot90 twice equals rot180."""
    t0 = time.time()
    rng = np.random.default_rng(3)
    ok = True
    for _ in range(20):
        h = int(rng.integers(1, 12))
        w = int(rng.integers(1, 12))
        grid = rng.standard_normal((h, w, 5)).astype(np.float32)
        mask = (rng.random((h, w)) < 0.5).astype(np.uint8)[..., None]
        for v in ALL_VIEWS:
            ok &= np.array_equal(transform_grid(transform_grid(grid, v), inverse(v)), grid)
            ok &= np.array_equal(transform_grid(transform_grid(mask, v), inverse(v)), mask)
        twice = transform_grid(transform_grid(grid, View.ROT90), View.ROT90)
        ok &= np.array_equal(twice, transform_grid(grid, View.ROT180))
    report("view group", ok, "forward/inverse identity and rot90^2 = rot180 bit-exact", t0, 5)


def test_histogram_filter():
    """Planted 90/10 bimodal similarity set, bins=50: all 10 low-sim records
    kept, at most 5 high-sim records kept."""
    t0 = time.time()
    rng = np.random.default_rng(4)
    v = np.array([1.0, 0.0], np.float32)
    records = []
    # jitter kept narrower than one histogram bin so the planted high
    # cluster occupies a single bin and the peak threshold falls below it
    for i in range(90):
        records.append(ImageProtoRecord(f"hi{i:02d}", v, v, v, v,
                                        float(0.8 + rng.uniform(-0.001, 0.001))))
    for i in range(10):
        records.append(ImageProtoRecord(f"lo{i:02d}", v, v, v, v,
                                        float(0.2 + rng.uniform(-0.001, 0.001))))
    _, _, rep = build_libraries(records, bins=50)
    kept = set(rep.kept_ids)
    low_kept = sum(1 for i in range(10) if f"lo{i:02d}" in kept)
    high_kept = sum(1 for i in range(90) if f"hi{i:02d}" in kept)
    ok = low_kept == 10 and high_kept <= 5
    report("histogram filter", ok,
           f"kept {low_kept}/10 low-sim and {high_kept}/90 high-sim (limit 5)", t0, 1)


def test_end_to_end_camouflage():
    """Camouflage regime (100 images, 16x16x32, intra_sim=0.9,
    dataset_sep=0.1, sigma=0.05, rho=0, seed=7): full pipeline mean IoU
    >= 0.90, coarse-only baseline <= 0.60."""
    t0 = time.time()
    spec = SynthSpec(num_images=100, h=16, w=16, d=32, intra_sim=0.9,
                     dataset_sep=0.1, noise_sigma=0.05, seed=7)
    rep = compare(spec, CoarseMaskParams(), RetrievalParams(top_k=7), bins=50)
    ok = rep.retrieval_mean_iou >= 0.90 and rep.baseline_mean_iou <= 0.60
    report("end-to-end camouflage", ok,
           f"retrieval IoU {rep.retrieval_mean_iou:.4f} (>= 0.90), "
           f"baseline IoU {rep.baseline_mean_iou:.4f} (<= 0.60)", t0, 120)


def test_mvkr_artifact_robustness():
    """Same dataset with rho=0.05 view-dependent artifacts: 6-view fused
    mean IoU beats identity-only by at least 0.01."""
    t0 = time.time()
    spec = SynthSpec(num_images=100, h=16, w=16, d=32, intra_sim=0.9,
                     dataset_sep=0.1, noise_sigma=0.05, artifact_rate=0.05, seed=7)
    multi = compare(spec, CoarseMaskParams(), RetrievalParams(top_k=7), bins=50)
    single = compare(spec, CoarseMaskParams(),
                     RetrievalParams(top_k=7, views=(View.IDENTITY,)), bins=50)
    margin = multi.retrieval_mean_iou - single.retrieval_mean_iou
    ok = margin >= 0.01
    report("mvkr artifact robustness", ok,
           f"6-view IoU {multi.retrieval_mean_iou:.4f} vs identity-only "
           f"{single.retrieval_mean_iou:.4f}, margin {margin:.4f} (>= 0.01)", t0, 180)


def test_metric_identities():
    """mae(x,x)=0, mae(x,~x)=1, iou(x,x)=1 on 50 random masks; the
    P=0.5, R=1.0, beta^2=0.3 f-measure case equals 0.5652 within 1e-4."""
    t0 = time.time()
    rng = np.random.default_rng(5)
    ok = True
    for _ in range(50):
        m = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        ok &= mae(m, m) == 0.0
        ok &= mae(m, 1 - m) == 1.0
        ok &= iou(m, m) == 1.0
    gt = np.array([[1, 0, 0, 0]], np.uint8)
    pred = np.array([[1, 1, 0, 0]], np.uint8)
    f = f_measure(pred, gt)
    ok &= abs(f - 0.5652) <= 1e-4
    report("metric identities", ok, f"identities hold on 50 masks, f-measure case {f:.6f}", t0, 1)


def test_pipeline_determinism(tmp_path):
    """cmd_pipeline with --workers 1 and --workers 8 on the same synthetic
    dataset produces byte-identical output trees."""
    t0 = time.time()
    data_dir = tmp_path / "data"
    assert main([
        "synth", "--out-dir", str(data_dir), "--num-images", "40",
        "--height", "16", "--width", "16", "--dim", "32",
        "--intra-sim", "0.9", "--dataset-sep", "0.1",
        "--noise-sigma", "0.05", "--seed", "7",
    ]) == EXIT_OK
    outs = []
    for workers in (1, 8):
        out_dir = tmp_path / f"w{workers}"
        code = main([
            "pipeline", "--fmap-dir", str(data_dir / "fmaps"),
            "--out-dir", str(out_dir), "--gt-dir", str(data_dir / "gt"),
            "--bins", "10", "--top-k", "7", "--workers", str(workers),
        ])
        assert code == EXIT_OK
        outs.append(out_dir)

    def trees_identical(a, b):
        stack = [filecmp.dircmp(a, b)]
        while stack:
            c = stack.pop()
            if c.left_only or c.right_only:
                return False
            for name in c.common_files:
                if not filecmp.cmp(Path(c.left) / name, Path(c.right) / name, shallow=False):
                    return False
            stack.extend(c.subdirs.values())
        return True

    ok = trees_identical(*outs)
    report("pipeline determinism", ok, "workers 1 vs 8 output trees byte-identical", t0, 180)
