"""Acceptance suite: one test per exit criterion, each printing a verdict line.

The rate-distortion criteria run a full 7-rank x 7-qp sweep on the 9x9
synthetic fixture at a desk-scale configuration (smaller FDL layer count and
calibration budget than the encode defaults; both are ordinary config knobs)
and share its output table.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from lflc.bksvd import KrylovConfig, block_krylov_lowrank, spectral_error_ratio
from lflc.evaluate import RD_COLUMNS, bd_rate, rd_sweep, read_rd_csv, write_rd_csv
from lflc.fdl import CalibConfig, calibrate, fit_fdl, synthesize_view
from lflc.layers import (LayerOptConfig, optimize_layers, reconstruction_loss_and_grad,
                         render_subset)
from lflc.patterns import ViewSubset, get_pattern
from lflc.pipeline import (EncoderSettings, decode_lightfield, encode_with_stacks,
                           lowrank_stacks, optimize_subset_stacks)

from conftest import bandlimited_texture, fourier_shift, grid_coords

RANKS = [4, 8, 16, 28, 44, 52, 60]
QPS = [2, 6, 10, 14, 20, 26, 38]

SWEEP_SETTINGS = EncoderSettings(
    rank=RANKS[0], qp=QPS[0], fdl_layers=12,
    layer_cfg=LayerOptConfig(max_iters=800),
    calib_cfg=CalibConfig(max_iters=8, freq_limit=0.2))

CLOSED_LOOP_SETTINGS = EncoderSettings(
    rank=4, qp=20, fdl_layers=6,
    layer_cfg=LayerOptConfig(max_iters=300),
    calib_cfg=CalibConfig(max_iters=6, freq_limit=0.25))


def _report(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def sweep(lf9, tmp_path_factory):
    pattern = get_pattern("h2", 9, 9)
    start = time.time()
    points = rd_sweep(lf9, pattern, RANKS, QPS, SWEEP_SETTINGS)
    elapsed = time.time() - start
    csv = tmp_path_factory.mktemp("sweep") / "sweep.csv"
    write_rd_csv(points, csv)
    return points, elapsed, csv


@pytest.fixture(scope="module")
def subset_stacks(lf3, lf9):
    """Optimized layer stacks per (fixture, pattern), shared by criterion 5."""
    out = {}
    for name, lf in (("3x3", lf3), ("9x9", lf9)):
        for pat_name in ("c2", "h2"):
            pattern = get_pattern(pat_name, *lf.grid_shape)
            out[(name, pat_name)] = (lf, pattern, optimize_subset_stacks(
                lf, pattern, CLOSED_LOOP_SETTINGS.layer_cfg, CLOSED_LOOP_SETTINGS.seed))
    return out


def test_criterion_1_bksvd_spectral_guarantee():
    start = time.time()
    hits = 0
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        b = rng.standard_normal((300, 100))
        res = block_krylov_lowrank(b, KrylovConfig(rank=10, epsilon=0.1, seed=seed))
        sigma = np.linalg.svd(b, compute_uv=False)
        ratio = spectral_error_ratio(b, res, sigma[10])
        worst = max(worst, ratio)
        hits += ratio <= 1.1
    elapsed = time.time() - start
    _report(1, hits >= 19 and elapsed < 10.0,
            f"spectral residual within 1.1*sigma_11 in {hits}/20 trials "
            f"(worst ratio {worst:.4f}) in {elapsed:.2f}s")


def test_criterion_2_exact_rank_recovery():
    worst = 0.0
    for k in (1, 4, 8):
        rng = np.random.default_rng(k)
        b = rng.standard_normal((120, k)) @ rng.standard_normal((k, 80))
        res = block_krylov_lowrank(b, KrylovConfig(rank=k, seed=0))
        rel = np.linalg.norm(b - res.approx, 2) / np.linalg.norm(b, 2)
        worst = max(worst, rel)
    _report(2, worst <= 1e-6,
            f"rank {{1,4,8}} inputs recovered, worst relative spectral residual {worst:.2e}")


def test_criterion_3_layer_optimizer_self_consistency(lf3):
    coords = grid_coords(3, 3)
    views = np.stack([lf3.view(s, t) for s, t in coords])
    sub = ViewSubset((3, 3), lf3.view_shape, coords, views)
    fit = optimize_layers(sub, LayerOptConfig(max_iters=2000, seed=0))
    mse = float(np.mean((render_subset(fit, coords) - views) ** 2))
    psnr = 10 * math.log10(1.0 / mse)

    rng = np.random.default_rng(99)
    vals = np.clip(fit.values + 0.05 * rng.standard_normal(fit.values.shape), 0.05, 0.95)
    _, grad = reconstruction_loss_and_grad(vals, views, coords, lf3.view_shape)
    eps = 1e-6
    worst_rel = 0.0
    for _ in range(100):
        idx = tuple(rng.integers(0, s) for s in vals.shape)
        hi = vals.copy()
        lo = vals.copy()
        hi[idx] += eps
        lo[idx] -= eps
        fd = (reconstruction_loss_and_grad(hi, views, coords, lf3.view_shape)[0]
              - reconstruction_loss_and_grad(lo, views, coords, lf3.view_shape)[0]) / (2 * eps)
        rel = abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-8)
        worst_rel = max(worst_rel, rel)
    _report(3, psnr >= 40.0 and worst_rel < 1e-4,
            f"refit PSNR {psnr:.2f} dB (>= 40); gradient vs central differences "
            f"worst relative error {worst_rel:.2e} over 100 pixels")


def test_criterion_4_fdl_exactness():
    rng = np.random.default_rng(8)
    tex = bandlimited_texture(rng, 48, 48, fmax=0.08)
    d_true = 0.7
    offsets = np.arange(5) - 2
    coords = np.stack([np.zeros(5), offsets.astype(float)], axis=1)
    views = np.stack([fourier_shift(tex, (d_true * u[0], d_true * u[1])) for u in coords])

    train = [0, 1, 3, 4]
    model = fit_fdl(views[train], coords[train], [d_true], lam=1e-4)
    heldout = synthesize_view(model, coords[2])
    mse = float(np.mean((heldout - np.clip(views[2], 0, 1)) ** 2))
    psnr = 10 * math.log10(1.0 / mse)

    calib = calibrate(views, coords, 1, lam=1e-4, cfg=CalibConfig(max_iters=120))
    d_err = abs(float(calib.disparities[0]) - d_true)
    _report(4, psnr >= 45.0 and d_err <= 0.05,
            f"held-out synthesis {psnr:.2f} dB (>= 45); calibrated disparity "
            f"error {d_err:.4f} px (<= 0.05)")


def test_criterion_5_closed_loop_coding(subset_stacks):
    failures = []
    runs = 0
    for (fixture, pat_name), (lf, pattern, ((sub1, st1), (sub2, st2))) in subset_stacks.items():
        for rank in (4, 28):
            approx = lowrank_stacks((st1, st2), rank, seed=CLOSED_LOOP_SETTINGS.seed)
            for qp in (2, 38):
                cell = replace(CLOSED_LOOP_SETTINGS, rank=rank, qp=qp)
                result = encode_with_stacks(pattern, (sub1, sub2), approx, cell)
                decoded = decode_lightfield(result.data)
                runs += 1
                if not np.array_equal(decoded.views, result.reconstruction.views):
                    failures.append((fixture, pat_name, rank, qp))
    _report(5, runs == 16 and not failures,
            f"decoder output bit-identical to encoder reconstruction in {runs}/16 "
            f"(rank, qp, pattern, grid) combinations" +
            (f"; failures: {failures}" if failures else ""))


def test_criterion_6_rd_monotonicity(sweep):
    points, _, _ = sweep
    byte_ok = True
    psnr_ok = True
    for rank in RANKS:
        series = [p for p in points if p.rank == rank]
        assert [p.qp for p in series] == QPS
        for a, b in zip(series, series[1:]):
            if b.bytes_total > a.bytes_total * 1.05:
                byte_ok = False
            if b.yuv_psnr_db > a.yuv_psnr_db + 0.2:
                psnr_ok = False

    rng = np.random.default_rng(17)
    b = rng.standard_normal((216, 72))
    medians = []
    for rank in RANKS:
        errs = [block_krylov_lowrank(b, KrylovConfig(rank, seed=s)).achieved_error
                for s in range(20)]
        medians.append(float(np.median(errs)))
    rank_ok = all(m2 <= m1 + 1e-12 for m1, m2 in zip(medians, medians[1:]))
    _report(6, byte_ok and psnr_ok and rank_ok,
            f"bytes non-increasing (5%) and PSNR non-increasing (0.2 dB) along qp "
            f"for all ranks: {byte_ok and psnr_ok}; median BK-SVD residual "
            f"non-increasing in rank over 20 seeds: {rank_ok}")


def test_criterion_7_bd_rate_oracle():
    anchor = [(1000, 30.0), (2000, 34.0), (4000, 38.0), (8000, 42.0)]
    zero = bd_rate(anchor, anchor)
    halved = bd_rate(anchor, [(r / 2, p) for r, p in anchor])

    rng = np.random.default_rng(3)
    worst_gap = 0.0
    pairs = 0
    while pairs < 10:
        # RD-shaped random curves: strictly increasing PSNR with >= 1 dB
        # spacing and rates growing with quality
        p1 = 30.0 + np.cumsum(rng.uniform(1.0, 4.0, 4))
        p2 = 30.0 + np.cumsum(rng.uniform(1.0, 4.0, 4))
        r1 = 2.0 ** (9.0 + np.cumsum(rng.uniform(0.3, 1.5, 4)))
        r2 = 2.0 ** (9.0 + np.cumsum(rng.uniform(0.3, 1.5, 4)))
        lo, hi = max(p1.min(), p2.min()), min(p1.max(), p2.max())
        if hi <= lo:
            continue
        pairs += 1
        fa = np.polyfit(p1, np.log2(r1), 3)
        ft = np.polyfit(p2, np.log2(r2), 3)
        grid = np.linspace(lo, hi, 10_000)
        delta = np.trapezoid(np.polyval(ft, grid) - np.polyval(fa, grid), grid) / (hi - lo)
        oracle = 100.0 * (2.0 ** delta - 1.0)
        got = bd_rate(list(zip(r1, p1)), list(zip(r2, p2)))
        worst_gap = max(worst_gap, abs(got - oracle))
    _report(7, zero == 0.0 and abs(halved + 50.0) <= 0.1 and worst_gap <= 0.1,
            f"identical curves {zero:.3f}% (=0); rate-halved {halved:.3f}% "
            f"(-50 +/- 0.1); worst gap to dense-integration oracle "
            f"{worst_gap:.4f} pp over {pairs} random pairs")


def test_criterion_8_desk_scale_substitute(lf9, sweep):
    points, elapsed, csv = sweep
    raw_bytes = 81 * 64 * 64 * 3
    oversized = [(p.rank, p.qp, p.bytes_total) for p in points
                 if p.qp >= 20 and p.bytes_total >= 0.10 * raw_bytes]

    rows = read_rd_csv(csv)
    shape_ok = (len(rows) == len(RANKS) * len(QPS)
                and tuple(csv.read_text().splitlines()[0].split(",")) == RD_COLUMNS)

    _report(8, not oversized and shape_ok and elapsed < 900.0,
            f"all {len(points)} cells with qp >= 20 below 10% of raw "
            f"({raw_bytes} B); table-shaped CSV with {len(rows)} rows; "
            f"7x7 sweep took {elapsed:.1f}s (< 900s). Published table values "
            f"are not reproducible here by design (external HEVC reference "
            f"encoder and camera datasets required).")
