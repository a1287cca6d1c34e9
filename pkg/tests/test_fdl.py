import numpy as np
import pytest

from lflc.errors import LflcError, SingularSystem
from lflc.fdl import (CalibConfig, CalibrationResult, FdlAccumulator, FDLModel, calibrate,
                      fit_fdl, phase_rows, synthesize_view)

from conftest import bandlimited_texture, fourier_shift


def _planted_views(seed, n_views=5, d=0.7, h=48, w=48, fmax=0.08):
    """Views of a single-disparity scene along the t axis, plus coordinates."""
    rng = np.random.default_rng(seed)
    tex = bandlimited_texture(rng, h, w, fmax=fmax)
    offsets = np.arange(n_views) - n_views // 2
    coords = np.stack([np.zeros(n_views), offsets.astype(float)], axis=1)
    views = np.stack([fourier_shift(tex, (d * u[0], d * u[1])) for u in coords])
    return tex, coords, views


def test_fit_single_view_identity():
    rng = np.random.default_rng(0)
    view = bandlimited_texture(rng, 16, 16)
    model = fit_fdl(view[None], [(0.0, 0.0)], [0.3], lam=0.0)
    for ch in range(3):
        want = np.fft.rfft2(view[:, :, ch]).ravel()
        assert np.allclose(model.spectra[:, 0, ch], want, atol=1e-9)


def test_fit_allzero_views_zero_model():
    views = np.zeros((3, 16, 16, 3))
    coords = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
    model = fit_fdl(views, coords, [-0.5, 0.5], lam=1e-4)
    assert np.allclose(model.spectra, 0.0, atol=1e-12)


def test_fit_singular_without_regularization():
    views = np.zeros((3, 8, 8, 3))
    coords = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
    with pytest.raises(SingularSystem):
        fit_fdl(views, coords, [-0.5, 0.5], lam=0.0)  # DC normal matrix is singular


def test_planted_scene_heldout_synthesis():
    _, coords, views = _planted_views(1)
    train = [0, 1, 3, 4]
    model = fit_fdl(views[train], coords[train], [0.7], lam=1e-4)
    heldout = synthesize_view(model, coords[2])
    mse = float(np.mean((heldout - np.clip(views[2], 0, 1)) ** 2))
    assert 10 * np.log10(1.0 / mse) >= 45.0


def test_synthesize_zero_coordinate_is_plain_sum():
    _, coords, views = _planted_views(2, h=24, w=24)
    model = fit_fdl(views, coords, [0.5, 0.9], lam=1e-4)
    got = synthesize_view(model, (0.0, 0.0))
    summed = model.spectra.sum(axis=1)  # all phase factors are exactly 1
    h, w = model.view_shape
    want = np.stack([np.fft.irfft2(summed[:, c].reshape(h, w // 2 + 1), s=(h, w))
                     for c in range(3)], axis=-1)
    assert np.allclose(got, np.clip(want, 0, 1), atol=1e-12)


def test_zero_disparity_layer_constant_over_views():
    rng = np.random.default_rng(3)
    view = bandlimited_texture(rng, 16, 16)
    model = fit_fdl(view[None], [(0.0, 0.0)], [0.0], lam=1e-6)
    a = synthesize_view(model, (0.0, 0.0))
    b = synthesize_view(model, (3.0, -2.0))
    assert np.allclose(a, b, atol=1e-9)


def test_fit_linear_in_views():
    _, coords, views = _planted_views(4, h=16, w=16)
    m1 = fit_fdl(views, coords, [0.7], lam=1e-4)
    m2 = fit_fdl(0.5 * views, coords, [0.7], lam=1e-4)
    assert np.allclose(m2.spectra, 0.5 * m1.spectra, atol=1e-9)


def test_synthesis_at_fitted_view_matches_regression_residual():
    _, coords, views = _planted_views(5, h=24, w=24)
    acc = FdlAccumulator((24, 24), np.array([0.4, 0.8]), 1e-4)
    for v, u in zip(views, coords):
        acc.add_view(v, u)
    x = acc.solve()
    j = 3
    rows = phase_rows(acc.f1, acc.f2, acc.d, coords[j])
    synth_spec = np.einsum("fk,fkc->fc", rows, x)
    view_spec = np.stack([np.fft.rfft2(views[j][:, :, c]).ravel() for c in range(3)], -1)
    synth = acc.synthesize(x, coords[j])
    # the synthesized spectrum is exactly the regression prediction A x
    assert np.allclose(np.fft.rfft2(synth[:, :, 0]).ravel(),
                       synth_spec[:, 0], atol=1e-9)
    # so the spatial error energy equals the per-frequency residual energy
    resid = synth_spec - view_spec
    hw = 24 * 24
    weights = np.full((24, 13), 2.0)
    weights[:, 0] = 1.0
    weights[:, -1] = 1.0  # even width: Nyquist column unique
    err_spec = np.sum(weights.ravel()[:, None] * np.abs(resid) ** 2) / hw
    err_spat = np.sum((synth - views[j]) ** 2)
    assert err_spat == pytest.approx(err_spec, rel=1e-9)


def test_parseval_consistency():
    _, coords, views = _planted_views(6, h=24, w=24)
    acc = FdlAccumulator((24, 24), np.array([0.7]), 1e-4)
    for v, u in zip(views, coords):
        acc.add_view(v, u)
    x = acc.solve()
    img = acc.synthesize(x, (0.25, -0.5))
    rows = phase_rows(acc.f1, acc.f2, acc.d, np.array([0.25, -0.5]))
    spec = np.einsum("fk,fkc->fc", rows, x).reshape(24, 13, 3)
    weights = np.full((24, 13), 2.0)
    weights[:, 0] = 1.0
    weights[:, -1] = 1.0
    e_spec = float(np.sum(weights[:, :, None] * np.abs(spec) ** 2)) / (24 * 24)
    e_img = float(np.sum(img ** 2))
    assert e_img == pytest.approx(e_spec, rel=1e-9)


def test_model_validation():
    with pytest.raises(LflcError):
        FDLModel((8, 8), np.array([0.5, 0.5]), np.zeros((8 * 5, 2, 3), complex))
    with pytest.raises(LflcError):
        FDLModel((8, 8), np.array([0.1, 0.5]), np.zeros((7, 2, 3), complex))


def test_calibrate_single_view_unidentifiable():
    rng = np.random.default_rng(7)
    view = bandlimited_texture(rng, 16, 16)
    init = CalibrationResult(np.array([[0.0, 0.0]]), np.array([0.123]), 0.0)
    out = calibrate(view[None], [(0.0, 0.0)], 1, init=init)
    assert not out.identifiable
    assert np.array_equal(out.disparities, init.disparities)
    assert np.array_equal(out.coords_uv, init.coords_uv)


def test_calibrate_recovers_single_disparity():
    _, coords, views = _planted_views(8)
    calib = calibrate(views, coords, 1, lam=1e-4, cfg=CalibConfig(max_iters=120))
    assert calib.identifiable
    assert abs(calib.disparities[0] - 0.7) <= 0.02


def test_calibrate_global_shift_ratio():
    # two views separated by a pure shift delta at angular spacing du: d = delta/du
    rng = np.random.default_rng(9)
    tex = bandlimited_texture(rng, 32, 32)
    delta, du = 1.2, 2.0
    views = np.stack([tex, fourier_shift(tex, (0.0, delta))])
    coords = np.array([[0.0, 0.0], [0.0, du]])
    calib = calibrate(views, coords, 1, lam=1e-4, cfg=CalibConfig(max_iters=150))
    assert abs(calib.disparities[0] - delta / du) <= 0.02


def test_calibrate_two_layers_sorted_recovery():
    rng = np.random.default_rng(10)
    t1 = bandlimited_texture(rng, 48, 48)
    t2 = bandlimited_texture(rng, 48, 48)
    d_true = (-0.5, 0.7)
    offsets = np.arange(5) - 2
    coords = np.stack([np.zeros(5), offsets.astype(float)], axis=1)
    views = np.stack([0.5 * fourier_shift(t1, (0, d_true[0] * u[1]))
                      + 0.5 * fourier_shift(t2, (0, d_true[1] * u[1])) for u in coords])
    calib = calibrate(views, coords, 2, lam=1e-4, cfg=CalibConfig(max_iters=200))
    assert np.all(np.diff(calib.disparities) > 0)
    assert np.allclose(calib.disparities, d_true, atol=0.05)


def test_calibrate_objective_nonincreasing():
    _, coords, views = _planted_views(11, h=24, w=24)
    trace = []
    calibrate(views, coords, 2, lam=1e-4, cfg=CalibConfig(max_iters=40),
              objective_trace=trace)
    assert len(trace) >= 2
    assert np.all(np.diff(trace) <= 0.0)


def test_calibrate_pins_central_view():
    _, coords, views = _planted_views(12, h=24, w=24)
    calib = calibrate(views, coords, 1, lam=1e-4, cfg=CalibConfig(max_iters=30))
    center = np.flatnonzero((coords[:, 0] == 0) & (coords[:, 1] == 0))[0]
    assert np.array_equal(calib.coords_uv[center], [0.0, 0.0])


def test_calibrate_deterministic():
    _, coords, views = _planted_views(13, h=24, w=24)
    cfg = CalibConfig(max_iters=25)
    a = calibrate(views, coords, 2, lam=1e-4, cfg=cfg)
    b = calibrate(views, coords, 2, lam=1e-4, cfg=cfg)
    assert np.array_equal(a.disparities, b.disparities)
    assert np.array_equal(a.coords_uv, b.coords_uv)


def test_calibrate_hann_window_runs_and_validates():
    # hann is an experimental taper; it changes the estimate (shift-model
    # mismatch) so only mechanics and determinism are asserted here
    _, coords, views = _planted_views(15)
    cfg = CalibConfig(max_iters=40, window="hann")
    a = calibrate(views, coords, 1, lam=1e-4, cfg=cfg)
    b = calibrate(views, coords, 1, lam=1e-4, cfg=cfg)
    assert a.identifiable and np.isfinite(a.disparities).all()
    assert np.array_equal(a.disparities, b.disparities)
    none = calibrate(views, coords, 1, lam=1e-4, cfg=CalibConfig(max_iters=40))
    assert not np.array_equal(none.disparities, a.disparities)
    with pytest.raises(LflcError):
        CalibConfig(window="kaiser")


def test_refit_keeps_residual_on_included_views_stable():
    # zero-disparity scene: every added identical view leaves the fit alone,
    # so per-view fitting MSE never rises beyond the regularization bias
    rng = np.random.default_rng(14)
    view = bandlimited_texture(rng, 24, 24)
    coords = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)]
    acc = FdlAccumulator((24, 24), np.array([-0.3, 0.3]), 1e-4)
    prev = None
    for i, u in enumerate(coords):
        acc.add_view(view, u)
        x = acc.solve()
        mse = float(np.mean((acc.synthesize(x, coords[0]) - view) ** 2))
        assert mse <= 1e-6
        if prev is not None:
            assert mse <= prev + 1e-6
        prev = mse
