"""Fourier disparity layers: calibration, fitting, synthesis, hierarchical coding.

A light field is modelled as n depth layers with disparities d_k; the view
at angular coordinate u has spectrum sum_k exp(+2i*pi*d_k*(u . f)) * X_k(f),
where X_k is the layer spectrum and f the 2-D spatial frequency.  Fitting is
a Tikhonov-regularized least-squares problem solved independently per
frequency; real views let us work on the half-plane rFFT grid.

The hierarchical coder seeds the regression with Subset 1, then walks
Subset 2 in coding order: synthesize a prediction, code the residual, add
the reconstructed view back into the regression, repeat.  Encoder and
decoder share the same loop, so their reconstructions are bit-identical.
"""

import math
from dataclasses import dataclass

import numpy as np

from .codec import CodecId, decode_layers, decode_residual, encode_residual
from .container import LfcContainer, pack_metadata, unpack_metadata
from .errors import CorruptPayload, LflcError, SingularSystem
from .layers import render_subset
from .lightfield import LightField
from .patterns import PredictionPattern, ViewSubset, merge_subsets, partition_views

DEFAULT_LAMBDA = 1e-4
DEFAULT_LAYER_COUNT = 30
_TWO_PI_I = 2j * np.pi


def _freq_axes(view_shape):
    h, w = view_shape
    return np.fft.fftfreq(h), np.fft.rfftfreq(w)


def phase_rows(f1, f2, disparities, u):
    """(F, n) matrix of exp(2i*pi*d_k*(u . f)) over the flattened rFFT grid."""
    e1 = np.exp(_TWO_PI_I * u[0] * np.outer(f1, disparities))
    e2 = np.exp(_TWO_PI_I * u[1] * np.outer(f2, disparities))
    return (e1[:, None, :] * e2[None, :, :]).reshape(-1, len(disparities))


def _views_spectra(views):
    """rFFT of each channel of each view, flattened to (m, F, 3)."""
    views = np.asarray(views, dtype=np.float64)
    m = views.shape[0]
    spec = np.stack(
        [np.fft.rfft2(views[:, :, :, ch]).reshape(m, -1) for ch in range(3)], axis=-1)
    return spec


class FdlAccumulator:
    """Per-frequency normal equations for a fixed disparity set.

    Views are added one at a time in a fixed order; solve() returns the
    regularized layer spectra for the views seen so far.  The effective
    Tikhonov weight is lam times the current view count, keeping the
    regularization strength independent of how many views are in the fit.
    """

    def __init__(self, view_shape, disparities, lam):
        self.view_shape = tuple(view_shape)
        self.d = np.asarray(disparities, dtype=np.float64)
        self.lam = float(lam)
        self.f1, self.f2 = _freq_axes(view_shape)
        n = len(self.d)
        nfreq = len(self.f1) * len(self.f2)
        self.gram = np.zeros((nfreq, n, n), dtype=np.complex128)
        self.rhs = np.zeros((nfreq, n, 3), dtype=np.complex128)
        self.count = 0

    def add_view(self, view, u):
        rows = phase_rows(self.f1, self.f2, self.d, u)
        self.gram += rows.conj()[:, :, None] * rows[:, None, :]
        spec = _views_spectra(view[None])[0]
        self.rhs += rows.conj()[:, :, None] * spec[:, None, :]
        self.count += 1

    def solve(self):
        n = len(self.d)
        lam_eff = self.lam * max(self.count, 1)
        lhs = self.gram + lam_eff * np.eye(n)[None]
        try:
            return np.linalg.solve(lhs, self.rhs)
        except np.linalg.LinAlgError:
            raise SingularSystem(
                "per-frequency normal equations singular (lam=0 with too few views?)") from None

    def synthesize(self, spectra, u):
        rows = phase_rows(self.f1, self.f2, self.d, u)
        spec = np.einsum("fk,fkc->fc", rows, spectra)
        h, w = self.view_shape
        shape2d = (len(self.f1), len(self.f2))
        return np.stack(
            [np.fft.irfft2(spec[:, ch].reshape(shape2d), s=(h, w)) for ch in range(3)],
            axis=-1)


@dataclass(frozen=True)
class FDLModel:
    """Fitted disparity-layer spectra on the rFFT grid of one view."""

    view_shape: tuple
    disparities: np.ndarray   # (n,) strictly increasing
    spectra: np.ndarray       # (F, n, 3) complex

    def __post_init__(self):
        d = np.asarray(self.disparities, dtype=np.float64)
        if d.ndim != 1 or d.size < 1:
            raise LflcError("disparities must be a non-empty vector")
        if np.any(np.diff(d) <= 0):
            raise LflcError("disparities must be strictly increasing")
        h, w = self.view_shape
        nfreq = h * (w // 2 + 1)
        if self.spectra.shape != (nfreq, d.size, 3):
            raise LflcError(
                f"spectra shape {self.spectra.shape} inconsistent with "
                f"{d.size} layers on a {h}x{w} view")
        object.__setattr__(self, "disparities", d)


def fit_fdl(views, coords_uv, disparities, lam=DEFAULT_LAMBDA) -> FDLModel:
    """Per-frequency Tikhonov regression of layer spectra onto the views.

    coords_uv holds one angular coordinate pair per view.  lam = 0 is allowed
    but raises SingularSystem when a frequency's normal matrix is singular.
    """
    views = np.asarray(views, dtype=np.float64)
    coords_uv = np.asarray(coords_uv, dtype=np.float64)
    if len(views) < 1:
        raise LflcError("need at least one view")
    if coords_uv.shape != (len(views), 2):
        raise LflcError(f"coords shape {coords_uv.shape} does not match {len(views)} views")
    acc = FdlAccumulator(views.shape[1:3], disparities, lam)
    for view, u in zip(views, coords_uv):
        acc.add_view(view, u)
    return FDLModel(acc.view_shape, acc.d, acc.solve())


def synthesize_view(model: FDLModel, u_o):
    """Phase-shift the layer spectra to u_o, sum, inverse FFT, clamp to [0, 1]."""
    f1, f2 = _freq_axes(model.view_shape)
    rows = phase_rows(f1, f2, model.disparities, np.asarray(u_o, dtype=np.float64))
    spec = np.einsum("fk,fkc->fc", rows, model.spectra)
    h, w = model.view_shape
    img = np.stack(
        [np.fft.irfft2(spec[:, ch].reshape(len(f1), len(f2)), s=(h, w)) for ch in range(3)],
        axis=-1)
    return np.clip(img, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibConfig:
    max_iters: int = 60
    step_size: float = 0.05      # initial step in parameter units (normalized direction)
    plateau_tol: float = 1e-10   # relative objective drop that counts as converged
    freq_limit: float | None = None  # optional |f| cap (cycles/px) for the objective
    anchor_weight: float = 1e-3  # soft pull of coordinates toward their nominal grid
    d_range: tuple = (-2.0, 2.0)
    # "none" | "hann": taper views before the calibration FFTs.  The default
    # is the plain periodic FFT; hann is experimental and trades wrap-around
    # leakage against shift-model mismatch (content moves under the taper),
    # which biases disparities toward zero on translation-built scenes.
    window: str = "none"

    def __post_init__(self):
        if self.window not in ("none", "hann"):
            raise LflcError(f"unknown window {self.window!r}")


@dataclass(frozen=True)
class CalibrationResult:
    coords_uv: np.ndarray     # (V, 2) per-view angular coordinates
    disparities: np.ndarray   # (n,) sorted ascending
    residual_energy: float
    identifiable: bool = True


def _default_disparities(n, d_range):
    lo, hi = d_range
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _strictify(d):
    d = np.sort(np.asarray(d, dtype=np.float64))
    for i in range(1, d.size):
        if d[i] <= d[i - 1]:
            d[i] = np.nextafter(d[i - 1], math.inf)
    return d


def calibrate(views, nominal_coords, n_layers, lam=DEFAULT_LAMBDA,
              init: CalibrationResult | None = None,
              cfg: CalibConfig = CalibConfig(), objective_trace=None) -> CalibrationResult:
    """Estimate per-view angular coordinates and layer disparities.

    Minimizes the per-frequency regression objective (residual plus its
    Tikhonov term, layer spectra eliminated through the regularized normal
    equations) over the coordinates and disparities by gradient descent with
    a backtracking line search.  The gradient through the eliminated spectra
    vanishes at the inner optimum, so only the phase-matrix derivative is
    needed.  The view whose nominal coordinate is the grid origin is pinned
    there, and a soft anchor toward nominal coordinates fixes the remaining
    coordinate/disparity scale ambiguity.

    A single view is unidentifiable: the init (or the nominal setup) is
    returned unchanged with identifiable=False.
    """
    views = np.asarray(views, dtype=np.float64)
    nominal = np.asarray(nominal_coords, dtype=np.float64)
    m = views.shape[0]
    if n_layers < 1:
        raise LflcError("need at least one layer")

    if init is not None:
        u0 = np.asarray(init.coords_uv, dtype=np.float64).copy()
        d0 = _strictify(init.disparities)
    else:
        u0 = nominal.copy()
        d0 = _default_disparities(n_layers, cfg.d_range)
    if d0.size != n_layers:
        raise LflcError(f"init has {d0.size} disparities, expected {n_layers}")

    if m < 2:
        return CalibrationResult(u0, _strictify(d0), 0.0, identifiable=False)

    if cfg.window == "hann":
        taper = np.outer(np.hanning(views.shape[1]), np.hanning(views.shape[2]))
        views = views * taper[None, :, :, None]
    spectra = _views_spectra(views)           # (m, F, 3)
    f1, f2 = _freq_axes(views.shape[1:3])
    fvec = np.stack(np.meshgrid(f1, f2, indexing="ij"), axis=-1).reshape(-1, 2)
    if cfg.freq_limit is not None:
        keep = np.max(np.abs(fvec), axis=1) <= cfg.freq_limit
        fvec = fvec[keep]
        spectra = spectra[:, keep, :]
    bt = spectra.transpose(1, 0, 2)            # (F, m, 3)
    lam_eff = lam * m
    anchor = cfg.anchor_weight * float(np.sum(np.abs(spectra) ** 2)) / m
    pin = np.flatnonzero((nominal[:, 0] == 0) & (nominal[:, 1] == 0))
    eye = np.eye(n_layers)

    def objective_and_grad(u, d):
        ps = u @ fvec.T                                        # (m, F)
        p = np.exp(_TWO_PI_I * ps[:, :, None] * d[None, None, :])
        pt = p.transpose(1, 0, 2)                              # (F, m, n)
        pth = pt.conj().transpose(0, 2, 1)                     # (F, n, m)
        gram = pth @ pt
        rhs = pth @ bt
        try:
            x = np.linalg.solve(gram + lam_eff * eye[None], rhs)
        except np.linalg.LinAlgError:
            raise SingularSystem("calibration normal equations singular") from None
        r = pt @ x - bt                                        # (F, m, 3)
        obj = float(np.sum(np.abs(r) ** 2) + lam_eff * np.sum(np.abs(x) ** 2))
        obj += anchor * float(np.sum((u - nominal) ** 2))

        y = (r.conj() @ x.transpose(0, 2, 1)) * pt             # (F, m, n)
        gd = -4.0 * np.pi * np.imag(np.einsum("fmk,fm->k", y, ps.T))
        gu = -4.0 * np.pi * np.imag(
            np.einsum("fmk,fa,k->ma", y, fvec, d, optimize=True))
        gu += 2.0 * anchor * (u - nominal)
        gu[pin] = 0.0
        return obj, gu, gd

    u, d = u0, d0
    obj, gu, gd = objective_and_grad(u, d)
    if objective_trace is not None:
        objective_trace.append(obj)
    step = cfg.step_size
    for _ in range(cfg.max_iters):
        norm = math.sqrt(float(np.sum(gu ** 2) + np.sum(gd ** 2)))
        if norm == 0.0:
            break
        du, dd = gu / norm, gd / norm
        while True:
            cand_obj, cand_gu, cand_gd = objective_and_grad(u - step * du, d - step * dd)
            if cand_obj <= obj:
                break
            step *= 0.5
            if step < 1e-7:
                break
        if step < 1e-7:
            break
        u = u - step * du
        d = d - step * dd
        drop = obj - cand_obj
        obj, gu, gd = cand_obj, cand_gu, cand_gd
        if objective_trace is not None:
            objective_trace.append(obj)
        step *= 1.3
        if drop <= cfg.plateau_tol * max(obj, 1e-30):
            break

    residual = obj - anchor * float(np.sum((u - nominal) ** 2))
    return CalibrationResult(u, _strictify(d), residual, identifiable=True)


# ---------------------------------------------------------------------------
# Hierarchical predict / residual / refine coding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HierarchicalStreams:
    """Sections contributed by the hierarchical stage, plus encoder state."""

    metadata: bytes
    residual_payloads: tuple
    calibration: CalibrationResult
    reconstruction: LightField


def _coord_index(coord, grid_shape):
    s, t = coord
    gs, gt = grid_shape
    return (s + gs // 2) * gt + (t + gt // 2)


def _subset2_pass(view_shape, disparities, lam, views1, u1, u2, *,
                  targets=None, payloads=None, qp=None,
                  codec_id=CodecId.FALLBACK_QDCT, hevc=None):
    """Shared encoder/decoder loop over Subset 2 in coding order.

    With targets given, residuals are computed and encoded; with payloads
    given, they are decoded.  Either way each reconstructed view feeds back
    into the regression before the next prediction, so both sides follow
    numerically identical state.
    """
    acc = FdlAccumulator(view_shape, disparities, lam)
    for view, u in zip(views1, u1):
        acc.add_view(view, u)
    out_payloads = []
    recon = []
    for i, u in enumerate(u2):
        prediction = np.clip(acc.synthesize(acc.solve(), u), 0.0, 1.0)
        if targets is not None:
            residual = targets[i] - prediction
            payload = encode_residual(residual[None], qp, codec_id, hevc)
        else:
            payload = payloads[i]
        decoded = decode_residual(payload, codec_id, hevc)[0]
        view = np.clip(prediction + decoded, 0.0, 1.0)
        acc.add_view(view, u)
        out_payloads.append(payload)
        recon.append(view)
    return out_payloads, recon


def hierarchical_encode(approx_lf: LightField, pattern: PredictionPattern, qp,
                        codec_id=CodecId.FALLBACK_QDCT, lam=DEFAULT_LAMBDA,
                        n_layers=DEFAULT_LAYER_COUNT,
                        calib_cfg: CalibConfig = CalibConfig(),
                        residual_qp_offset=6, hevc=None) -> HierarchicalStreams:
    """Hierarchical stage of the encoder, run on the approximated light field.

    approx_lf must be the closed-loop reconstruction (its Subset 1 views equal
    what the decoder will render from the coded layers).  Calibration runs
    over the full grid and is shipped as metadata; Subset 2 views are then
    predicted, residual-coded in coding order, and folded back into the fit.
    Residual payloads are coded at qp + residual_qp_offset (clamped to 51),
    the usual coarser setting for predicted frames; each payload records its
    own qp, so the decoder needs no extra signalling.  Returns metadata and
    residual payloads plus the encoder reconstruction the decoder output
    must match bit for bit.
    """
    nominal = np.asarray(approx_lf.coords(), dtype=np.float64)
    flat_views = approx_lf.views.reshape((-1,) + approx_lf.views.shape[2:])
    calib = calibrate(flat_views, nominal, n_layers, lam, cfg=calib_cfg)

    metadata = pack_metadata(calib.coords_uv, calib.disparities)
    u_all, disparities = unpack_metadata(metadata, len(nominal))

    sub1, sub2 = partition_views(approx_lf, pattern)
    u1 = u_all[[_coord_index(c, approx_lf.grid_shape) for c in sub1.coords]]
    u2 = u_all[[_coord_index(c, approx_lf.grid_shape) for c in sub2.coords]]

    qp_res = min(int(qp) + residual_qp_offset, 51)
    payloads, recon2 = _subset2_pass(
        approx_lf.view_shape, disparities, lam, sub1.views, u1, u2,
        targets=sub2.views, qp=qp_res, codec_id=codec_id, hevc=hevc)

    recon = merge_subsets(
        sub1, ViewSubset(sub2.parent_grid, sub2.view_shape, sub2.coords, np.stack(recon2)))
    return HierarchicalStreams(metadata, tuple(payloads), calib, recon)


def hierarchical_decode(container: LfcContainer, pattern: PredictionPattern,
                        hevc=None) -> LightField:
    """Mirror of the encoder: decode layers, refit, predict, add residuals."""
    hdr = container.header
    gs, gt = hdr.grid_shape
    if (pattern.grid_s, pattern.grid_t) != (gs, gt):
        raise CorruptPayload(
            f"pattern grid {pattern.grid_s}x{pattern.grid_t} does not match "
            f"container grid {gs}x{gt}")
    if len(container.residuals) != len(pattern.order2):
        raise CorruptPayload(
            f"{len(container.residuals)} residual sections for "
            f"{len(pattern.order2)} predicted views")

    codec_id = CodecId(hdr.codec_id)
    stack1 = decode_layers(container.layers_subset1, hdr.view_shape, codec_id, hevc)
    views1 = render_subset(stack1, pattern.order1)

    u_all, disparities = unpack_metadata(container.metadata, gs * gt)
    u1 = u_all[[_coord_index(c, (gs, gt)) for c in pattern.order1]]
    u2 = u_all[[_coord_index(c, (gs, gt)) for c in pattern.order2]]

    _, recon2 = _subset2_pass(
        hdr.view_shape, disparities, hdr.fdl_lambda, views1, u1, u2,
        payloads=container.residuals, codec_id=codec_id, hevc=hevc)

    sub1 = ViewSubset((gs, gt), hdr.view_shape, pattern.order1, views1)
    sub2 = ViewSubset((gs, gt), hdr.view_shape, pattern.order2, np.stack(recon2))
    return merge_subsets(sub1, sub2)
