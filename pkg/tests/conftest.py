"""Shared synthetic fixtures: layer-generated light fields and planted scenes."""

import numpy as np
import pytest

from lflc.layers import LayerStack, render_subset
from lflc.lightfield import LightField


def smooth_noise(rng, h, w, sigma=6.0, lo=0.2, hi=0.9):
    """Gaussian-filtered RGB noise rescaled into [lo, hi]."""
    noise = rng.standard_normal((h, w, 3))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    gauss = np.exp(-2.0 * (np.pi * sigma) ** 2 * (fy ** 2 + fx ** 2))
    out = np.real(np.fft.ifft2(np.fft.fft2(noise, axes=(0, 1)) * gauss[:, :, None],
                               axes=(0, 1)))
    out -= out.min()
    out /= max(out.max(), 1e-12)
    return lo + (hi - lo) * out


def bandlimited_texture(rng, h, w, fmax=0.08, lo=0.2, hi=0.8):
    """Noise texture whose spectrum is zero above fmax cycles/px per axis."""
    noise = rng.standard_normal((h, w, 3))
    fy = np.abs(np.fft.fftfreq(h))[:, None]
    fx = np.abs(np.fft.fftfreq(w))[None, :]
    mask = ((fy <= fmax) & (fx <= fmax)).astype(float)
    out = np.real(np.fft.ifft2(np.fft.fft2(noise, axes=(0, 1)) * mask[:, :, None],
                               axes=(0, 1)))
    out -= out.min()
    out /= max(out.max(), 1e-12)
    return lo + (hi - lo) * out


def fourier_shift(img, delta):
    """Circularly shift img so the result equals img evaluated at x + delta."""
    f1 = np.fft.fftfreq(img.shape[0])[:, None]
    f2 = np.fft.rfftfreq(img.shape[1])[None, :]
    phase = np.exp(2j * np.pi * (delta[0] * f1 + delta[1] * f2))
    return np.stack(
        [np.fft.irfft2(np.fft.rfft2(img[:, :, c]) * phase, s=img.shape[:2])
         for c in range(3)], axis=-1)


def random_stack(seed, h, w, pad=(1, 1), sigma=6.0):
    rng = np.random.default_rng(seed)
    vals = np.stack([smooth_noise(rng, h + 2 * pad[0], w + 2 * pad[1], sigma)
                     for _ in range(3)])
    return LayerStack(vals, (h, w))


def grid_coords(gs, gt):
    return [(s, t) for s in range(-(gs // 2), gs // 2 + 1)
            for t in range(-(gt // 2), gt // 2 + 1)]


def layer_lightfield(seed, gs, gt, h, w):
    """Light field rendered from a random LayerStack (exactly representable)."""
    stack = random_stack(seed, h, w, pad=(gs // 2, gt // 2))
    views = render_subset(stack, grid_coords(gs, gt))
    return LightField(views.reshape(gs, gt, h, w, 3))


def constant_lightfield(seed, gs, gt, h, w):
    """All views identical: a zero-disparity scene."""
    rng = np.random.default_rng(seed)
    view = smooth_noise(rng, h, w)
    views = np.broadcast_to(view, (gs, gt, h, w, 3)).copy()
    return LightField(views)


@pytest.fixture(scope="session")
def lf3():
    return layer_lightfield(11, 3, 3, 64, 64)


@pytest.fixture(scope="session")
def lf9():
    return layer_lightfield(21, 9, 9, 64, 64)


@pytest.fixture(scope="session")
def lf3_small():
    return layer_lightfield(31, 3, 3, 32, 32)
