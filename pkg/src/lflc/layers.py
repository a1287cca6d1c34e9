"""Multiplicative transmittance layers: rendering and direct optimization.

A view subset is represented by three light-attenuating layers at depths
z = -1, 0, +1.  Rendering a view at angular offset (s, t) translates layer z
by z*(s, t) and multiplies the three translated layers element-wise.  Layers
carry a padding margin so every translation used by the subset stays inside
the layer arrays.

The optimizer fits layer pixels directly: parameters live in an unbounded
domain and are squashed through a logistic so transmittances stay in (0, 1),
and plain gradient descent with backtracking line search minimizes the mean
squared reconstruction error over the subset.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import LflcError, TranslationOutOfBounds
from .patterns import ViewSubset

Z_ORDER = (-1, 0, 1)


@dataclass(frozen=True)
class LayerStack:
    """Three layers (z = -1, 0, +1) as one (3, H', W', 3) array in [0, 1]."""

    values: np.ndarray
    view_shape: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 4 or v.shape[0] != 3 or v.shape[3] != 3:
            raise LflcError(f"expected a (3, H', W', 3) layer array, got {v.shape}")
        h, w = self.view_shape
        if (v.shape[1] - h) % 2 or (v.shape[2] - w) % 2 or v.shape[1] < h or v.shape[2] < w:
            raise LflcError(
                f"layer dims {v.shape[1:3]} incompatible with view dims {(h, w)}")
        if float(v.min()) < 0.0 or float(v.max()) > 1.0:
            raise LflcError("layer values must lie in [0, 1]")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "view_shape", (int(h), int(w)))

    @property
    def pad(self):
        return ((self.values.shape[1] - self.view_shape[0]) // 2,
                (self.values.shape[2] - self.view_shape[1]) // 2)

    def layer(self, z):
        return self.values[Z_ORDER.index(z)]


def _view_slices(s, t, view_shape, pad):
    """Per-layer (row, col) slices implementing the z*(s, t) translations."""
    h, w = view_shape
    ps, pt = pad
    if abs(s) > ps or abs(t) > pt:
        raise TranslationOutOfBounds(
            f"translation ({s},{t}) exceeds layer padding ({ps},{pt})")
    return [(slice(ps + z * s, ps + z * s + h), slice(pt + z * t, pt + z * t + w))
            for z in Z_ORDER]


def render_view(stack: LayerStack, s: int, t: int):
    """Product of the three translated layers, cropped to the view window."""
    sl = _view_slices(s, t, stack.view_shape, stack.pad)
    v = stack.values
    return v[0][sl[0]] * v[1][sl[1]] * v[2][sl[2]]


def render_subset(stack: LayerStack, coords):
    """render_view for each coordinate, order preserved; returns (V, H, W, 3)."""
    return np.stack([render_view(stack, s, t) for s, t in coords])


def reconstruction_loss_and_grad(layer_values, targets, coords, view_shape):
    """MSE between rendered and target views, with its gradient by product rule.

    layer_values is the raw (3, H', W', 3) array (no squashing applied);
    the gradient has the same shape.  Shared by the optimizer and by the
    finite-difference verification in the test suite.
    """
    h, w = view_shape
    ps = (layer_values.shape[1] - h) // 2
    pt = (layer_values.shape[2] - w) // 2
    grad = np.zeros_like(layer_values)
    n = targets.size
    loss = 0.0
    for i, (s, t) in enumerate(coords):
        sl = _view_slices(s, t, (h, w), (ps, pt))
        a = layer_values[0][sl[0]]
        b = layer_values[1][sl[1]]
        c = layer_values[2][sl[2]]
        ab = a * b
        r = ab * c - targets[i]
        loss += float(np.sum(r * r))
        r2 = (2.0 / n) * r
        grad[0][sl[0]] += r2 * b * c
        grad[1][sl[1]] += r2 * a * c
        grad[2][sl[2]] += r2 * ab
    return loss / n, grad


def _loss_only(layer_values, targets, coords, view_shape):
    h, w = view_shape
    ps = (layer_values.shape[1] - h) // 2
    pt = (layer_values.shape[2] - w) // 2
    n = targets.size
    loss = 0.0
    for i, (s, t) in enumerate(coords):
        sl = _view_slices(s, t, (h, w), (ps, pt))
        r = layer_values[0][sl[0]] * layer_values[1][sl[1]] * layer_values[2][sl[2]] - targets[i]
        loss += float(np.sum(r * r))
    return loss / n


@dataclass(frozen=True)
class LayerOptConfig:
    max_iters: int = 2000
    step_size: float = 25.0
    plateau_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise LflcError("max_iters must be >= 1")
        if self.step_size <= 0:
            raise LflcError("step_size must be positive")


def subset_padding(coords):
    """Layer padding needed so every subset translation stays in bounds."""
    return (max(abs(s) for s, t in coords), max(abs(t) for s, t in coords))


def optimize_layers(subset: ViewSubset, cfg: LayerOptConfig = LayerOptConfig(),
                    loss_trace=None) -> LayerStack:
    """Fit a LayerStack to the subset by gradient descent on reconstruction MSE.

    Deterministic for a fixed (subset, cfg): the parameter init derives from
    cfg.seed and the line search accepts only non-increasing losses, halving
    the step on failure and growing it gently on success.  Stops at
    cfg.max_iters or when the relative loss drop falls below cfg.plateau_tol.
    loss_trace, when a list, receives the loss of every accepted iterate.
    """
    if len(subset.coords) == 0:
        raise LflcError("subset must contain at least one view")
    targets = np.asarray(subset.views, dtype=np.float64)
    coords = subset.coords
    h, w = subset.view_shape
    ps, pt = subset_padding(coords)
    shape = (3, h + 2 * ps, w + 2 * pt, 3)

    rng = np.random.default_rng(cfg.seed)
    chan_mean = targets.mean(axis=(0, 1, 2))
    base = logit(np.clip(np.cbrt(chan_mean), 1e-3, 1.0 - 1e-3))
    params = np.broadcast_to(base, shape).copy()
    params += 0.01 * rng.standard_normal(shape)

    values = expit(params)
    loss, grad_v = reconstruction_loss_and_grad(values, targets, coords, (h, w))
    grad = grad_v * values * (1.0 - values)
    step = cfg.step_size
    if loss_trace is not None:
        loss_trace.append(loss)

    for _ in range(cfg.max_iters):
        while True:
            cand = params - step * grad
            cand_values = expit(cand)
            cand_loss = _loss_only(cand_values, targets, coords, (h, w))
            if cand_loss <= loss:
                break
            step *= 0.5
            if step < 1e-12:
                break
        if step < 1e-12:
            break
        drop = loss - cand_loss
        params, values, loss = cand, cand_values, cand_loss
        if loss_trace is not None:
            loss_trace.append(loss)
        if drop <= cfg.plateau_tol * max(loss, 1e-30):
            break
        _, grad_v = reconstruction_loss_and_grad(values, targets, coords, (h, w))
        grad = grad_v * values * (1.0 - values)
        step *= 1.25

    return LayerStack(values, (h, w))


def dump_layers(stack: LayerStack, directory, prefix="layer"):
    """Debug dump: one 8-bit PNG per layer, named by depth index."""
    import os

    import imageio.v3 as iio

    os.makedirs(directory, exist_ok=True)
    paths = []
    for z in Z_ORDER:
        img = np.clip(np.rint(stack.layer(z) * 255.0), 0, 255).astype(np.uint8)
        path = os.path.join(directory, f"{prefix}_z{z:+d}.png")
        iio.imwrite(path, img)
        paths.append(path)
    return paths
