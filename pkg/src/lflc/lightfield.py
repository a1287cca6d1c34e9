"""Light-field data model, disk ingestion and YUV-PSNR quality metric.

A light field is a complete odd-sided grid of RGB views indexed by angular
coordinates (s, t), s and t running symmetrically about the central view
(0, 0).  Spatial pixel coordinates inside a view are (u, v) = (row, col).
"""

import math
import os
import re
from dataclasses import dataclass, field

import imageio.v3 as iio
import numpy as np

from .errors import DimensionMismatch, MissingView, UnparseableName

# BT.709 analog luma/chroma weights used by the quality metric.
_BT709_KR, _BT709_KG, _BT709_KB = 0.2126, 0.7152, 0.0722


@dataclass(frozen=True)
class LightField:
    """Immutable grid of views, shape (grid_s, grid_t, H, W, 3), values in [0, 1]."""

    views: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.views, dtype=np.float64)
        if v.ndim != 5 or v.shape[4] != 3:
            raise DimensionMismatch(f"expected (gs, gt, H, W, 3) array, got {v.shape}")
        if v.shape[0] % 2 == 0 or v.shape[1] % 2 == 0:
            raise DimensionMismatch(f"angular grid must be odd-sided, got {v.shape[:2]}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "views", v)

    @property
    def grid_shape(self):
        return self.views.shape[0], self.views.shape[1]

    @property
    def view_shape(self):
        return self.views.shape[2], self.views.shape[3]

    @property
    def s_radius(self):
        return self.views.shape[0] // 2

    @property
    def t_radius(self):
        return self.views.shape[1] // 2

    def view(self, s, t):
        """Return the (H, W, 3) view at angular coordinate (s, t)."""
        gs, gt = self.grid_shape
        if not (-self.s_radius <= s <= self.s_radius and -self.t_radius <= t <= self.t_radius):
            raise MissingView(s, t)
        return self.views[s + self.s_radius, t + self.t_radius]

    def coords(self):
        """All angular coordinates in grid row-major order (s outer, t inner)."""
        return [(s, t)
                for s in range(-self.s_radius, self.s_radius + 1)
                for t in range(-self.t_radius, self.t_radius + 1)]

    def center_crop(self, grid_s, grid_t):
        """Keep the central grid_s x grid_t views."""
        if grid_s % 2 == 0 or grid_t % 2 == 0:
            raise DimensionMismatch("crop grid must be odd-sided")
        gs, gt = self.grid_shape
        if grid_s > gs or grid_t > gt:
            raise DimensionMismatch(f"crop {grid_s}x{grid_t} exceeds grid {gs}x{gt}")
        o_s = (gs - grid_s) // 2
        o_t = (gt - grid_t) // 2
        return LightField(self.views[o_s:o_s + grid_s, o_t:o_t + grid_t])


def _layout_regex(layout):
    """Compile a filename layout like 'view_{row}_{col}.png' into a regex."""
    if "{row}" not in layout or "{col}" not in layout:
        raise UnparseableName(f"layout {layout!r} must contain {{row}} and {{col}} tokens")
    pattern = ""
    for piece in re.split(r"(\{row\}|\{col\})", layout):
        if piece == "{row}":
            pattern += r"(?P<row>\d+)"
        elif piece == "{col}":
            pattern += r"(?P<col>\d+)"
        else:
            pattern += re.escape(piece)
    return re.compile("^" + pattern + "$")


def load_lightfield(root_path, layout="view_{row}_{col}.png", crop=None):
    """Load one image per view from a directory into a LightField.

    layout names the files with 0-based {row} (s axis) and {col} (t axis)
    tokens.  Pixel values are normalized to [0, 1].  crop, when given as
    (grid_s, grid_t), keeps only the central views after loading.
    """
    rx = _layout_regex(layout)
    found = {}
    for name in sorted(os.listdir(root_path)):
        m = rx.match(name)
        if m is None:
            continue
        found[(int(m.group("row")), int(m.group("col")))] = os.path.join(root_path, name)
    if not found:
        raise UnparseableName(f"no files in {root_path!r} match layout {layout!r}")

    rows = sorted({rc[0] for rc in found})
    cols = sorted({rc[1] for rc in found})
    if len(rows) % 2 == 0 or len(cols) % 2 == 0:
        raise DimensionMismatch(
            f"grid inferred from filenames is {len(rows)}x{len(cols)}; both sides must be odd")

    srad, trad = len(rows) // 2, len(cols) // 2
    shape = None
    grid = None
    for ri, row in enumerate(range(min(rows), min(rows) + len(rows))):
        for ci, col in enumerate(range(min(cols), min(cols) + len(cols))):
            path = found.get((row, col))
            if path is None:
                raise MissingView(row - min(rows) - srad, col - min(cols) - trad)
            img = iio.imread(path)
            if img.ndim == 2:
                img = np.repeat(img[:, :, None], 3, axis=2)
            img = img[:, :, :3]
            if shape is None:
                shape = img.shape
                grid = np.empty((len(rows), len(cols)) + shape, dtype=np.float64)
            elif img.shape != shape:
                raise DimensionMismatch(
                    f"view {path!r} has shape {img.shape}, expected {shape}")
            peak = 65535.0 if img.dtype == np.uint16 else 255.0
            grid[ri, ci] = img.astype(np.float64) / peak

    lf = LightField(grid)
    if crop is not None:
        lf = lf.center_crop(*crop)
    return lf


def save_lightfield(lf, root_path, layout="view_{row}_{col}.png"):
    """Write each view as an 8-bit image; inverse of load_lightfield."""
    os.makedirs(root_path, exist_ok=True)
    gs, gt = lf.grid_shape
    for ri in range(gs):
        for ci in range(gt):
            name = layout.replace("{row}", str(ri)).replace("{col}", str(ci))
            img = np.clip(np.rint(lf.views[ri, ci] * 255.0), 0, 255).astype(np.uint8)
            iio.imwrite(os.path.join(root_path, name), img)


def rgb_to_yuv709(rgb):
    """Analog BT.709 RGB -> (Y, U, V) planes; chroma zero-centred."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = _BT709_KR * r + _BT709_KG * g + _BT709_KB * b
    u = (b - y) / 1.8556
    v = (r - y) / 1.5748
    return y, u, v


def _plane_psnr(a, b):
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


@dataclass(frozen=True)
class PsnrReport:
    """Per-view PSNR triples plus the weighted aggregate in dB."""

    per_view: list = field(default_factory=list)  # (s, t, psnr_y, psnr_u, psnr_v, weighted)
    aggregate: float = math.inf


def yuv_psnr(reference, test, weights=(6.0, 1.0, 1.0)):
    """YUV-PSNR between two light fields of identical dimensions.

    Per view, PSNR is computed on the BT.709 Y/U/V planes and combined as
    (wY*Y + wU*U + wV*V) / sum(w); the aggregate is the mean over views.
    Identical inputs produce the +inf sentinel.
    """
    if reference.views.shape != test.views.shape:
        raise DimensionMismatch(
            f"reference {reference.views.shape} vs test {test.views.shape}")
    wsum = float(sum(weights))
    per_view = []
    agg = 0.0
    for s, t in reference.coords():
        ry, ru, rv = rgb_to_yuv709(reference.view(s, t))
        ty, tu, tv = rgb_to_yuv709(test.view(s, t))
        py, pu, pv = _plane_psnr(ry, ty), _plane_psnr(ru, tu), _plane_psnr(rv, tv)
        w = (weights[0] * py + weights[1] * pu + weights[2] * pv) / wsum
        per_view.append((s, t, py, pu, pv, w))
        agg += w
    return PsnrReport(per_view, agg / len(per_view))
