"""View-subset prediction patterns and the spiral coding order.

Two bundled schemes split a grid into Subset 1 (coded directly) and
Subset 2 (predicted): H2 is the alternate-view checkerboard whose even
parity cells, central view included, form Subset 1; C2 keeps a circle of
views (plus the centre) in Subset 1 and is shipped as editable JSON data
because its membership is a convention, not a derivation.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, LflcError
from .lightfield import LightField

KIND_CUSTOM = "custom"
KIND_C2 = "c2"
KIND_H2 = "h2"

_DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def spiral_order(dims, membership):
    """Deterministic center-out coding order over a set of grid coordinates.

    dims is (grid_s, grid_t); membership a collection of (s, t) coordinates
    with s in [-grid_s//2, grid_s//2] and likewise for t.  Members are
    visited ring by ring in non-decreasing Chebyshev distance from (0, 0);
    within a ring the walk runs clockwise (right along the top row, down the
    right column, left along the bottom, up the left column) starting at the
    member with smallest s, then smallest t.
    """
    members = set(membership)
    if not members:
        raise LflcError("membership must be non-empty")
    gs, gt = dims
    srad, trad = gs // 2, gt // 2
    for s, t in members:
        if abs(s) > srad or abs(t) > trad:
            raise DimensionMismatch(f"coordinate ({s},{t}) outside {gs}x{gt} grid")

    order = []
    for ring in range(0, max(srad, trad) + 1):
        cells = _ring_cells(ring, srad, trad)
        present = [c for c in cells if c in members]
        if not present:
            continue
        first = min(present)  # smallest s, then smallest t
        k = cells.index(first)
        walk = cells[k:] + cells[:k]
        order.extend(c for c in walk if c in members)
    return order


def _ring_cells(ring, srad, trad):
    """Clockwise enumeration of the Chebyshev ring at distance `ring`,
    clipped to the grid, starting at the top-left corner."""
    if ring == 0:
        return [(0, 0)]
    cells = []
    for t in range(-ring, ring + 1):          # top row, left to right
        cells.append((-ring, t))
    for s in range(-ring + 1, ring + 1):      # right column, downwards
        cells.append((s, ring))
    for t in range(ring - 1, -ring - 1, -1):  # bottom row, right to left
        cells.append((ring, t))
    for s in range(ring - 1, -ring, -1):      # left column, upwards
        cells.append((s, -ring))
    return [(s, t) for s, t in cells if abs(s) <= srad and abs(t) <= trad]


@dataclass(frozen=True)
class PredictionPattern:
    """Partition of the angular grid into two subsets plus coding orders."""

    kind: str
    grid_s: int
    grid_t: int
    labels: np.ndarray  # (grid_s, grid_t) uint8 of 1 / 2
    order1: tuple
    order2: tuple

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.uint8)
        if lab.shape != (self.grid_s, self.grid_t):
            raise DimensionMismatch("label grid does not match declared dims")
        if not np.all((lab == 1) | (lab == 2)):
            raise LflcError("labels must be 1 (Subset 1) or 2 (Subset 2)")
        lab = lab.copy()
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "order1", tuple(map(tuple, self.order1)))
        object.__setattr__(self, "order2", tuple(map(tuple, self.order2)))
        for which, order in ((1, self.order1), (2, self.order2)):
            want = set(self.members(which))
            if set(order) != want or len(order) != len(want):
                raise LflcError(f"order{which} is not a permutation of subset {which}")

    def members(self, which):
        srad, trad = self.grid_s // 2, self.grid_t // 2
        idx = np.argwhere(self.labels == which)
        return [(int(s) - srad, int(t) - trad) for s, t in idx]

    def label(self, s, t):
        return int(self.labels[s + self.grid_s // 2, t + self.grid_t // 2])


def h2_pattern(grid_s, grid_t):
    """Alternate-view checkerboard; the parity class containing (0,0) is Subset 1."""
    srad, trad = grid_s // 2, grid_t // 2
    labels = np.empty((grid_s, grid_t), dtype=np.uint8)
    for si in range(grid_s):
        for ti in range(grid_t):
            s, t = si - srad, ti - trad
            labels[si, ti] = 1 if (s + t) % 2 == 0 else 2
    return _pattern_from_labels(KIND_H2, grid_s, grid_t, labels)


def _pattern_from_labels(kind, grid_s, grid_t, labels, order1=None, order2=None):
    srad, trad = grid_s // 2, grid_t // 2
    mem1 = [(si - srad, ti - trad) for si, ti in np.argwhere(labels == 1)]
    mem2 = [(si - srad, ti - trad) for si, ti in np.argwhere(labels == 2)]
    o1 = order1 if order1 is not None else spiral_order((grid_s, grid_t), mem1)
    o2 = order2 if order2 is not None else spiral_order((grid_s, grid_t), mem2)
    return PredictionPattern(kind, grid_s, grid_t, labels, o1, o2)


def load_pattern_file(path):
    """Read a pattern definition from JSON text.

    Expected keys: kind, grid [gs, gt], membership (list of row strings of
    '1'/'2'), optional order1/order2 as [s, t] pairs overriding the spiral.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    gs, gt = int(doc["grid"][0]), int(doc["grid"][1])
    rows = doc["membership"]
    if len(rows) != gs or any(len(r) != gt for r in rows):
        raise DimensionMismatch(f"membership rows do not form a {gs}x{gt} grid")
    labels = np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8)
    o1 = doc.get("order1")
    o2 = doc.get("order2")
    return _pattern_from_labels(
        str(doc.get("kind", KIND_CUSTOM)), gs, gt, labels,
        None if o1 is None else [tuple(c) for c in o1],
        None if o2 is None else [tuple(c) for c in o2])


def c2_pattern(grid_s, grid_t):
    """Bundled circular pattern for the grid, loaded from package data."""
    path = os.path.join(_DATA_DIR, f"c2_{grid_s}x{grid_t}.json")
    if not os.path.exists(path):
        raise LflcError(
            f"no bundled c2 definition for a {grid_s}x{grid_t} grid; "
            "supply a pattern file instead")
    return load_pattern_file(path)


def get_pattern(name, grid_s, grid_t):
    """Resolve 'c2' / 'h2' / a pattern-file path for the given grid."""
    if name == KIND_H2:
        return h2_pattern(grid_s, grid_t)
    if name == KIND_C2:
        return c2_pattern(grid_s, grid_t)
    if not os.path.exists(name):
        raise LflcError(f"pattern {name!r} is neither c2, h2 nor an existing file")
    pat = load_pattern_file(name)
    if (pat.grid_s, pat.grid_t) != (grid_s, grid_t):
        raise DimensionMismatch(
            f"pattern file grid {pat.grid_s}x{pat.grid_t} does not match light "
            f"field grid {grid_s}x{grid_t}")
    return pat


@dataclass(frozen=True)
class ViewSubset:
    """Views of one subset in coding order."""

    parent_grid: tuple   # (grid_s, grid_t)
    view_shape: tuple    # (H, W)
    coords: tuple        # ((s, t), ...) in coding order
    views: np.ndarray    # (len(coords), H, W, 3)

    def __post_init__(self):
        if len(set(self.coords)) != len(self.coords):
            raise LflcError("duplicate coordinates in subset")
        v = np.asarray(self.views, dtype=np.float64)
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "views", v)
        object.__setattr__(self, "coords", tuple(map(tuple, self.coords)))


def partition_views(lf: LightField, pattern: PredictionPattern):
    """Split a light field into (Subset 1, Subset 2) per the pattern's coding orders."""
    if (pattern.grid_s, pattern.grid_t) != lf.grid_shape:
        raise DimensionMismatch(
            f"pattern grid {pattern.grid_s}x{pattern.grid_t} vs light field {lf.grid_shape}")
    subs = []
    for order in (pattern.order1, pattern.order2):
        views = np.stack([lf.view(s, t) for s, t in order])
        subs.append(ViewSubset(lf.grid_shape, lf.view_shape, order, views))
    return subs[0], subs[1]


def merge_subsets(sub1: ViewSubset, sub2: ViewSubset):
    """Reassemble a LightField from two subsets covering the full grid."""
    gs, gt = sub1.parent_grid
    h, w = sub1.view_shape
    srad, trad = gs // 2, gt // 2
    grid = np.full((gs, gt, h, w, 3), np.nan)
    for sub in (sub1, sub2):
        for (s, t), view in zip(sub.coords, sub.views):
            grid[s + srad, t + trad] = view
    if np.isnan(grid).any():
        raise LflcError("subsets do not cover the grid")
    return LightField(grid)
