"""Rate-distortion sweep harness, Bjontegaard rate delta and report writers.

Sweeps reuse the expensive stages: layer optimization is shared by every
(rank, qp) cell and the low-rank approximation is shared across the QP loop.
CSV output is byte-deterministic: fixed column order, LF line endings, '.'
decimal separator, six significant digits.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import LflcError, NoOverlap
from .lightfield import yuv_psnr
from .pipeline import EncoderSettings, encode_with_stacks, lowrank_stacks, optimize_subset_stacks

RD_COLUMNS = ("pattern", "rank", "qp", "bytes_subset1", "bytes_subset2",
              "bytes_total", "yuv_psnr_db")
BD_COLUMNS = ("scene", "pattern", "rank", "bd_subset1_pct", "bd_subset2_pct")


@dataclass(frozen=True)
class RDPoint:
    pattern: str
    rank: int
    qp: int
    bytes_subset1: int   # coded layer stack of Subset 1
    bytes_subset2: int   # residual payloads of Subset 2
    bytes_total: int     # whole container, sections plus header and table
    yuv_psnr_db: float


def rd_sweep(lf, pattern, ranks, qps, settings: EncoderSettings, hevc=None,
             progress=None, workers=1):
    """Encode every (rank, qp) cell and measure size and end-to-end YUV-PSNR.

    settings.rank / settings.qp are ignored in favour of the sweep lists.
    Layer optimization is shared by all cells and the low-rank stage by each
    rank's QP loop.  Cells are independent; with workers > 1 they run on a
    thread pool (every cell is pure, so results are identical to the
    sequential run and are returned rank-major then qp either way).
    """
    if not ranks or not qps:
        raise LflcError("ranks and qps must be non-empty")
    (sub1, stack1), (sub2, stack2) = optimize_subset_stacks(
        lf, pattern, settings.layer_cfg, settings.seed)
    approx_by_rank = {
        rank: lowrank_stacks((stack1, stack2), rank, settings.epsilon, settings.seed)
        for rank in ranks}
    cells = [(rank, qp) for rank in ranks for qp in qps]
    lock = threading.Lock()

    def run_cell(cell):
        rank, qp = cell
        result = encode_with_stacks(pattern, (sub1, sub2), approx_by_rank[rank],
                                    replace(settings, rank=rank, qp=qp), hevc)
        psnr = yuv_psnr(lf, result.reconstruction).aggregate
        point = RDPoint(pattern.kind, rank, qp, result.bytes_subset1,
                        result.bytes_subset2, result.bytes_total, psnr)
        if progress is not None:
            with lock:
                progress(point)
        return point

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_cell, cells))
    return [run_cell(cell) for cell in cells]


def bd_rate(anchor, test, method="cubic"):
    """Average rate difference of test vs anchor in percent; negative saves bits.

    Both curves are sequences of (rate, psnr) with at least four points and
    strictly positive rates.  log2(rate) is fitted against PSNR for each
    curve (classical cubic polynomial, or a monotone piecewise cubic with
    method="pchip"), the difference is integrated over the common PSNR
    interval, and the mean log2 gap Delta maps to 100*(2**Delta - 1).
    """
    if method not in ("cubic", "pchip"):
        raise LflcError(f"unknown bd_rate method {method!r}")
    curves = []
    for name, pts in (("anchor", anchor), ("test", test)):
        pts = [(float(r), float(p)) for r, p in pts]
        if len(pts) < 4:
            raise LflcError(f"{name} curve has {len(pts)} points, need >= 4 for a cubic fit")
        if any(r <= 0 for r, _ in pts):
            raise LflcError(f"{name} curve has non-positive rates")
        curves.append(pts)
    lo = max(min(p for _, p in c) for c in curves)
    hi = min(max(p for _, p in c) for c in curves)
    if hi <= lo:
        raise NoOverlap(f"PSNR ranges do not overlap (common interval [{lo}, {hi}])")

    integrals = []
    for pts in curves:
        order = np.argsort([p for _, p in pts])
        psnr = np.array([pts[i][1] for i in order])
        logr = np.log2([pts[i][0] for i in order])
        if method == "pchip":
            if np.any(np.diff(psnr) <= 0):
                raise LflcError("pchip fit needs strictly increasing PSNR values")
            from scipy.interpolate import PchipInterpolator
            anti = PchipInterpolator(psnr, logr).antiderivative()
            integrals.append(float(anti(hi) - anti(lo)))
        else:
            poly = np.polyfit(psnr, logr, 3)
            anti = np.polyint(poly)
            integrals.append(float(np.polyval(anti, hi) - np.polyval(anti, lo)))
    delta = (integrals[1] - integrals[0]) / (hi - lo)
    delta = min(delta, 60.0)  # guard against pathological fits blowing up 2**delta
    return 100.0 * (2.0 ** delta - 1.0)


def curve_from_points(points, rate_field="bytes_total"):
    """(rate, psnr) pairs for one fixed-rank RD curve, ordered as given."""
    return [(getattr(p, rate_field), p.yuv_psnr_db) for p in points]


def rate_kbps(total_bytes, view_count, views_per_second=30.0):
    """Bytes-per-light-field converted to kbit/s for a pseudo-video playout
    of view_count frames at views_per_second."""
    if view_count < 1 or views_per_second <= 0:
        raise LflcError("need a positive view count and frame rate")
    seconds = view_count / views_per_second
    return total_bytes * 8.0 / 1000.0 / seconds


def _fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".6g")
    return str(value)


def write_rd_csv(points, path):
    """Deterministic CSV of sweep points in the given order."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(RD_COLUMNS) + "\n")
        for p in points:
            fh.write(",".join(_fmt(getattr(p, col)) for col in RD_COLUMNS) + "\n")


def read_rd_csv(path):
    points = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != RD_COLUMNS:
            raise LflcError(f"unexpected CSV columns {header}")
        for line in fh:
            if not line.strip():
                continue
            vals = line.strip().split(",")
            points.append(RDPoint(vals[0], int(vals[1]), int(vals[2]), int(vals[3]),
                                  int(vals[4]), int(vals[5]), float(vals[6])))
    return points


def bd_table(anchor_points, test_points, scene="synthetic", method="cubic"):
    """Per-(pattern, rank) BD rates of test vs anchor, for both subset streams.

    Rows mirror the (scene, pattern, rank, subset1 %, subset2 %) table shape;
    curves pair subset byte counts with the aggregate PSNR across the QP axis.
    """
    def curves(points):
        out = {}
        for p in points:
            out.setdefault((p.pattern, p.rank), []).append(p)
        return out

    a, t = curves(anchor_points), curves(test_points)
    rows = []
    for key in sorted(set(a) & set(t)):
        pattern, rank = key
        row = {"scene": scene, "pattern": pattern, "rank": rank}
        for sub, field_name in ((1, "bytes_subset1"), (2, "bytes_subset2")):
            row[f"bd_subset{sub}_pct"] = bd_rate(
                curve_from_points(a[key], field_name),
                curve_from_points(t[key], field_name), method=method)
        rows.append(row)
    return rows


def write_bd_csv(rows, path):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(BD_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[col]) for col in BD_COLUMNS) + "\n")


# ---------------------------------------------------------------------------
# SVG rate-distortion plot (hand-rolled so output stays byte-deterministic)
# ---------------------------------------------------------------------------

_SVG_W, _SVG_H = 640, 440
_MARGIN = 60
_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def write_rd_svg(points, path, title=None):
    """Rate (total bytes, log axis) vs YUV-PSNR plot, one polyline per rank."""
    finite = [p for p in points if math.isfinite(p.yuv_psnr_db) and p.bytes_total > 0]
    if not finite:
        raise LflcError("no finite points to plot")
    xs = [math.log10(p.bytes_total) for p in finite]
    ys = [p.yuv_psnr_db for p in finite]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x):
        return _MARGIN + (x - x0) / (x1 - x0) * (_SVG_W - 2 * _MARGIN)

    def sy(y):
        return _SVG_H - _MARGIN - (y - y0) / (y1 - y0) * (_SVG_H - 2 * _MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<line x1="{_MARGIN}" y1="{_SVG_H - _MARGIN}" x2="{_SVG_W - _MARGIN}" '
        f'y2="{_SVG_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_SVG_H - _MARGIN}" stroke="black"/>',
        f'<text x="{_SVG_W // 2}" y="{_SVG_H - 15}" text-anchor="middle" '
        f'font-size="13">total bytes (log10 scale)</text>',
        f'<text x="18" y="{_SVG_H // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {_SVG_H // 2})">YUV-PSNR [dB]</text>',
    ]
    if title:
        parts.append(f'<text x="{_SVG_W // 2}" y="24" text-anchor="middle" '
                     f'font-size="14">{title}</text>')

    ranks = sorted({p.rank for p in finite})
    for i, rank in enumerate(ranks):
        color = _PALETTE[i % len(_PALETTE)]
        series = sorted((p for p in finite if p.rank == rank),
                        key=lambda p: p.bytes_total)
        coords = " ".join(
            f"{sx(math.log10(p.bytes_total)):.2f},{sy(p.yuv_psnr_db):.2f}" for p in series)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        for p in series:
            parts.append(f'<circle cx="{sx(math.log10(p.bytes_total)):.2f}" '
                         f'cy="{sy(p.yuv_psnr_db):.2f}" r="2.5" fill="{color}"/>')
        parts.append(f'<text x="{_SVG_W - _MARGIN + 6}" y="{_MARGIN + 16 * i + 4}" '
                     f'font-size="11" fill="{color}">rank {rank}</text>')

    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        parts.append(f'<text x="{sx(xv):.2f}" y="{_SVG_H - _MARGIN + 16}" '
                     f'text-anchor="middle" font-size="11">{10 ** xv:.3g}</text>')
        parts.append(f'<text x="{_MARGIN - 8}" y="{sy(yv):.2f}" text-anchor="end" '
                     f'font-size="11">{yv:.1f}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
