"""Command line entry points: encode, decode, sweep, report."""

import argparse
import json
import os
import sys
import time

from .codec import CodecId
from .errors import LflcError
from .evaluate import bd_table, rd_sweep, read_rd_csv, write_bd_csv, write_rd_csv, write_rd_svg
from .fdl import CalibConfig
from .hevc_ext import HevcAdapter
from .layers import LayerOptConfig
from .lightfield import load_lightfield, save_lightfield
from .patterns import get_pattern
from .pipeline import EncoderSettings, decode_lightfield, encode_lightfield

_CODECS = {"fallback": CodecId.FALLBACK_QDCT, "hevc-ext": CodecId.HEVC_EXTERNAL}


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _settings(args, cfg, rank=None, qp=None):
    layer_cfg = LayerOptConfig(seed=args.seed, **cfg.get("layers", {}))
    calib_kwargs = dict(cfg.get("calib", {}))
    if "d_range" in calib_kwargs:
        calib_kwargs["d_range"] = tuple(calib_kwargs["d_range"])
    return EncoderSettings(
        rank=rank if rank is not None else args.rank,
        qp=qp if qp is not None else args.qp,
        codec_id=_CODECS[args.codec],
        fdl_lambda=cfg.get("fdl", {}).get("lambda", 1e-4),
        fdl_layers=cfg.get("fdl", {}).get("layers", 30),
        epsilon=cfg.get("epsilon", 0.1),
        seed=args.seed,
        layer_cfg=layer_cfg,
        calib_cfg=CalibConfig(**calib_kwargs))


def _hevc(args):
    if args.codec != "hevc-ext":
        return None
    if args.hevc_encode and args.hevc_decode:
        return HevcAdapter(args.hevc_encode, args.hevc_decode)
    return HevcAdapter.from_env()


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="seed for every stochastic stage")
    p.add_argument("--config", default=None, help="JSON file overriding lambda, "
                   "layer counts and optimizer budgets")
    p.add_argument("--codec", choices=sorted(_CODECS), default="fallback")
    p.add_argument("--hevc-encode", default=None, help="external encoder command template")
    p.add_argument("--hevc-decode", default=None, help="external decoder command template")


def _add_input(p):
    p.add_argument("--input", required=True, help="directory of view images")
    p.add_argument("--layout", default="view_{row}_{col}.png",
                   help="filename layout with {row} and {col} tokens")
    p.add_argument("--crop", default=None,
                   help="keep only the central SxT views, e.g. 9x9")
    p.add_argument("--pattern", default="h2", help="c2, h2, or a pattern file path")


def _parse_crop(text):
    if text is None:
        return None
    gs, gt = text.lower().split("x")
    return int(gs), int(gt)


def cmd_encode(args):
    cfg = _load_config(args.config)
    lf = load_lightfield(args.input, args.layout, crop=_parse_crop(args.crop))
    pattern = get_pattern(args.pattern, *lf.grid_shape)
    result = encode_lightfield(lf, pattern, _settings(args, cfg), hevc=_hevc(args))
    with open(args.out, "wb") as fh:
        fh.write(result.data)
    print(f"wrote {args.out}: {result.bytes_total} bytes "
          f"(subset1 {result.bytes_subset1}, residuals {result.bytes_subset2}, "
          f"layers2 {result.bytes_layers2}, metadata {result.bytes_metadata})")
    return 0


def cmd_decode(args):
    with open(args.infile, "rb") as fh:
        data = fh.read()
    lf = decode_lightfield(data, pattern_file=args.pattern, hevc=_hevc(args))
    save_lightfield(lf, args.out, args.layout)
    gs, gt = lf.grid_shape
    print(f"decoded {gs}x{gt} views into {args.out}")
    return 0


def cmd_sweep(args):
    cfg = _load_config(args.config)
    lf = load_lightfield(args.input, args.layout, crop=_parse_crop(args.crop))
    pattern = get_pattern(args.pattern, *lf.grid_shape)
    ranks = [int(r) for r in args.ranks.split(",")]
    qps = [int(q) for q in args.qps.split(",")]
    settings = _settings(args, cfg, rank=ranks[0], qp=qps[0])

    start = time.time()

    def progress(point):
        print(f"rank {point.rank:3d} qp {point.qp:2d}: total {point.bytes_total} bytes, "
              f"{point.yuv_psnr_db:.2f} dB  [{time.time() - start:.1f}s]")

    points = rd_sweep(lf, pattern, ranks, qps, settings, hevc=_hevc(args),
                      progress=progress if args.verbose else None,
                      workers=args.workers)
    write_rd_csv(points, args.csv)
    print(f"wrote {args.csv}: {len(points)} points in {time.time() - start:.1f}s")
    if args.svg:
        write_rd_svg(points, args.svg, title=f"{pattern.kind} sweep")
        print(f"wrote {args.svg}")
    return 0


def cmd_report(args):
    points = read_rd_csv(args.csv)
    patterns = sorted({p.pattern for p in points})
    base, ext = os.path.splitext(args.svg)
    for name in patterns:
        path = args.svg if len(patterns) == 1 else f"{base}_{name}{ext}"
        write_rd_svg([p for p in points if p.pattern == name], path, title=name)
        print(f"wrote {path}")
    if args.bd_anchor:
        anchor = read_rd_csv(args.bd_anchor)
        rows = bd_table(anchor, points, scene=args.scene, method=args.bd_method)
        write_bd_csv(rows, args.bd_csv)
        print(f"wrote {args.bd_csv}: {len(rows)} rows")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="lflc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a light field into a .lfc container")
    _add_input(p)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--qp", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct views from a .lfc container")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="output directory for view images")
    p.add_argument("--layout", default="view_{row}_{col}.png")
    p.add_argument("--pattern", default=None, help="pattern file for custom patterns")
    _add_common(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="rank/qp rate-distortion sweep to CSV")
    _add_input(p)
    p.add_argument("--ranks", default="4,8,16,28,44,52,60")
    p.add_argument("--qps", default="2,6,10,14,20,26,38")
    p.add_argument("--csv", required=True)
    p.add_argument("--svg", default=None)
    p.add_argument("--workers", type=int, default=1,
                   help="concurrent (rank, qp) cells; results are identical")
    p.add_argument("--verbose", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="plots and BD-rate tables from sweep CSVs")
    p.add_argument("--csv", required=True)
    p.add_argument("--svg", required=True)
    p.add_argument("--bd-anchor", default=None, help="anchor sweep CSV for BD rates")
    p.add_argument("--bd-csv", default="bd_rates.csv")
    p.add_argument("--bd-method", choices=("cubic", "pchip"), default="cubic")
    p.add_argument("--scene", default="synthetic")
    p.add_argument("--seed", type=int, default=0,
                   help="accepted for interface symmetry; reporting is deterministic")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LflcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
