"""Bitstream container: fixed little-endian header, section table, sections.

Layout (all little-endian):

  offset 0   magic "LFLC" (4 bytes)
  offset 4   version u16
  offset 6   pattern id u8 (0 custom, 1 c2, 2 h2)
  offset 7   codec id u8
  offset 8   grid dims 2 x u8 (s then t)
  offset 10  spatial dims 2 x u16 (height then width)
  offset 14  rank u16
  offset 16  qp u8
  offset 17  flags u8 (bit0: fdl_lambda field valid)
  offset 18  fdl lambda f64 (regression weight the decoder must reuse)
  offset 26  zero padding up to byte 64
  offset 64  section count u16, then count x u64 section lengths
  then       sections back to back: layers subset 1, layers subset 2,
             FDL metadata, residual payloads in coding order

The metadata section is grid_s*grid_t angular coordinate pairs (2 x f64
each, grid row-major) followed by the layer disparities (f64 each); the
disparity count is implied by the section length.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, CorruptPayload, SectionTableMismatch, VersionMismatch

MAGIC = b"LFLC"
CONTAINER_VERSION = 1
HEADER_SIZE = 64
FLAG_FDL_LAMBDA = 0x01

PATTERN_IDS = {"custom": 0, "c2": 1, "h2": 2}
PATTERN_NAMES = {v: k for k, v in PATTERN_IDS.items()}

_FIXED = struct.Struct("<4sHBBBBHHHBBd")


@dataclass(frozen=True)
class LfcHeader:
    pattern_id: int
    codec_id: int
    grid_shape: tuple   # (grid_s, grid_t)
    view_shape: tuple   # (height, width)
    rank: int
    qp: int
    fdl_lambda: float


@dataclass(frozen=True)
class LfcContainer:
    header: LfcHeader
    layers_subset1: bytes
    layers_subset2: bytes
    metadata: bytes
    residuals: tuple

    @property
    def sections(self):
        return (self.layers_subset1, self.layers_subset2, self.metadata) + tuple(self.residuals)


def write_container(container: LfcContainer) -> bytes:
    h = container.header
    fixed = _FIXED.pack(
        MAGIC, CONTAINER_VERSION, h.pattern_id, h.codec_id,
        h.grid_shape[0], h.grid_shape[1], h.view_shape[0], h.view_shape[1],
        h.rank, h.qp, FLAG_FDL_LAMBDA, float(h.fdl_lambda))
    out = bytearray(fixed)
    out.extend(b"\x00" * (HEADER_SIZE - len(fixed)))
    sections = container.sections
    out.extend(struct.pack("<H", len(sections)))
    for sec in sections:
        out.extend(struct.pack("<Q", len(sec)))
    for sec in sections:
        out.extend(sec)
    return bytes(out)


def read_container(data: bytes) -> LfcContainer:
    if len(data) < HEADER_SIZE + 2:
        raise SectionTableMismatch("container shorter than header plus section count")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    (_, version, pattern_id, codec_id, gs, gt, height, width,
     rank, qp, flags, lam) = _FIXED.unpack(data[:_FIXED.size])
    if version != CONTAINER_VERSION:
        raise VersionMismatch(f"container version {version}, expected {CONTAINER_VERSION}")
    if not flags & FLAG_FDL_LAMBDA:
        lam = 0.0

    (count,) = struct.unpack_from("<H", data, HEADER_SIZE)
    table_end = HEADER_SIZE + 2 + 8 * count
    if len(data) < table_end:
        raise SectionTableMismatch("section table truncated")
    lengths = struct.unpack_from(f"<{count}Q", data, HEADER_SIZE + 2)
    if table_end + sum(lengths) != len(data):
        raise SectionTableMismatch(
            f"sections occupy {len(data) - table_end} bytes, table declares {sum(lengths)}")
    if count < 3:
        raise SectionTableMismatch(f"container needs >= 3 sections, found {count}")

    sections = []
    pos = table_end
    for length in lengths:
        sections.append(data[pos:pos + length])
        pos += length
    header = LfcHeader(pattern_id, codec_id, (gs, gt), (height, width), rank, qp, lam)
    return LfcContainer(header, sections[0], sections[1], sections[2], tuple(sections[3:]))


def pack_metadata(coords_uv, disparities) -> bytes:
    """Angular coordinates (V, 2) then disparities (n,) as little-endian f64."""
    u = np.ascontiguousarray(np.asarray(coords_uv, dtype="<f8"))
    d = np.ascontiguousarray(np.asarray(disparities, dtype="<f8"))
    if u.ndim != 2 or u.shape[1] != 2:
        raise CorruptPayload(f"coordinate array must be (V, 2), got {u.shape}")
    return u.tobytes() + d.tobytes()


def unpack_metadata(blob: bytes, n_views: int):
    need = n_views * 16
    if len(blob) < need or (len(blob) - need) % 8 != 0:
        raise CorruptPayload(
            f"metadata length {len(blob)} inconsistent with {n_views} views")
    u = np.frombuffer(blob[:need], dtype="<f8").reshape(n_views, 2).astype(np.float64)
    d = np.frombuffer(blob[need:], dtype="<f8").astype(np.float64)
    if d.size == 0:
        raise CorruptPayload("metadata holds no disparities")
    return u, d
