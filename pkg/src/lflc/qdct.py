"""Self-contained lossy frame codec: 8x8 block DCT with uniform quantization.

Frames (any count, RGB float) are converted to full-range YCbCr, scaled to
the 8-bit range, transformed per 8x8 block, quantized with the step
2**((qp-4)/6), zigzag-scanned, run-length tokenized and finally deflated.
The decoder mirrors every stage, so encode -> decode is deterministic and
the encoder can obtain its own reconstruction by decoding its output.

Directly coded frames round coefficients to the nearest step.  Prediction
residuals use a deadzone quantizer on the AC coefficients,
q = sign(x) * floor(|x|/step + 1/6); the wider zero bin keeps requantized
codec noise (whose coefficients sit around half a step) from surviving into
residual payloads.  DC terms always round to nearest so the deadzone's
floor bias cannot shift flat regions.
"""

import struct
import zlib

import numpy as np
import scipy.fft

from .errors import CorruptPayload, VersionMismatch

PAYLOAD_VERSION = 1
FLAG_YCBCR = 0x01

ROUNDING_RESIDUAL = 1.0 / 6.0  # deadzone offset for residual frames

_HDR = struct.Struct("<BBBBHHf")  # version, flags, qp, nframes, height, width, offset

# Full-range RGB <-> YCbCr pair used inside the codec only.
_RGB2YCC = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
_YCC2RGB = np.linalg.inv(_RGB2YCC)
_CHROMA_OFFSET = np.array([0.0, 0.5, 0.5])


def quant_step(qp):
    """Quantizer step on the 8-bit sample scale."""
    return 2.0 ** ((qp - 4) / 6.0)


def _zigzag_index():
    order = sorted(((u + v, v if (u + v) % 2 else u, u, v)
                    for u in range(8) for v in range(8)))
    idx = np.array([u * 8 + v for _, _, u, v in order])
    return idx, np.argsort(idx)


_ZIGZAG, _UNZIGZAG = _zigzag_index()


def _to_blocks(plane):
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3).reshape(-1, 8, 8)


def _from_blocks(blocks, h, w):
    return blocks.reshape(h // 8, w // 8, 8, 8).transpose(0, 2, 1, 3).reshape(h, w)


def _pad_to_blocks(plane):
    h, w = plane.shape
    ph = (-h) % 8
    pw = (-w) % 8
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def _put_uvarint(out, value):
    while True:
        byte = value & 0x7F
        value >>= 7
        out.append(byte | (0x80 if value else 0))
        if not value:
            return


def _get_uvarint(buf, i):
    value = 0
    shift = 0
    while True:
        if i >= len(buf):
            raise CorruptPayload("truncated varint")
        byte = buf[i]
        i += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, i
        shift += 7
        if shift > 63:
            raise CorruptPayload("varint overflow")


def _zz_signed(v):
    return (v << 1) if v >= 0 else ((-v << 1) - 1)


def _unzz_signed(u):
    return (u >> 1) if u % 2 == 0 else -((u + 1) >> 1)


def _rle_encode(vals):
    """Zero runs as 0x00 + varint(length); nonzeros as varint(signed-zigzag)."""
    out = bytearray()
    nonzero = np.flatnonzero(vals)
    prev = 0
    for idx in nonzero:
        gap = int(idx) - prev
        if gap:
            out.append(0)
            _put_uvarint(out, gap)
        _put_uvarint(out, _zz_signed(int(vals[idx])))
        prev = int(idx) + 1
    tail = len(vals) - prev
    if tail:
        out.append(0)
        _put_uvarint(out, tail)
    return bytes(out)


def _rle_decode(buf, count):
    vals = np.zeros(count, dtype=np.int64)
    pos = 0
    i = 0
    while i < len(buf):
        if buf[i] == 0:
            run, i = _get_uvarint(buf, i + 1)
            pos += run
        else:
            u, i = _get_uvarint(buf, i)
            if pos >= count:
                raise CorruptPayload("coefficient stream overruns plane")
            vals[pos] = _unzz_signed(u)
            pos += 1
        if pos > count:
            raise CorruptPayload("zero run overruns plane")
    if pos != count:
        raise CorruptPayload(f"coefficient stream short: {pos} of {count}")
    return vals


def encode_frames(frames, qp, offset=0.0, rounding=None):
    """Encode (N, H, W, 3) float frames; offset is added before coding and
    recorded in the payload header so the decoder can remove it.

    rounding None means round to nearest; a float is a deadzone offset,
    q = sign(x) * floor(|x|/step + rounding).
    """
    frames = np.asarray(frames, dtype=np.float64)
    n, h, w, _ = frames.shape
    step = quant_step(qp)
    coeffs = []
    for f in range(n):
        ycc = (frames[f] + offset) @ _RGB2YCC.T + _CHROMA_OFFSET
        for ch in range(3):
            plane = _pad_to_blocks(ycc[:, :, ch] * 255.0)
            blocks = scipy.fft.dctn(_to_blocks(plane), axes=(1, 2), norm="ortho")
            scaled = blocks.reshape(-1, 64) / step
            if rounding is None:
                q = np.rint(scaled).astype(np.int64)
            else:
                q = (np.sign(scaled) * np.floor(np.abs(scaled) + rounding)).astype(np.int64)
                q[:, 0] = np.rint(scaled[:, 0]).astype(np.int64)  # DC: no deadzone
            coeffs.append(q[:, _ZIGZAG].ravel())
    stream = _rle_encode(np.concatenate(coeffs))
    head = _HDR.pack(PAYLOAD_VERSION, FLAG_YCBCR, qp, n, h, w, float(offset))
    return head + zlib.compress(stream, 9)


def decode_frames(payload):
    """Decode a payload from encode_frames; returns (frames, qp, offset)."""
    if len(payload) < _HDR.size:
        raise CorruptPayload("payload shorter than its header")
    version, flags, qp, n, h, w, offset = _HDR.unpack(payload[:_HDR.size])
    if version != PAYLOAD_VERSION:
        raise VersionMismatch(f"payload version {version}, expected {PAYLOAD_VERSION}")
    try:
        stream = zlib.decompress(payload[_HDR.size:])
    except zlib.error as exc:
        raise CorruptPayload(f"deflate stream corrupt: {exc}") from None
    ph = h + ((-h) % 8)
    pw = w + ((-w) % 8)
    per_plane = (ph // 8) * (pw // 8) * 64
    vals = _rle_decode(stream, n * 3 * per_plane)
    step = quant_step(qp)

    frames = np.empty((n, h, w, 3))
    pos = 0
    for f in range(n):
        ycc = np.empty((h, w, 3))
        for ch in range(3):
            q = vals[pos:pos + per_plane].reshape(-1, 64)
            pos += per_plane
            blocks = (q[:, _UNZIGZAG] * step).reshape(-1, 8, 8)
            plane = _from_blocks(scipy.fft.idctn(blocks, axes=(1, 2), norm="ortho"), ph, pw)
            ycc[:, :, ch] = plane[:h, :w] / 255.0
        if flags & FLAG_YCBCR:
            frames[f] = (ycc - _CHROMA_OFFSET) @ _YCC2RGB.T - offset
        else:
            frames[f] = ycc - offset
    return frames, qp, offset
