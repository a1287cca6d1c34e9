"""Adapter driving an external video encoder/decoder pair over planar YUV.

The toolkit never links a video codec.  Instead the user supplies command
templates (flags or the LFLC_HEVC_ENCODE / LFLC_HEVC_DECODE environment
variables) with {input}, {output}, {qp}, {w}, {h} and {frames} placeholders.
Frames are handed over as 8-bit 4:4:4 planar YCbCr; whatever bitstream the
encoder writes becomes the payload body verbatim.
"""

import os
import shlex
import struct
import subprocess
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import CodecUnavailable, CorruptPayload, VersionMismatch
from .qdct import _CHROMA_OFFSET, _RGB2YCC, _YCC2RGB, PAYLOAD_VERSION

ENV_ENCODE = "LFLC_HEVC_ENCODE"
ENV_DECODE = "LFLC_HEVC_DECODE"

_HDR = struct.Struct("<BBBBHHf")  # version, flags, qp, nframes, height, width, offset


def _frames_to_yuv(frames, offset):
    ycc = (frames + offset) @ _RGB2YCC.T + _CHROMA_OFFSET
    samples = np.clip(np.rint(ycc * 255.0), 0, 255).astype(np.uint8)
    return samples.transpose(0, 3, 1, 2).tobytes()  # per frame: Y, Cb, Cr planes


def _yuv_to_frames(raw, n, h, w, offset):
    expected = n * 3 * h * w
    if len(raw) != expected:
        raise CorruptPayload(f"decoder produced {len(raw)} bytes, expected {expected}")
    samples = np.frombuffer(raw, dtype=np.uint8).reshape(n, 3, h, w)
    ycc = samples.transpose(0, 2, 3, 1).astype(np.float64) / 255.0
    return (ycc - _CHROMA_OFFSET) @ _YCC2RGB.T - offset


@dataclass(frozen=True)
class HevcAdapter:
    """Command templates for one encoder/decoder binary pair."""

    encode_template: str
    decode_template: str

    @staticmethod
    def from_env():
        enc = os.environ.get(ENV_ENCODE)
        dec = os.environ.get(ENV_DECODE)
        if not enc or not dec:
            return None
        return HevcAdapter(enc, dec)

    def _run(self, template, subs):
        try:
            cmd = [piece.format(**subs) for piece in shlex.split(template)]
        except KeyError as exc:
            raise CodecUnavailable(f"unknown placeholder {exc} in template") from None
        try:
            proc = subprocess.run(cmd, capture_output=True)
        except FileNotFoundError:
            raise CodecUnavailable(f"external codec binary not found: {cmd[0]!r}") from None
        if proc.returncode != 0:
            raise CodecUnavailable(
                f"external codec failed ({proc.returncode}): {proc.stderr.decode(errors='replace')[:500]}")

    def encode_frames(self, frames, qp, offset=0.0):
        frames = np.asarray(frames, dtype=np.float64)
        n, h, w, _ = frames.shape
        with tempfile.TemporaryDirectory(prefix="lflc_hevc_") as tmp:
            src = os.path.join(tmp, "input.yuv")
            dst = os.path.join(tmp, "stream.bin")
            with open(src, "wb") as fh:
                fh.write(_frames_to_yuv(frames, offset))
            self._run(self.encode_template,
                      dict(input=src, output=dst, qp=qp, w=w, h=h, frames=n))
            try:
                with open(dst, "rb") as fh:
                    body = fh.read()
            except FileNotFoundError:
                raise CodecUnavailable("external encoder wrote no output") from None
        head = _HDR.pack(PAYLOAD_VERSION, 0, qp, n, h, w, float(offset))
        return head + body

    def decode_frames(self, payload):
        if len(payload) < _HDR.size:
            raise CorruptPayload("payload shorter than its header")
        version, _, qp, n, h, w, offset = _HDR.unpack(payload[:_HDR.size])
        if version != PAYLOAD_VERSION:
            raise VersionMismatch(f"payload version {version}, expected {PAYLOAD_VERSION}")
        with tempfile.TemporaryDirectory(prefix="lflc_hevc_") as tmp:
            src = os.path.join(tmp, "stream.bin")
            dst = os.path.join(tmp, "output.yuv")
            with open(src, "wb") as fh:
                fh.write(payload[_HDR.size:])
            self._run(self.decode_template,
                      dict(input=src, output=dst, qp=qp, w=w, h=h, frames=n))
            try:
                with open(dst, "rb") as fh:
                    raw = fh.read()
            except FileNotFoundError:
                raise CodecUnavailable("external decoder wrote no output") from None
        return _yuv_to_frames(raw, n, h, w, offset), qp, offset
