"""Codec dispatch: layer stacks and residual view sequences as byte payloads.

Layers are coded as a three-frame sequence in z order (-1, 0, +1); decoded
layers are clamped back into [0, 1].  Residual frames are signed, get a +0.5
offset recorded in the payload, and are returned unclamped so the caller can
add them back onto predictions.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import hevc_ext, qdct
from .errors import CodecUnavailable, LflcError
from .layers import LayerStack

RESIDUAL_OFFSET = 0.5


class CodecId(IntEnum):
    FALLBACK_QDCT = 0
    HEVC_EXTERNAL = 1


@dataclass(frozen=True)
class QuantParam:
    qp: int

    def __post_init__(self):
        if not 0 <= self.qp <= 51:
            raise LflcError(f"qp {self.qp} outside [0, 51]")


def _backend(codec_id, hevc):
    if codec_id == CodecId.FALLBACK_QDCT:
        return qdct.encode_frames, qdct.decode_frames
    if codec_id == CodecId.HEVC_EXTERNAL:
        adapter = hevc if hevc is not None else hevc_ext.HevcAdapter.from_env()
        if adapter is None:
            raise CodecUnavailable(
                "external codec requested but no command templates configured "
                f"(set {hevc_ext.ENV_ENCODE} and {hevc_ext.ENV_DECODE})")
        return adapter.encode_frames, adapter.decode_frames
    raise LflcError(f"unknown codec id {codec_id}")


def encode_layers(stack: LayerStack, qp, codec_id=CodecId.FALLBACK_QDCT, hevc=None) -> bytes:
    qp = qp.qp if isinstance(qp, QuantParam) else int(QuantParam(qp).qp)
    enc, _ = _backend(codec_id, hevc)
    return enc(stack.values, qp, offset=0.0)


def decode_layers(payload, view_shape, codec_id=CodecId.FALLBACK_QDCT, hevc=None) -> LayerStack:
    _, dec = _backend(codec_id, hevc)
    frames, _, _ = dec(payload)
    if frames.shape[0] != 3:
        raise LflcError(f"layer payload holds {frames.shape[0]} frames, expected 3")
    return LayerStack(np.clip(frames, 0.0, 1.0), view_shape)


def encode_residual(residuals, qp, codec_id=CodecId.FALLBACK_QDCT, hevc=None) -> bytes:
    qp = qp.qp if isinstance(qp, QuantParam) else int(QuantParam(qp).qp)
    enc, _ = _backend(codec_id, hevc)
    residuals = np.asarray(residuals, dtype=np.float64)
    if codec_id == CodecId.FALLBACK_QDCT:
        return enc(residuals, qp, offset=RESIDUAL_OFFSET, rounding=qdct.ROUNDING_RESIDUAL)
    return enc(residuals, qp, offset=RESIDUAL_OFFSET)


def decode_residual(payload, codec_id=CodecId.FALLBACK_QDCT, hevc=None):
    _, dec = _backend(codec_id, hevc)
    frames, _, _ = dec(payload)
    return frames
