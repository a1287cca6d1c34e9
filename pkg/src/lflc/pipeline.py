"""End-to-end encoder/decoder: layers -> low rank -> codec -> FDL hierarchy.

Encoding stages:

  A. optimize multiplicative layers for each view subset (rank/qp independent)
  B. block-Krylov low-rank approximation of each stack at the chosen rank
  C. code both stacks, rebuild the approximated light field from the *decoded*
     stacks (closed loop), run the hierarchical FDL stage and assemble the
     container

The staging exists so sweeps can reuse A across ranks and B across QPs.
"""

from dataclasses import dataclass, field, replace


from .bksvd import KrylovConfig, approximate_stack
from .codec import CodecId, QuantParam, decode_layers, encode_layers
from .container import (PATTERN_IDS, PATTERN_NAMES, LfcContainer, LfcHeader,
                        read_container, write_container)
from .errors import LflcError
from .fdl import DEFAULT_LAMBDA, DEFAULT_LAYER_COUNT, CalibConfig, hierarchical_decode, hierarchical_encode
from .layers import LayerOptConfig, optimize_layers, render_subset
from .lightfield import LightField
from .patterns import PredictionPattern, ViewSubset, get_pattern, merge_subsets, partition_views


@dataclass(frozen=True)
class EncoderSettings:
    rank: int
    qp: int
    codec_id: CodecId = CodecId.FALLBACK_QDCT
    fdl_lambda: float = DEFAULT_LAMBDA
    fdl_layers: int = DEFAULT_LAYER_COUNT
    epsilon: float = 0.1
    seed: int = 0
    residual_qp_offset: int = 6
    layer_cfg: LayerOptConfig = field(default_factory=LayerOptConfig)
    calib_cfg: CalibConfig = field(default_factory=CalibConfig)


@dataclass(frozen=True)
class EncodeResult:
    data: bytes
    container: LfcContainer
    reconstruction: LightField   # what the decoder will output, bit for bit
    approx_lf: LightField        # closed-loop light field after stage C decode
    calibration: object

    @property
    def bytes_subset1(self):
        return len(self.container.layers_subset1)

    @property
    def bytes_subset2(self):
        return sum(len(p) for p in self.container.residuals)

    @property
    def bytes_layers2(self):
        return len(self.container.layers_subset2)

    @property
    def bytes_metadata(self):
        return len(self.container.metadata)

    @property
    def bytes_total(self):
        return len(self.data)


def optimize_subset_stacks(lf: LightField, pattern: PredictionPattern,
                           layer_cfg: LayerOptConfig = LayerOptConfig(), seed=0):
    """Stage A: one optimized LayerStack per subset (seeds differ per subset)."""
    sub1, sub2 = partition_views(lf, pattern)
    stack1 = optimize_layers(sub1, replace(layer_cfg, seed=seed))
    stack2 = optimize_layers(sub2, replace(layer_cfg, seed=seed + 1))
    return (sub1, stack1), (sub2, stack2)


def lowrank_stacks(stacks, rank, epsilon=0.1, seed=0):
    """Stage B: block-Krylov approximation of both stacks at the given rank."""
    out = []
    for idx, stack in enumerate(stacks):
        approx, _ = approximate_stack(stack, KrylovConfig(rank, epsilon, seed=seed + 3 * idx))
        out.append(approx)
    return tuple(out)


def encode_with_stacks(pattern: PredictionPattern, subsets, approx_stacks,
                       settings: EncoderSettings, hevc=None) -> EncodeResult:
    """Stage C: codec round trip, hierarchical FDL stage, container assembly."""
    sub1, sub2 = subsets
    qp = QuantParam(settings.qp)
    payloads = []
    decoded_views = []
    for sub, stack in zip((sub1, sub2), approx_stacks):
        payload = encode_layers(stack, qp, settings.codec_id, hevc)
        decoded = decode_layers(payload, stack.view_shape, settings.codec_id, hevc)
        payloads.append(payload)
        decoded_views.append(render_subset(decoded, sub.coords))

    approx_lf = merge_subsets(
        ViewSubset(sub1.parent_grid, sub1.view_shape, sub1.coords, decoded_views[0]),
        ViewSubset(sub2.parent_grid, sub2.view_shape, sub2.coords, decoded_views[1]))

    hier = hierarchical_encode(
        approx_lf, pattern, qp.qp, settings.codec_id,
        lam=settings.fdl_lambda, n_layers=settings.fdl_layers,
        calib_cfg=settings.calib_cfg,
        residual_qp_offset=settings.residual_qp_offset, hevc=hevc)

    header = LfcHeader(
        pattern_id=PATTERN_IDS.get(pattern.kind, PATTERN_IDS["custom"]),
        codec_id=int(settings.codec_id),
        grid_shape=(pattern.grid_s, pattern.grid_t),
        view_shape=sub1.view_shape,
        rank=settings.rank, qp=qp.qp, fdl_lambda=settings.fdl_lambda)
    container = LfcContainer(header, payloads[0], payloads[1],
                             hier.metadata, hier.residual_payloads)
    return EncodeResult(write_container(container), container,
                        hier.reconstruction, approx_lf, hier.calibration)


def encode_lightfield(lf: LightField, pattern: PredictionPattern,
                      settings: EncoderSettings, hevc=None) -> EncodeResult:
    """Full pipeline for one (rank, qp) operating point."""
    (sub1, stack1), (sub2, stack2) = optimize_subset_stacks(
        lf, pattern, settings.layer_cfg, settings.seed)
    approx = lowrank_stacks((stack1, stack2), settings.rank, settings.epsilon, settings.seed)
    return encode_with_stacks(pattern, (sub1, sub2), approx, settings, hevc)


def decode_lightfield(data: bytes, pattern_file=None, hevc=None) -> LightField:
    """Parse a container and reconstruct the light field it describes."""
    container = read_container(data)
    hdr = container.header
    name = PATTERN_NAMES.get(hdr.pattern_id, "custom")
    if name == "custom":
        if pattern_file is None:
            raise LflcError("container uses a custom pattern; pass its pattern file")
        pattern = get_pattern(pattern_file, *hdr.grid_shape)
    else:
        pattern = get_pattern(name, *hdr.grid_shape)
    return hierarchical_decode(container, pattern, hevc)
