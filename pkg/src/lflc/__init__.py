"""Light-field compression toolkit.

Two-stage codec: view subsets become three multiplicative layers, compressed
by a randomized block-Krylov low-rank approximation plus a transform codec;
the reconstructed views then drive a Fourier-disparity-layer prediction
hierarchy whose residuals complete the bitstream.  An evaluation harness
sweeps ranks and quantization parameters and reports YUV-PSNR, byte counts
and Bjontegaard rate deltas.
"""

from .bksvd import (KrylovConfig, LowRankResult, approximate_stack, block_krylov_lowrank,
                    spectral_error_ratio, stack_channels, unstack_layers)
from .codec import (CodecId, QuantParam, decode_layers, decode_residual, encode_layers,
                    encode_residual)
from .container import (LfcContainer, LfcHeader, pack_metadata, read_container,
                        unpack_metadata, write_container)
from .errors import LflcError
from .evaluate import RDPoint, bd_rate, bd_table, rd_sweep, write_bd_csv, write_rd_csv, write_rd_svg
from .fdl import (CalibConfig, CalibrationResult, FDLModel, calibrate, fit_fdl,
                  hierarchical_decode, hierarchical_encode, synthesize_view)
from .hevc_ext import HevcAdapter
from .layers import LayerOptConfig, LayerStack, optimize_layers, render_subset, render_view
from .lightfield import LightField, load_lightfield, save_lightfield, yuv_psnr
from .patterns import (PredictionPattern, ViewSubset, get_pattern, h2_pattern,
                       load_pattern_file, merge_subsets, partition_views, spiral_order)
from .pipeline import EncoderSettings, EncodeResult, decode_lightfield, encode_lightfield

__version__ = "0.1.0"
