"""Modulo and mantissa in-pixel HDR encodings with classical unwrapping."""

from .codec import CodecParams, Encoding, SensorImage, encode, quantization_error_bounds, quantize, reconstruct
from .estimators import WindingDecoder, WrapEncoder
from .recoverability import check_recoverable, max_dynamic_range, unwrap_sequential_1d
from .solvers import MrfConfig, Solver, decode, detect_wrap_edges, unwrap_floodfill, unwrap_mrf

__version__ = "0.1.0"

__all__ = [
    "CodecParams",
    "Encoding",
    "SensorImage",
    "encode",
    "reconstruct",
    "quantize",
    "quantization_error_bounds",
    "check_recoverable",
    "unwrap_sequential_1d",
    "max_dynamic_range",
    "MrfConfig",
    "Solver",
    "detect_wrap_edges",
    "unwrap_floodfill",
    "unwrap_mrf",
    "decode",
    "WrapEncoder",
    "WindingDecoder",
]
