"""Distribution-aware keypoint heatmap encoding and decoding."""

from .decoder import (
    Dark,
    DecodeResult,
    Fallback,
    NoShift,
    StandardShift,
    argmax,
    decode,
    decode_dark,
    decode_no_shift,
    decode_standard_shift,
    modulate,
    second_max_neighbor,
    taylor_refine,
)
from .encoder import EncoderConfig, Heatmap, NormMode, encode_keypoint, render
from .geometry import QuantMode, Space, SubpixelCoord, downscale, quantise, upscale
from .oracle import oracle_localize

__version__ = "0.1.0"
