"""Gaussian heatmap rendering for keypoint targets."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import HeatmapTooSmall, InvalidConfig, InvalidCoordinate, InvalidHeatmap
from .geometry import QuantMode, Space, SubpixelCoord, check_ratio, downscale, quantise

MIN_SIZE = 3


class NormMode(str, enum.Enum):
    DENSITY = "density"  # 1 / (2 pi sigma^2) prefactor
    PEAK_ONE = "peak"


@dataclass(frozen=True, eq=False)
class Heatmap:
    """A single-channel activation grid, ``data[y, x]``, plus its stride.

    ``data`` is stored as a read-only float64 array of shape ``(H, W)``.
    """

    data: np.ndarray
    ratio: float = 1.0

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise InvalidHeatmap(f"heatmap must be 2-D, got shape {data.shape}")
        h, w = data.shape
        if w < MIN_SIZE or h < MIN_SIZE:
            raise HeatmapTooSmall(f"heatmap must be at least {MIN_SIZE}x{MIN_SIZE}, got {w}x{h}")
        if not np.all(np.isfinite(data)):
            raise InvalidHeatmap("heatmap contains non-finite activations")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "ratio", check_ratio(self.ratio))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def at(self, x, y) -> float:
        return float(self.data[y, x])

    def scaled(self, c) -> Heatmap:
        return Heatmap(self.data * c, self.ratio)

    def __eq__(self, other):
        if not isinstance(other, Heatmap):
            return NotImplemented
        return self.ratio == other.ratio and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class EncoderConfig:
    """Rendering parameters.

    ``quant`` selects biased encoding (centre snapped with that mode);
    ``None`` means unbiased, sub-pixel centred encoding.
    """

    sigma: float = 2.0
    quant: QuantMode | None = None
    norm: NormMode = NormMode.PEAK_ONE

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidConfig(f"sigma must be > 0, got {self.sigma}")
        if self.quant is not None:
            object.__setattr__(self, "quant", QuantMode(self.quant))
        object.__setattr__(self, "norm", NormMode(self.norm))

    @property
    def biased(self) -> bool:
        return self.quant is not None


def gaussian_grid(u, v, width, height, sigma, norm=NormMode.PEAK_ONE) -> np.ndarray:
    """Evaluate an isotropic Gaussian centred at ``(u, v)`` on every pixel.

    The 2-D field is the outer product of two 1-D profiles, so mirrored
    entries about an integer centre are bit-identical.
    """
    xs = np.arange(width, dtype=np.float64) - u
    ys = np.arange(height, dtype=np.float64) - v
    two_s2 = 2.0 * sigma * sigma
    gx = np.exp(-(xs * xs) / two_s2)
    gy = np.exp(-(ys * ys) / two_s2)
    grid = np.outer(gy, gx)
    if NormMode(norm) is NormMode.DENSITY:
        grid *= 1.0 / (math.pi * two_s2)
    return grid


def render(center: SubpixelCoord, width: int, height: int, cfg: EncoderConfig, ratio=1.0) -> Heatmap:
    """Render a Gaussian target around ``center`` (heatmap space).

    With a biased config the centre is quantised first. No truncation window
    is applied, and centres outside the grid render their visible tail.
    """
    if center.space is not Space.HEATMAP:
        raise InvalidCoordinate("render expects a heatmap-space centre")
    if width < MIN_SIZE or height < MIN_SIZE:
        raise HeatmapTooSmall(f"heatmap must be at least {MIN_SIZE}x{MIN_SIZE}, got {width}x{height}")
    if cfg.biased:
        center = quantise(center, cfg.quant)
    return Heatmap(gaussian_grid(center.u, center.v, width, height, cfg.sigma, cfg.norm), ratio)


def encode_keypoint(g: SubpixelCoord, ratio, width: int, height: int, cfg: EncoderConfig) -> Heatmap:
    """Downscale an image-space keypoint and render its target heatmap."""
    return render(downscale(g, ratio), width, height, cfg, ratio)
