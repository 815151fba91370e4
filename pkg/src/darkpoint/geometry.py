"""Coordinate transforms between image space and heatmap space.

Integer coordinates denote pixel centres. Scaling between the two spaces is
a plain multiplication/division by the downsampling ratio, no half-pixel
offset is applied.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import InvalidConfig, InvalidCoordinate


class Space(str, enum.Enum):
    IMAGE = "image"
    HEATMAP = "heatmap"


class QuantMode(str, enum.Enum):
    FLOOR = "floor"
    CEIL = "ceil"
    ROUND = "round"


@dataclass(frozen=True)
class SubpixelCoord:
    u: float
    v: float
    space: Space

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise InvalidCoordinate(f"non-finite coordinate ({self.u}, {self.v})")
        if not isinstance(self.space, Space):
            object.__setattr__(self, "space", Space(self.space))

    @classmethod
    def image(cls, u, v):
        return cls(float(u), float(v), Space.IMAGE)

    @classmethod
    def heatmap(cls, u, v):
        return cls(float(u), float(v), Space.HEATMAP)

    def as_tuple(self):
        return (self.u, self.v)

    def distance(self, other: SubpixelCoord) -> float:
        if self.space is not other.space:
            raise InvalidCoordinate("cannot measure distance across spaces")
        return math.hypot(self.u - other.u, self.v - other.v)


def check_ratio(ratio) -> float:
    ratio = float(ratio)
    if not (math.isfinite(ratio) and ratio > 0):
        raise InvalidConfig(f"downsampling ratio must be a positive finite number, got {ratio}")
    return ratio


def _expect(coord, space):
    if coord.space is not space:
        raise InvalidCoordinate(f"expected a {space.value}-space coordinate, got {coord.space.value}")


def downscale(g: SubpixelCoord, ratio) -> SubpixelCoord:
    """Map an image-space coordinate into heatmap space (``g / ratio``)."""
    _expect(g, Space.IMAGE)
    ratio = check_ratio(ratio)
    return SubpixelCoord(g.u / ratio, g.v / ratio, Space.HEATMAP)


def upscale(p: SubpixelCoord, ratio) -> SubpixelCoord:
    _expect(p, Space.HEATMAP)
    ratio = check_ratio(ratio)
    return SubpixelCoord(p.u * ratio, p.v * ratio, Space.IMAGE)


def round_half_away(x: float) -> float:
    a = abs(x)
    whole = math.floor(a)
    # a - whole is exact in binary floating point; adding 0.5 first is not.
    if a - whole >= 0.5:
        whole += 1
    return math.copysign(whole, x) + 0.0


_QUANTISERS = {
    QuantMode.FLOOR: math.floor,
    QuantMode.CEIL: math.ceil,
    QuantMode.ROUND: round_half_away,
}


def quantise(p: SubpixelCoord, mode: QuantMode) -> SubpixelCoord:
    _expect(p, Space.HEATMAP)
    q = _QUANTISERS[QuantMode(mode)]
    return SubpixelCoord(float(q(p.u)), float(q(p.v)), Space.HEATMAP)
