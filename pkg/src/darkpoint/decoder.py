"""Heatmap decoding: raw argmax, quarter-pixel shift and distribution-aware
Taylor re-localisation (DARK).

All decoders work on a single :class:`~darkpoint.encoder.Heatmap` and return a
:class:`DecodeResult` whose coordinate is mapped back to image space.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .encoder import Heatmap
from .errors import InvalidConfig, InvalidHeatmap, NonMaximizingOffset, SingularHessian
from .geometry import Space, SubpixelCoord, check_ratio, upscale

LOG_FLOOR = 1e-10
DET_EPS = 1e-12
MAX_OFFSET = 1.0
DEFAULT_SIGMA_K = 2.0

# (dx, dy) in tie-break order: left, right, up, down
_NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1))


class Fallback(str, enum.Enum):
    NONE = "none"
    BORDER_MAX = "border"
    SINGULAR_HESSIAN = "singular"
    NON_MAXIMIZING_OFFSET = "offset"


@dataclass(frozen=True)
class NoShift:
    name = "none"


@dataclass(frozen=True)
class StandardShift:
    name = "standard"


@dataclass(frozen=True)
class Dark:
    sigma_k: float = DEFAULT_SIGMA_K
    modulate: bool = True
    name = "dark"

    def __post_init__(self):
        if not (math.isfinite(self.sigma_k) and self.sigma_k > 0):
            raise InvalidConfig(f"sigma_k must be > 0, got {self.sigma_k}")


@dataclass(frozen=True)
class DecodeResult:
    coord: SubpixelCoord
    heatmap_coord: SubpixelCoord
    confidence: float
    fallback: Fallback = Fallback.NONE


def _as_pixel(m):
    if isinstance(m, SubpixelCoord):
        return int(m.u), int(m.v)
    x, y = m
    return int(x), int(y)


def _peak(data):
    flat = data.ravel()
    if np.all(np.isnan(flat)):
        raise InvalidHeatmap("heatmap has no finite activation")
    # nanargmax returns the first occurrence, i.e. the smallest row-major index
    idx = int(np.nanargmax(flat))
    y, x = divmod(idx, data.shape[1])
    return x, y


def argmax(h: Heatmap):
    """Return ``(pixel, value)`` of the strongest activation.

    Ties go to the smallest row-major index.
    """
    x, y = _peak(h.data)
    return SubpixelCoord.heatmap(x, y), float(h.data[y, x])


def _second_neighbour(data, x, y):
    height, width = data.shape
    best = None
    best_val = -math.inf
    for dx, dy in _NEIGHBOURS:
        nx, ny = x + dx, y + dy
        if 0 <= nx < width and 0 <= ny < height and data[ny, nx] > best_val:
            best, best_val = (nx, ny), data[ny, nx]
    return best


def second_max_neighbor(h: Heatmap, m) -> SubpixelCoord:
    """Highest in-grid 4-neighbour of ``m``; ties go left, right, up, down."""
    x, y = _as_pixel(m)
    nx, ny = _second_neighbour(h.data, x, y)
    return SubpixelCoord.heatmap(nx, ny)


def _shifted(data, x, y):
    nx, ny = _second_neighbour(data, x, y)
    return x + 0.25 * (nx - x), y + 0.25 * (ny - y)


def _result(u, v, ratio, confidence, fallback=Fallback.NONE):
    hm = SubpixelCoord(float(u), float(v), Space.HEATMAP)
    return DecodeResult(upscale(hm, ratio), hm, confidence, fallback)


def _ratio(h, ratio):
    return h.ratio if ratio is None else check_ratio(ratio)


def _confidence(h):
    return float(h.data.max())


def decode_no_shift(h: Heatmap, ratio=None) -> DecodeResult:
    x, y = _peak(h.data)
    return _result(x, y, _ratio(h, ratio), _confidence(h))


def decode_standard_shift(h: Heatmap, ratio=None) -> DecodeResult:
    """Argmax moved a quarter pixel toward its strongest 4-neighbour."""
    x, y = _peak(h.data)
    u, v = _shifted(h.data, x, y)
    return _result(u, v, _ratio(h, ratio), _confidence(h))


def gaussian_kernel(sigma_k) -> np.ndarray:
    """Normalised 1-D Gaussian taps with half-width ``ceil(3 * sigma_k)``."""
    r = math.ceil(3.0 * sigma_k)
    i = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(i * i) / (2.0 * sigma_k * sigma_k))
    return k / k.sum()


def _blur_axis(data, kernel, axis):
    r = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(data, pad, mode="edge")
    n = data.shape[axis]
    out = np.zeros_like(data)
    for t, w in enumerate(kernel):
        out += w * (padded[t:t + n, :] if axis == 0 else padded[:, t:t + n])
    return out


def modulate(h: Heatmap, sigma_k) -> Heatmap:
    """Smooth ``h`` with a separable Gaussian and restore its value range.

    Borders are handled by edge replication. The blurred map is affinely
    rescaled so that its min and max match those of the input; a flat result
    returns the input unchanged.
    """
    if not (math.isfinite(sigma_k) and sigma_k > 0):
        raise InvalidConfig(f"sigma_k must be > 0, got {sigma_k}")
    kernel = gaussian_kernel(sigma_k)
    blurred = _blur_axis(_blur_axis(h.data, kernel, 1), kernel, 0)
    lo, hi = float(h.data.min()), float(h.data.max())
    blo, bhi = float(blurred.min()), float(blurred.max())
    if not bhi > blo:
        return h
    out = (blurred - blo) * ((hi - lo) / (bhi - blo)) + lo
    return Heatmap(out, h.ratio)


def log_derivatives(h: Heatmap, m):
    """Gradient and Hessian of the clamped log-heatmap at interior pixel ``m``."""
    x, y = _as_pixel(m)
    height, width = h.data.shape
    if not (1 <= x <= width - 2 and 1 <= y <= height - 2):
        raise ValueError(f"pixel ({x}, {y}) is not strictly inside a {width}x{height} heatmap")
    d = np.log(np.maximum(h.data[y - 1:y + 2, x - 1:x + 2], LOG_FLOOR))
    c = d[1, 1]
    dx = 0.5 * (d[1, 2] - d[1, 0])
    dy = 0.5 * (d[2, 1] - d[0, 1])
    dxx = d[1, 2] - 2.0 * c + d[1, 0]
    dyy = d[2, 1] - 2.0 * c + d[0, 1]
    dxy = 0.25 * (d[2, 2] - d[0, 2] - d[2, 0] + d[0, 0])
    return np.array([dx, dy]), np.array([[dxx, dxy], [dxy, dyy]])


def taylor_refine(h: Heatmap, m) -> SubpixelCoord:
    """Newton step on the log-heatmap from the integer peak ``m``.

    Exact when ``h`` is a sampled Gaussian, since its log is quadratic.

    Raises:
        SingularHessian: the Hessian is (near) singular or not negative definite.
        NonMaximizingOffset: the step leaves the unit box around ``m``.
    """
    x, y = _as_pixel(m)
    grad, hess = log_derivatives(h, (x, y))
    det = hess[0, 0] * hess[1, 1] - hess[0, 1] * hess[1, 0]
    if not (abs(det) >= DET_EPS and det > 0 and hess[0, 0] < 0):
        raise SingularHessian(f"log-Hessian at ({x}, {y}) is not negative definite (det={det:.3g})")
    # closed-form 2x2 solve of hess @ offset = -grad
    ox = -(hess[1, 1] * grad[0] - hess[0, 1] * grad[1]) / det
    oy = -(hess[0, 0] * grad[1] - hess[1, 0] * grad[0]) / det
    if abs(ox) > MAX_OFFSET or abs(oy) > MAX_OFFSET:
        raise NonMaximizingOffset(f"offset ({ox:.3g}, {oy:.3g}) exceeds one pixel")
    return SubpixelCoord.heatmap(x + ox, y + oy)


def decode_dark(h: Heatmap, ratio=None, sigma_k=DEFAULT_SIGMA_K, modulation=True) -> DecodeResult:
    """Modulate, take the argmax, refine it with a Taylor step, then upscale.

    Falls back to the quarter-pixel shift (on the same, possibly modulated,
    map) when the peak sits on the border or the refinement is rejected; the
    branch taken is recorded in ``DecodeResult.fallback``.
    """
    ratio = _ratio(h, ratio)
    confidence = _confidence(h)
    work = modulate(h, sigma_k) if modulation else h
    x, y = _peak(work.data)
    height, width = work.data.shape
    if not (1 <= x <= width - 2 and 1 <= y <= height - 2):
        return _result(*_shifted(work.data, x, y), ratio, confidence, Fallback.BORDER_MAX)
    try:
        mu = taylor_refine(work, (x, y))
    except SingularHessian:
        return _result(*_shifted(work.data, x, y), ratio, confidence, Fallback.SINGULAR_HESSIAN)
    except NonMaximizingOffset:
        return _result(*_shifted(work.data, x, y), ratio, confidence, Fallback.NON_MAXIMIZING_OFFSET)
    return _result(mu.u, mu.v, ratio, confidence)


def decode(h: Heatmap, strategy, ratio=None) -> DecodeResult:
    if isinstance(strategy, NoShift):
        return decode_no_shift(h, ratio)
    if isinstance(strategy, StandardShift):
        return decode_standard_shift(h, ratio)
    if isinstance(strategy, Dark):
        return decode_dark(h, ratio, strategy.sigma_k, strategy.modulate)
    raise InvalidConfig(f"unknown decode strategy {strategy!r}")


def parse_strategy(name: str, sigma_k=DEFAULT_SIGMA_K, modulate=True):
    name = name.strip().lower()
    if name in ("none", "no-shift", "noshift", "argmax"):
        return NoShift()
    if name in ("standard", "standard-shift", "shift"):
        return StandardShift()
    if name == "dark":
        return Dark(sigma_k, modulate)
    raise InvalidConfig(f"unknown strategy {name!r} (expected none, standard or dark)")
