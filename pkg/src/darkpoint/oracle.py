"""Brute-force Gaussian centre fit used to cross-check the Taylor decoder.

Deliberately shares no code with :mod:`darkpoint.decoder`: it never takes
logs or finite differences, it only scores candidate centres by least squares.
"""

import numpy as np

from .encoder import Heatmap
from .geometry import SubpixelCoord

COARSE_STEP = 0.01
COARSE_HALF_WIDTH = 1.5
FINE_STEP = 0.001


def _profiles(centres, n, sigma):
    t = np.arange(n, dtype=np.float64)[None, :] - centres[:, None]
    return np.exp(-(t * t) / (2.0 * sigma * sigma))


def _best(data, us, vs, sigma):
    # For a fixed centre the optimal amplitude is closed-form, and the residual
    # is minimised by maximising <h, G>^2 / <G, G>. G is separable.
    gx = _profiles(us, data.shape[1], sigma)
    gy = _profiles(vs, data.shape[0], sigma)
    cross = gy @ data @ gx.T
    norm = np.outer((gy * gy).sum(axis=1), (gx * gx).sum(axis=1))
    score = cross * cross / norm
    iv, iu = np.unravel_index(int(np.argmax(score)), score.shape)
    return us[iu], vs[iv]


def oracle_localize(h: Heatmap, sigma_assumed: float) -> SubpixelCoord:
    """Least-squares centre of a Gaussian of scale ``sigma_assumed``.

    Exhaustive search on a 0.01 px lattice within +-1.5 px of the argmax,
    followed by one 0.001 px pass around the coarse winner.
    """
    data = np.asarray(h.data, dtype=np.float64)
    iy, ix = np.unravel_index(int(np.argmax(data)), data.shape)
    n = int(round(COARSE_HALF_WIDTH / COARSE_STEP))
    steps = np.arange(-n, n + 1) / (1.0 / COARSE_STEP)
    u0, v0 = _best(data, ix + steps, iy + steps, sigma_assumed)
    fine = np.arange(-10, 11) / (1.0 / FINE_STEP)
    u, v = _best(data, u0 + fine, v0 + fine, sigma_assumed)
    return SubpixelCoord.heatmap(u, v)
