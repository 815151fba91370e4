"""Synthetic benchmark: encode random sub-pixel keypoints, corrupt, decode.

Every trial draws its own noise stream from ``SeedSequence(seed, spawn_key=(1, i))``
so results do not depend on how trials are split across worker threads.
Within a trial all encodings share one noise realisation and all strategies
see the same heatmap (paired design).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .decoder import Dark, Fallback, NoShift, StandardShift, decode
from .encoder import Heatmap, NormMode, gaussian_grid
from .errors import InvalidConfig
from .geometry import QuantMode, SubpixelCoord, check_ratio, downscale, quantise

THRESHOLDS = (0.1, 0.5, 1.0)
THREADS_ENV = "DARKPOINT_THREADS"
DISTRACTOR_MIN_SIGMAS = 4.0
_MAX_PLACEMENT_ATTEMPTS = 1000

ENCODINGS = {
    "unbiased": None,
    "biased-round": QuantMode.ROUND,
    "biased-floor": QuantMode.FLOOR,
    "biased-ceil": QuantMode.CEIL,
}


@dataclass(frozen=True)
class Clean:
    kind = "clean"


@dataclass(frozen=True)
class AdditiveGaussian:
    """i.i.d. Gaussian noise with std ``amplitude`` relative to the peak value."""

    amplitude: float = 1e-3
    kind = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise InvalidConfig(f"noise amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class Distractor:
    count: int = 1
    peak_fraction: float = 0.5
    kind = "distractor"

    def __post_init__(self):
        if self.count < 0:
            raise InvalidConfig(f"distractor count must be >= 0, got {self.count}")
        if not 0 < self.peak_fraction < 1:
            raise InvalidConfig(f"peak_fraction must lie in (0, 1), got {self.peak_fraction}")


@dataclass(frozen=True)
class SigmaMismatch:
    """Render with ``render_sigma`` while decoders assume the configured sigma."""

    render_sigma: float = 2.5
    kind = "sigma-mismatch"

    def __post_init__(self):
        if not (math.isfinite(self.render_sigma) and self.render_sigma > 0):
            raise InvalidConfig(f"render_sigma must be > 0, got {self.render_sigma}")


@dataclass(frozen=True)
class TrialConfig:
    width: int = 64
    height: int = 48
    ratio: float = 4.0
    sigma: float = 2.0
    trials: int = 1000
    seed: int = 0
    noise: object = field(default_factory=Clean)
    margin: float | None = None
    norm: NormMode = NormMode.PEAK_ONE

    def __post_init__(self):
        check_ratio(self.ratio)
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidConfig(f"sigma must be > 0, got {self.sigma}")
        if self.width < 3 or self.height < 3:
            raise InvalidConfig(f"heatmap must be at least 3x3, got {self.width}x{self.height}")
        if self.trials < 1:
            raise InvalidConfig(f"trial count must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "norm", NormMode(self.norm))
        m = self.effective_margin
        if m < 2:
            raise InvalidConfig(f"margin must be >= 2, got {m}")
        if self.width - 2 * m < 1 or self.height - 2 * m < 1:
            raise InvalidConfig(f"margin {m} leaves no interior in a {self.width}x{self.height} heatmap")

    @property
    def effective_margin(self) -> float:
        if self.margin is not None:
            return float(self.margin)
        # 3 sigma, clamped so that an interior region still exists
        return max(2.0, min(3.0 * self.sigma, (min(self.width, self.height) - 1) / 2.0))

    def describe(self) -> dict:
        d = {
            "width": self.width,
            "height": self.height,
            "ratio": self.ratio,
            "sigma": self.sigma,
            "trials": self.trials,
            "seed": self.seed,
            "margin": self.effective_margin,
            "norm": self.norm.value,
            "noise": self.noise.kind,
        }
        d.update({f"noise_{k}": v for k, v in asdict(self.noise).items()})
        return d


def _rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def generate_trials(cfg: TrialConfig) -> list[SubpixelCoord]:
    """Image-space keypoints whose heatmap positions are uniform over the interior."""
    m = cfg.effective_margin
    rng = _rng(cfg.seed, 0)
    us = rng.uniform(m, cfg.width - 1 - m, cfg.trials)
    vs = rng.uniform(m, cfg.height - 1 - m, cfg.trials)
    return [SubpixelCoord.image(u * cfg.ratio, v * cfg.ratio) for u, v in zip(us, vs)]


def _prefactor(cfg, sigma):
    return 1.0 if cfg.norm is NormMode.PEAK_ONE else 1.0 / (2.0 * math.pi * sigma * sigma)


def _place_distractors(cfg, centre, noise, rng):
    min_d = DISTRACTOR_MIN_SIGMAS * cfg.sigma
    spots = []
    for _ in range(noise.count):
        for _ in range(_MAX_PLACEMENT_ATTEMPTS):
            x = rng.uniform(0, cfg.width - 1)
            y = rng.uniform(0, cfg.height - 1)
            if math.hypot(x - centre.u, y - centre.v) >= min_d:
                spots.append((x, y))
                break
        else:
            raise InvalidConfig(f"cannot place a distractor {min_d:g} px away from the keypoint")
    return spots


class _TrialNoise:
    """One trial's noise realisation, applied identically to every encoding."""

    def __init__(self, cfg: TrialConfig, centre: SubpixelCoord, index: int):
        self.cfg = cfg
        noise = cfg.noise
        self.render_sigma = noise.render_sigma if isinstance(noise, SigmaMismatch) else cfg.sigma
        self.additive = None
        self.overlay = None
        rng = _rng(cfg.seed, 1, index)
        if isinstance(noise, AdditiveGaussian):
            scale = noise.amplitude * _prefactor(cfg, cfg.sigma)
            self.additive = scale * rng.standard_normal((cfg.height, cfg.width))
        elif isinstance(noise, Distractor) and noise.count:
            overlay = np.zeros((cfg.height, cfg.width))
            for x, y in _place_distractors(cfg, centre, noise, rng):
                bump = gaussian_grid(x, y, cfg.width, cfg.height, cfg.sigma, cfg.norm)
                np.maximum(overlay, noise.peak_fraction * bump, out=overlay)
            self.overlay = overlay

    def heatmap(self, centre: SubpixelCoord) -> Heatmap:
        cfg = self.cfg
        data = gaussian_grid(centre.u, centre.v, cfg.width, cfg.height, self.render_sigma, cfg.norm)
        if self.overlay is not None:
            data = np.maximum(data, self.overlay)
        if self.additive is not None:
            data = data + self.additive
        return Heatmap(data, cfg.ratio)


def trial_heatmap(cfg: TrialConfig, g: SubpixelCoord, index: int, encoding="unbiased") -> Heatmap:
    """Rendered and corrupted heatmap of trial ``index`` for keypoint ``g`` (image space)."""
    g_hm = downscale(g, cfg.ratio)
    quant = ENCODINGS[encoding]
    centre = quantise(g_hm, quant) if quant is not None else g_hm
    return _TrialNoise(cfg, g_hm, index).heatmap(centre)


@dataclass
class CellStats:
    mean_err: float
    median_err: float
    p95_err: float
    max_err: float
    mean_err_hm: float
    max_err_hm: float
    rates: dict
    fallbacks: dict
    ns_per_decode: float

    def as_dict(self, timing=True) -> dict:
        d = {
            "mean_err": self.mean_err,
            "median_err": self.median_err,
            "p95_err": self.p95_err,
            "max_err": self.max_err,
            "mean_err_hm": self.mean_err_hm,
            "max_err_hm": self.max_err_hm,
            "rates": self.rates,
            "fallbacks": self.fallbacks,
        }
        if timing:
            d["ns_per_decode"] = self.ns_per_decode
        return d


CSV_COLUMNS = (
    "encoding", "strategy", "mean_err", "median_err", "p95_err",
    "rate_0.1", "rate_0.5", "rate_1.0",
    "fallback_border", "fallback_singular", "fallback_offset", "ns_per_decode",
)


@dataclass
class BenchReport:
    config: dict
    encodings: list
    strategies: list
    cells: dict

    def cell(self, encoding, strategy) -> CellStats:
        return self.cells[f"{encoding}/{strategy}"]

    def to_json(self, timing=False) -> str:
        """Serialise the report. Wall-clock fields are omitted unless asked for,
        which keeps the output byte-identical across runs with the same seed."""
        doc = {
            "config": self.config,
            "encodings": self.encodings,
            "strategies": self.strategies,
            "cells": {k: c.as_dict(timing) for k, c in self.cells.items()},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for enc in self.encodings:
            for strat in self.strategies:
                c = self.cell(enc, strat)
                row = [enc, strat, c.mean_err, c.median_err, c.p95_err,
                       *(c.rates[f"{t}"] for t in THRESHOLDS),
                       c.fallbacks["border"], c.fallbacks["singular"], c.fallbacks["offset"],
                       c.ns_per_decode]
                lines.append(",".join(v if isinstance(v, str) else repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def resolve_threads(threads=None) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        try:
            threads = int(raw) if raw else 0
        except ValueError:
            raise InvalidConfig(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if threads < 0:
        raise InvalidConfig(f"thread count must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


def _strategy_key(s):
    return s.name


def _unique(items):
    seen = []
    for it in items:
        if it not in seen:
            seen.append(it)
    return seen


def run_bench(cfg: TrialConfig, encodings, strategies, threads=None) -> BenchReport:
    """Evaluate every (encoding, strategy) pair on one shared trial sequence.

    ``encodings`` are names from :data:`ENCODINGS`; ``strategies`` are decoder
    strategy objects. Statistics are reduced over per-trial arrays indexed by
    trial id, so serial and threaded runs give identical numbers.
    """
    encodings = _unique(encodings)
    strategies = _unique(strategies)
    if not encodings or not strategies:
        raise InvalidConfig("need at least one encoding and one strategy")
    for enc in encodings:
        if enc not in ENCODINGS:
            raise InvalidConfig(f"unknown encoding {enc!r} (expected one of {', '.join(ENCODINGS)})")
    names = [_strategy_key(s) for s in strategies]
    if len(set(names)) != len(names):
        raise InvalidConfig(f"duplicate strategy names in {names}")

    truth = generate_trials(cfg)
    n, ne, ns = cfg.trials, len(encodings), len(strategies)
    err = np.zeros((ne, ns, n))
    err_hm = np.zeros((ne, ns, n))
    tags = np.empty((ne, ns, n), dtype=object)
    elapsed = np.zeros((ne, ns, n), dtype=np.int64)

    def work(indices):
        for i in indices:
            g = truth[i]
            g_hm = downscale(g, cfg.ratio)
            noise = _TrialNoise(cfg, g_hm, i)
            for a, enc in enumerate(encodings):
                quant = ENCODINGS[enc]
                centre = quantise(g_hm, quant) if quant is not None else g_hm
                h = noise.heatmap(centre)
                for b, strat in enumerate(strategies):
                    t0 = time.perf_counter_ns()
                    r = decode(h, strat)
                    elapsed[a, b, i] = time.perf_counter_ns() - t0
                    err[a, b, i] = r.coord.distance(g)
                    err_hm[a, b, i] = r.heatmap_coord.distance(g_hm)
                    tags[a, b, i] = r.fallback

    workers = min(resolve_threads(threads), n)
    if workers <= 1:
        work(range(n))
    else:
        chunks = np.array_split(np.arange(n), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(work, c.tolist()) for c in chunks]:
                f.result()

    cells = {}
    for a, enc in enumerate(encodings):
        for b, name in enumerate(names):
            e = err[a, b]
            t = tags[a, b]
            cells[f"{enc}/{name}"] = CellStats(
                mean_err=float(np.mean(e)),
                median_err=float(np.median(e)),
                p95_err=float(np.percentile(e, 95)),
                max_err=float(np.max(e)),
                mean_err_hm=float(np.mean(err_hm[a, b])),
                max_err_hm=float(np.max(err_hm[a, b])),
                rates={f"{th}": float(np.mean(e < th)) for th in THRESHOLDS},
                fallbacks={
                    "border": float(np.mean(t == Fallback.BORDER_MAX)),
                    "singular": float(np.mean(t == Fallback.SINGULAR_HESSIAN)),
                    "offset": float(np.mean(t == Fallback.NON_MAXIMIZING_OFFSET)),
                },
                ns_per_decode=float(np.mean(elapsed[a, b])),
            )

    config = cfg.describe()
    config["strategies"] = {name: _describe_strategy(s) for name, s in zip(names, strategies)}
    return BenchReport(config, list(encodings), names, cells)


def _describe_strategy(s):
    if isinstance(s, Dark):
        return {"sigma_k": s.sigma_k, "modulate": s.modulate}
    return {}


def default_strategies(sigma_k=None, modulate=True, cfg: TrialConfig | None = None):
    if sigma_k is None:
        sigma_k = cfg.sigma if cfg is not None else 2.0
    return [NoShift(), StandardShift(), Dark(sigma_k, modulate)]


def noise_from_name(kind, amplitude=1e-3, count=1, peak_fraction=0.5, render_sigma=2.5):
    kind = kind.strip().lower()
    if kind == "clean":
        return Clean()
    if kind == "gaussian":
        return AdditiveGaussian(amplitude)
    if kind == "distractor":
        return Distractor(int(count), peak_fraction)
    if kind == "sigma-mismatch":
        return SigmaMismatch(render_sigma)
    raise InvalidConfig(f"unknown noise model {kind!r} (expected clean, gaussian, distractor or sigma-mismatch)")


