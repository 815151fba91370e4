"""Flat ``key = value`` run configuration with CLI overrides.

Precedence is CLI flag > config file > built-in default. Unknown keys in a
config file are rejected so typos never pass silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bench import ENCODINGS, TrialConfig, noise_from_name
from .decoder import DEFAULT_SIGMA_K, parse_strategy
from .encoder import NormMode
from .errors import InvalidConfig


class ConfigError(InvalidConfig):
    pass


def _int(s):
    return int(str(s).strip())


def _float(s):
    return float(str(s).strip())


def _str(s):
    return str(s).strip()


def _list(s):
    if isinstance(s, (list, tuple)):
        return [str(x).strip() for x in s if str(x).strip()]
    return [p.strip() for p in str(s).split(",") if p.strip()]


def _auto_float(s):
    s = str(s).strip().lower()
    return None if s == "auto" else float(s)


def _choice(*options):
    def parse(s):
        s = str(s).strip().lower()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _positive(x):
    return x is not None and math.isfinite(x) and x > 0


@dataclass(frozen=True)
class Key:
    name: str
    flag: str
    parse: object
    default: object
    check: object = None
    rule: str = ""
    help: str = ""


KEYS = {k.name: k for k in (
    Key("width", "--w", _int, 64, lambda x: x >= 3, "must be >= 3", "heatmap width in pixels"),
    Key("height", "--h", _int, 48, lambda x: x >= 3, "must be >= 3", "heatmap height in pixels"),
    Key("ratio", "--lambda", _float, 4.0, _positive, "must be > 0", "downsampling ratio image/heatmap"),
    Key("sigma", "--sigma", _float, 2.0, _positive, "must be > 0", "Gaussian sigma in heatmap pixels"),
    Key("n", "--n", _int, 1000, lambda x: x >= 1, "must be >= 1", "number of trials"),
    Key("seed", "--seed", _int, 0, lambda x: 0 <= x < 2**64, "must be a 64-bit unsigned integer", "RNG seed"),
    Key("margin", "--margin", _auto_float, None, lambda x: x is None or x >= 2, "must be >= 2 or auto",
        "min distance of keypoints from the border (auto = 3 sigma)"),
    Key("norm", "--norm", _choice("peak", "density"), "peak", help="peak-one or unit-mass normalisation"),
    Key("bias", "--bias", _choice("unbiased", "biased"), "unbiased", help="encoding used by gen/encode"),
    Key("quant", "--quant", _choice("round", "floor", "ceil"), "round", help="quantiser for biased encoding"),
    Key("noise", "--noise", _choice("clean", "gaussian", "distractor", "sigma-mismatch"), "clean",
        help="corruption applied by gen/bench"),
    Key("noise_amplitude", "--noise-amplitude", _float, 1e-3, lambda x: math.isfinite(x) and x >= 0,
        "must be >= 0", "std of additive noise relative to the peak"),
    Key("distractor_count", "--distractor-count", _int, 1, lambda x: x >= 0, "must be >= 0"),
    Key("distractor_fraction", "--distractor-fraction", _float, 0.5, lambda x: 0 < x < 1, "must lie in (0, 1)"),
    Key("render_sigma", "--render-sigma", _float, 2.5, _positive, "must be > 0",
        "actual sigma for the sigma-mismatch noise model"),
    Key("encodings", "--encodings", _list, ["unbiased"],
        lambda xs: bool(xs) and all(x in ENCODINGS for x in xs),
        f"must be a non-empty list drawn from {', '.join(ENCODINGS)}"),
    Key("strategies", "--strategies", _list, ["none", "standard", "dark"],
        lambda xs: bool(xs) and all(x in ("none", "standard", "dark") for x in xs),
        "must be a non-empty list drawn from none, standard, dark"),
    Key("sigma_k", "--sigma-k", _auto_float, None, lambda x: x is None or _positive(x), "must be > 0 or auto",
        "modulation kernel sigma (auto = encoder sigma)"),
    Key("modulate", "--modulate", _choice("auto", "on", "off"), "auto",
        help="Gaussian modulation before Taylor refinement (auto: bench on for noisy data, decode off)"),
    Key("out_dir", "--out-dir", _str, ".", lambda x: bool(x), "must not be empty", "output directory"),
)}


def parse_config_text(text: str, source="<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = (value, f"{key} ({source}:{lineno})")
    return values


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read(), str(path))


@dataclass
class RunConfig:
    width: int
    height: int
    ratio: float
    sigma: float
    n: int
    seed: int
    margin: float | None
    norm: str
    bias: str
    quant: str
    noise: str
    noise_amplitude: float
    distractor_count: int
    distractor_fraction: float
    render_sigma: float
    encodings: list
    strategies: list
    sigma_k: float | None
    modulate: str
    out_dir: str

    @property
    def encoding(self) -> str:
        return "unbiased" if self.bias == "unbiased" else f"biased-{self.quant}"

    @property
    def effective_sigma_k(self) -> float:
        if self.sigma_k is not None:
            return self.sigma_k
        return self.sigma if self.sigma else DEFAULT_SIGMA_K

    def modulation(self, default: bool) -> bool:
        return default if self.modulate == "auto" else self.modulate == "on"

    def noise_model(self):
        return noise_from_name(self.noise, self.noise_amplitude, self.distractor_count,
                               self.distractor_fraction, self.render_sigma)

    def trial_config(self) -> TrialConfig:
        return TrialConfig(self.width, self.height, self.ratio, self.sigma, self.n, self.seed,
                           self.noise_model(), self.margin, NormMode(self.norm))

    def strategy_objects(self, modulate: bool):
        return [parse_strategy(s, self.effective_sigma_k, modulate) for s in self.strategies]


def resolve(cli_values: dict, file_values: dict | None = None) -> RunConfig:
    """Merge defaults, config-file entries and CLI flags, validating each key.

    ``cli_values`` maps key names to raw flag values; ``file_values`` maps
    key names to ``(raw, label)`` pairs as produced by :func:`parse_config_text`.
    Errors name the flag or config entry that supplied the bad value.
    """
    merged = {}
    for name, key in KEYS.items():
        if name in cli_values and cli_values[name] is not None:
            raw, label = cli_values[name], key.flag
        elif file_values and name in file_values:
            raw, label = file_values[name]
        else:
            merged[name] = key.default
            continue
        try:
            value = key.parse(raw)
        except ValueError as exc:
            raise ConfigError(f"invalid value for {label}: {raw!r} ({exc})") from None
        if key.check is not None and not key.check(value):
            raise ConfigError(f"invalid value for {label}: {raw!r} {key.rule}")
        merged[name] = value
    return RunConfig(**merged)
