"""``darkpoint`` command line: gen, encode, decode, bench.

Exit codes: 0 success, 1 I/O error, 2 config/validation error, 3 bad HMAP data.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import hmap
from .bench import ENCODINGS, generate_trials, run_bench, trial_heatmap
from .config import KEYS, ConfigError, load_config_file, resolve
from .decoder import decode, parse_strategy
from .encoder import EncoderConfig, NormMode, encode_keypoint
from .errors import DarkpointError, HmapFormatError, InvalidConfig
from .geometry import SubpixelCoord

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_FORMAT = 0, 1, 2, 3

PRESETS = {
    "table1": (["unbiased"], ["none", "standard", "dark"]),
    "table2": (["biased-round", "unbiased"], ["standard", "dark"]),
}

STRATEGY_LABELS = {"none": "No Shifting", "standard": "Standard Shifting", "dark": "DARK"}
ENCODING_LABELS = {"unbiased": "Unbiased", "biased-round": "Biased(round)",
                   "biased-floor": "Biased(floor)", "biased-ceil": "Biased(ceil)"}


def _num(x) -> str:
    # repr is the shortest string that round-trips a float64 (hence any float32)
    return repr(float(x))


def _add_global(p):
    p.add_argument("--config", default=argparse.SUPPRESS, metavar="FILE",
                   help="flat key = value config file (CLI flags take precedence)")
    p.add_argument("--seed", default=argparse.SUPPRESS, help=KEYS["seed"].help)
    p.add_argument("--out-dir", dest="out_dir", default=argparse.SUPPRESS, help=KEYS["out_dir"].help)


def _add_keys(p, names):
    for name in names:
        key = KEYS[name]
        p.add_argument(key.flag, dest=name, default=argparse.SUPPRESS, help=key.help or None)


_TRIAL_KEYS = ["width", "height", "ratio", "sigma", "n", "margin", "norm", "noise", "noise_amplitude",
               "distractor_count", "distractor_fraction", "render_sigma"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darkpoint", allow_abbrev=False,
                                     description="Distribution-aware keypoint heatmap codec.")
    _add_global(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", allow_abbrev=False, help="write random keypoints and their HMAP heatmaps")
    _add_global(gen)
    _add_keys(gen, _TRIAL_KEYS + ["bias", "quant"])

    enc = sub.add_parser("encode", allow_abbrev=False, help="render one keypoint into an HMAP file")
    _add_global(enc)
    _add_keys(enc, ["width", "height", "ratio", "sigma", "norm", "bias", "quant"])
    enc.add_argument("--u", type=float, required=True, help="image-space x")
    enc.add_argument("--v", type=float, required=True, help="image-space y")
    enc.add_argument("--output", "-o", help="output file (default: <out-dir>/keypoint.hmap)")

    dec = sub.add_parser("decode", allow_abbrev=False, help="decode HMAP files to image coordinates")
    _add_global(dec)
    _add_keys(dec, ["sigma", "sigma_k", "modulate"])
    dec.add_argument("files", nargs="+")
    dec.add_argument("--strategy", default="dark", help="none, standard or dark")
    dec.add_argument("--output", "-o", help="write CSV here instead of stdout")

    bench = sub.add_parser("bench", allow_abbrev=False, help="run the synthetic decoding benchmark")
    _add_global(bench)
    _add_keys(bench, _TRIAL_KEYS + ["encodings", "strategies", "sigma_k", "modulate"])
    bench.add_argument("--preset", choices=sorted(PRESETS), help="ablation grid to run")
    return parser


def _run_config(args):
    ns = vars(args)
    file_values = load_config_file(ns["config"]) if "config" in ns else None
    return resolve({k: v for k, v in ns.items() if k in KEYS}, file_values)


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)


def cmd_gen(args, out):
    rc = _run_config(args)
    if rc.encoding not in ENCODINGS:
        raise ConfigError(f"unknown encoding {rc.encoding}")
    cfg = rc.trial_config()
    truth = generate_trials(cfg)
    _ensure_dir(rc.out_dir)
    width = len(str(cfg.trials - 1))
    rows = ["trial_id,u,v"]
    for i, g in enumerate(truth):
        h = trial_heatmap(cfg, g, i, rc.encoding)
        path = os.path.join(rc.out_dir, f"trial_{i:0{width}d}.hmap")
        payload = hmap.dumps(h)
        hmap.atomic_write(path, payload)
        print(f"{path},{len(payload)}", file=out)
        rows.append(f"{i},{_num(g.u)},{_num(g.v)}")
    truth_path = os.path.join(rc.out_dir, "truth.csv")
    hmap.atomic_write(truth_path, ("\n".join(rows) + "\n").encode())
    print(f"{truth_path},{os.path.getsize(truth_path)}", file=out)


def cmd_encode(args, out):
    rc = _run_config(args)
    cfg = EncoderConfig(rc.sigma, ENCODINGS[rc.encoding], NormMode(rc.norm))
    h = encode_keypoint(SubpixelCoord.image(args.u, args.v), rc.ratio, rc.width, rc.height, cfg)
    path = args.output or os.path.join(rc.out_dir, "keypoint.hmap")
    parent = os.path.dirname(path)
    if parent:
        _ensure_dir(parent)
    payload = hmap.dumps(h)
    hmap.atomic_write(path, payload)
    print(f"{path},{len(payload)}", file=out)


def cmd_decode(args, out):
    rc = _run_config(args)
    strategy = parse_strategy(args.strategy, rc.effective_sigma_k, rc.modulation(False))
    rows = ["file,strategy,u_img,v_img,confidence,fallback"]
    # decode everything before emitting anything, so a bad file yields no rows
    for path in args.files:
        r = decode(hmap.read_hmap(path), strategy)
        rows.append(",".join([path, strategy.name, _num(r.coord.u), _num(r.coord.v),
                              _num(r.confidence), r.fallback.value]))
    text = "\n".join(rows) + "\n"
    if args.output:
        hmap.atomic_write(args.output, text.encode())
    else:
        out.write(text)


def format_table(report) -> str:
    cols = ("mean_err", "median_err", "p95_err", "rate@0.5")
    lines = []
    if len(report.encodings) == 1:
        lines.append(f"Encoding: {ENCODING_LABELS.get(report.encodings[0], report.encodings[0])}")
        head = f"{'Decoding':<20}" + "".join(f"{c:>14}" for c in cols)
    else:
        head = f"{'Encode':<16}{'Decode':<20}" + "".join(f"{c:>14}" for c in cols)
    lines += [head, "-" * len(head)]
    for enc in report.encodings:
        for strat in report.strategies:
            c = report.cell(enc, strat)
            vals = (c.mean_err, c.median_err, c.p95_err, c.rates["0.5"])
            label = f"{STRATEGY_LABELS.get(strat, strat):<20}"
            if len(report.encodings) > 1:
                label = f"{ENCODING_LABELS.get(enc, enc):<16}" + label
            lines.append(label + "".join(f"{v:>14.9g}" for v in vals))
    lines.append("(errors in image pixels)")
    return "\n".join(lines) + "\n"


def cmd_bench(args, out):
    rc = _run_config(args)
    if args.preset:
        rc.encodings, rc.strategies = (list(x) for x in PRESETS[args.preset])
    cfg = rc.trial_config()
    modulate = rc.modulation(cfg.noise.kind != "clean")
    report = run_bench(cfg, rc.encodings, rc.strategy_objects(modulate))
    _ensure_dir(rc.out_dir)
    stem = f"report_{args.preset}" if args.preset else "report"
    json_path = os.path.join(rc.out_dir, stem + ".json")
    csv_path = os.path.join(rc.out_dir, stem + ".csv")
    hmap.atomic_write(json_path, report.to_json().encode())
    hmap.atomic_write(csv_path, report.to_csv().encode())
    out.write(format_table(report))
    print(f"wrote {json_path}", file=out)
    print(f"wrote {csv_path}", file=out)


COMMANDS = {"gen": cmd_gen, "encode": cmd_encode, "decode": cmd_decode, "bench": cmd_bench}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args, out)
    except HmapFormatError as exc:
        print(f"darkpoint: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (InvalidConfig, ConfigError) as exc:
        print(f"darkpoint: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        where = f": {exc.filename}" if exc.filename else ""
        print(f"darkpoint: I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except DarkpointError as exc:
        print(f"darkpoint: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
