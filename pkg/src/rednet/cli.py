"""Batch command-line front end: train / corrupt / restore / eval / gradcheck.

Config files for `train` are plain key=value text with `#` comments;
paths inside a config resolve relative to the config file. Every
subcommand is deterministic given its seed.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import data, engine, gradcheck, network
from .optim import AdamHyper
from .tensor import RngStream

__all__ = ["run", "main", "parse_config"]

GRADCHECK_TOLERANCE = 1e-4

_NETWORK_KEYS = {"depth", "filters", "kernel", "channels", "skip",
                 "downsample", "init_seed"}
_TRAIN_KEYS = {"iterations", "batch", "alpha", "beta1", "beta2", "epsilon",
               "patch_size", "patch_stride", "val_fraction", "log_interval",
               "seed", "corruption"}


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line diagnostics instead of usage dumps
        raise _CliError(message)


def _parse_skip(text: str) -> tuple[str, int]:
    mode, _, step = text.partition(":")
    if mode == "none":
        return "none", 1
    if mode in ("mirror", "sequential"):
        return mode, int(step) if step else 2
    raise ValueError(f"bad skip spec {text!r} (expected none, mirror:STEP "
                     f"or sequential:BLOCK)")


def parse_config(path: str) -> tuple[network.NetworkConfig, engine.TrainConfig]:
    """Read a key=value config file into network and training configs."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value, "
                                 f"got {line!r}")
            key, value = key.strip(), value.strip()
            if key in raw:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value
    unknown = set(raw) - _NETWORK_KEYS - _TRAIN_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown config keys: "
                         f"{', '.join(sorted(unknown))}")
    if "corruption" not in raw:
        raise ValueError(f"{path}: missing required key 'corruption'")

    base = os.path.dirname(os.path.abspath(path))
    spec = data.parse_corruption_spec(raw["corruption"])
    if isinstance(spec, data.PairDir) and not os.path.isabs(spec.path):
        spec = data.PairDir(os.path.normpath(os.path.join(base, spec.path)))

    skip_mode, skip_step = _parse_skip(raw.get("skip", "mirror:2"))
    down = tuple(int(v) for v in raw["downsample"].split(",")) \
        if raw.get("downsample") else ()
    netcfg = network.NetworkConfig(
        depth=int(raw.get("depth", 10)),
        filters=int(raw.get("filters", 64)),
        kernel=int(raw.get("kernel", 3)),
        channels=int(raw.get("channels", 1)),
        skip_mode=skip_mode,
        skip_step=skip_step,
        downsample_layers=down,
        init_seed=int(raw.get("init_seed", 0)),
    )
    hyper = AdamHyper(alpha=float(raw.get("alpha", 1e-4)),
                      beta1=float(raw.get("beta1", 0.9)),
                      beta2=float(raw.get("beta2", 0.999)),
                      epsilon=float(raw.get("epsilon", 1e-8)))
    traincfg = engine.TrainConfig(
        corruption=spec,
        iterations=int(raw.get("iterations", 1000)),
        batch=int(raw.get("batch", 32)),
        hyper=hyper,
        patch_size=int(raw.get("patch_size", 50)),
        patch_stride=int(raw["patch_stride"]) if "patch_stride" in raw
        else None,
        val_fraction=float(raw.get("val_fraction", 0.1)),
        log_interval=int(raw.get("log_interval", 100)),
        seed=int(raw.get("seed", 0)),
    )
    return netcfg, traincfg


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _cmd_train(args) -> int:
    netcfg, traincfg = parse_config(args.config)
    if isinstance(traincfg.corruption, data.PairDir):
        images = None
    else:
        names = sorted(f for f in os.listdir(args.data)
                       if f.endswith(".pgm"))
        if not names:
            raise ValueError(f"{args.data}: no .pgm images found")
        images = [data.read_pgm(os.path.join(args.data, f)) for f in names]
    net, log = engine.train(netcfg, traincfg, images)
    network.save(net, args.out)
    _write_atomic(args.out + ".csv", log.to_csv())
    final = log.records[-1] if log.records else (0, math.nan, math.nan)
    print(f"trained {traincfg.iterations} iterations: "
          f"loss={final[1]:.6g} val_psnr={final[2]:.4f} "
          f"model={args.out} log={args.out}.csv")
    return 0


def _cmd_corrupt(args) -> int:
    spec = data.parse_corruption_spec(args.spec)
    img = data.read_pgm(args.input)
    out = data.corrupt(img, spec, RngStream(args.seed))
    data.write_pgm(out, args.output)
    return 0


def _cmd_restore(args) -> int:
    net = network.load(args.model)
    img = data.read_pgm(args.input)
    run = engine.restore_ensemble if args.ensemble else engine.restore
    data.write_pgm(run(net, img), args.output)
    return 0


def _cmd_eval(args) -> int:
    from .metrics import psnr, ssim
    clean = data.read_pgm(args.clean)
    restored = data.read_pgm(args.restored)
    p = psnr(restored, clean)
    s = ssim(restored, clean)
    p_text = "inf" if math.isinf(p) else f"{p:.4f}"
    print(f"psnr={p_text} ssim={s:.6f}")
    return 0


def _cmd_gradcheck(args) -> int:
    skip_mode, skip_step = _parse_skip(args.skip)
    down = tuple(int(v) for v in args.downsample.split(",")) \
        if args.downsample else ()
    cfg = network.NetworkConfig(depth=args.depth, filters=args.filters,
                                kernel=args.kernel, channels=1,
                                skip_mode=skip_mode, skip_step=skip_step,
                                downsample_layers=down, init_seed=args.seed)
    err = gradcheck.network_gradcheck(cfg, size=args.size, seed=args.seed)
    print(f"max_rel_err={err:.6e}")
    return 0 if err < GRADCHECK_TOLERANCE else 1


def _build_parser() -> _Parser:
    parser = _Parser(prog="rednet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True,
                   help="directory of clean .pgm training images")
    p.add_argument("--out", required=True,
                   help="model output path; the CSV log goes to OUT.csv")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("corrupt", help="synthesize a corrupted image")
    p.add_argument("--spec", required=True,
                   help="e.g. gaussian:30, sr:3, blur:disk:5, text:10:0.1, "
                        "blind:gaussian:10,gaussian:70")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=_cmd_corrupt)

    p = sub.add_parser("restore", help="run a model over an image")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--ensemble", action="store_true",
                   help="average the 8 rotation/flip passes")
    p.set_defaults(fn=_cmd_restore)

    p = sub.add_parser("eval", help="PSNR/SSIM between two images")
    p.add_argument("--clean", required=True)
    p.add_argument("--restored", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of the backward pass")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--filters", type=int, default=4)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--skip", default="mirror:1")
    p.add_argument("--downsample", default="",
                   help="comma-separated encoder layer indices using stride 2")
    p.add_argument("--size", type=int, default=8,
                   help="test input height/width")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=_cmd_gradcheck)
    return parser


def run(argv: list[str]) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
