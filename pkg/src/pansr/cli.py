"""Command-line interface: pansharpen, tile, train, sr, evaluate, synth, gradcheck.

Each subcommand reads an optional JSON config file (``--config``); flags
override config values.  The resolved configuration is echoed to stderr at
start so every run is auditable, keeping stdout reserved for the actual
results (reports, paths).  Exit codes: 0 success, 1 validation/usage error,
2 runtime failure.  PANSR_SEED provides a seed fallback when neither flag nor
config sets one.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import SCALE, TileSpec, build_dataset, load_dataset, iter_pairs, read_scene_list, write_synth_scenes
from .metrics import FsimParams, IssmParams, METRIC_NAMES, SsimParams, evaluate
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.gradcheck import grad_check
from .nn.infer import super_resolve
from .nn.network import ARCHITECTURES, Network, build_architecture
from .nn.train import TrainConfig, prepare_inputs, prepare_targets, train
from .pansharp import SfimParams, pansharpen_scene
from .raster import read_raster, write_raster
from .util import resolve_seed


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved settings for one command invocation; scale is fixed at 4."""

    command: str
    paths: dict = field(default_factory=dict)
    scale: int = SCALE
    seed: int = 0
    threads: int | None = None
    architecture: str | None = None
    tile: TileSpec | None = None
    sfim: SfimParams | None = None
    train: TrainConfig | None = None
    ssim_params: SsimParams = field(default_factory=SsimParams)
    fsim_params: FsimParams = field(default_factory=FsimParams)
    issm_params: IssmParams = field(default_factory=IssmParams)
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.scale != SCALE:
            raise ValueError(f"the resolution factor is fixed at {SCALE} for this toolkit")


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


_DEFAULTS: dict[str, dict] = {
    "pansharpen": {
        "ms": None,
        "pan": None,
        "out": None,
        "ratio": 4,
        "kernel_size": 7,
        "epsilon": 1e-6,
        "clamp": True,
    },
    "tile": {
        "scenes": None,
        "out": None,
        "lr_tile": 32,
        "hr_tile": None,  # defaults to 4 x lr_tile
        "stride_fraction": 0.5,
        "split_ratio": 0.8,
        "kernel_size": 7,
        "epsilon": 1e-6,
        "seed": None,
        "threads": None,
    },
    "train": {
        "dataset": None,
        "arch": "srcnn",
        "out": None,
        "steps": 2000,
        "batch_size": 32,
        "learning_rate": 1e-4,
        "checkpoint_interval": 100,
        "seed": None,
    },
    "sr": {
        "model": None,
        "input": None,
        "out": None,
        "arch": None,
        "tile": 32,
        "overlap": 8,
    },
    "evaluate": {
        "reference": None,
        "candidate": [],
        "format": "table",
        "metrics": ",".join(METRIC_NAMES),
        "threads": None,
    },
    "synth": {
        "out": None,
        "scenes": 2,
        "lr_size": 64,
        "seed": None,
    },
    "gradcheck": {
        "arch": "all",
        "seed": None,
        "samples": 8,
        "step": 1e-5,
        "tolerance": 1e-4,
        "input_size": 8,
    },
}


def build_parser() -> _Parser:
    parser = _Parser(prog="pansr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file; flags override its values")
        return p

    p = add("pansharpen", "fuse a 4-band LR image with an HR pan band (SFIM)")
    p.add_argument("--ms", help="multispectral input raster")
    p.add_argument("--pan", help="panchromatic input raster")
    p.add_argument("--out", help="output raster path")
    p.add_argument("--ratio", type=int)
    p.add_argument("--kernel-size", type=int, dest="kernel_size")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--clamp", action=argparse.BooleanOptionalAction, default=None)

    p = add("tile", "build an LR/HR training tile dataset from a scene list")
    p.add_argument("--scenes", help="scene list JSON")
    p.add_argument("--out", help="dataset output directory")
    p.add_argument("--lr-tile", type=int, dest="lr_tile")
    p.add_argument("--hr-tile", type=int, dest="hr_tile")
    p.add_argument("--stride-fraction", type=float, dest="stride_fraction")
    p.add_argument("--split-ratio", type=float, dest="split_ratio")
    p.add_argument("--kernel-size", type=int, dest="kernel_size")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)

    p = add("train", "train a super-resolution network on a tile dataset")
    p.add_argument("--dataset", help="dataset directory (from `tile`)")
    p.add_argument("--arch", choices=ARCHITECTURES)
    p.add_argument("--out", help="checkpoint output path")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--checkpoint-interval", type=int, dest="checkpoint_interval")
    p.add_argument("--seed", type=int)

    p = add("sr", "super-resolve a 4-band image (original MS or pansharpened)")
    p.add_argument("--model", help="checkpoint path")
    p.add_argument("--input", help="4-band input raster")
    p.add_argument("--out", help="output raster path")
    p.add_argument("--arch", choices=ARCHITECTURES, help="cross-check against the checkpoint")
    p.add_argument("--tile", type=int, help="inference tile size in LR pixels")
    p.add_argument("--overlap", type=int, help="inference tile overlap in LR pixels")

    p = add("evaluate", "score candidate images against a reference")
    p.add_argument("--reference", help="reference raster")
    p.add_argument(
        "--candidate",
        action="append",
        metavar="NAME=PATH",
        help="candidate raster, repeatable",
    )
    p.add_argument("--format", choices=("table", "json", "csv"))
    p.add_argument("--metrics", help="comma-separated subset of psnr,ssim,fsim,issm")
    p.add_argument("--threads", type=int)

    p = add("synth", "generate synthetic (MS, pan) scenes plus a scene list")
    p.add_argument("--out", help="output directory")
    p.add_argument("--scenes", type=int, help="number of scenes")
    p.add_argument("--lr-size", type=int, dest="lr_size")
    p.add_argument("--seed", type=int)

    p = add("gradcheck", "finite-difference check of the network gradients")
    p.add_argument("--arch", choices=ARCHITECTURES + ("all",))
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="entries sampled per parameter tensor")
    p.add_argument("--step", type=float, help="finite-difference step")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--input-size", type=int, dest="input_size")

    return parser


def _merge(args: argparse.Namespace) -> dict:
    """Layer definitions: builtin defaults < config file < explicit flags."""
    defaults = _DEFAULTS[args.command]
    merged = dict(defaults)
    if getattr(args, "config", None):
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ValueError(f"config file not found: {cfg_path}")
        config = json.loads(cfg_path.read_text())
        if not isinstance(config, dict):
            raise ValueError("config file must hold a JSON object")
        for key, value in config.items():
            if key not in defaults:
                raise ValueError(f"unknown config key {key!r} for command {args.command!r}")
            merged[key] = value
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None and flag != []:
            merged[key] = flag
    return merged


def _require(merged: dict, *keys: str) -> None:
    missing = [k for k in keys if merged.get(k) in (None, "")]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")


def _echo(command: str, cfg: dict) -> None:
    print(f"[pansr {command}] config: {json.dumps(cfg, sort_keys=True, default=str)}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_pansharpen(m: dict) -> int:
    _require(m, "ms", "pan", "out")
    params = SfimParams(
        ratio=m["ratio"], kernel_size=m["kernel_size"], epsilon=m["epsilon"], clamp_output=m["clamp"]
    )
    cfg = PipelineConfig(
        command="pansharpen",
        paths={"ms": m["ms"], "pan": m["pan"], "out": m["out"]},
        sfim=params,
    )
    pansharpen_scene(cfg.paths["ms"], cfg.paths["pan"], cfg.paths["out"], params)
    print(m["out"])
    return 0


def _cmd_tile(m: dict) -> int:
    _require(m, "scenes", "out")
    seed = resolve_seed(m["seed"])
    lr_tile = m["lr_tile"]
    hr_tile = m["hr_tile"] if m["hr_tile"] is not None else lr_tile * SCALE
    spec = TileSpec(
        hr_tile=hr_tile,
        lr_tile=lr_tile,
        stride_fraction=m["stride_fraction"],
        split_ratio=m["split_ratio"],
        seed=seed,
    )
    sfim_params = SfimParams(kernel_size=m["kernel_size"], epsilon=m["epsilon"])
    cfg = PipelineConfig(
        command="tile",
        paths={"scenes": m["scenes"], "out": m["out"]},
        seed=seed,
        threads=m["threads"],
        tile=spec,
        sfim=sfim_params,
    )
    scenes = read_scene_list(cfg.paths["scenes"])
    manifest = build_dataset(scenes, spec, cfg.paths["out"], sfim_params, threads=cfg.threads)
    print(
        f"{manifest.total} tile pairs "
        f"({manifest.counts['train']} train / {manifest.counts['val']} val) -> {m['out']}"
    )
    return 0


def _cmd_train(m: dict) -> int:
    _require(m, "dataset", "out")
    seed = resolve_seed(m["seed"])
    tc = TrainConfig(
        learning_rate=m["learning_rate"],
        batch_size=m["batch_size"],
        max_steps=m["steps"],
        seed=seed,
        checkpoint_interval=m["checkpoint_interval"],
    )
    cfg = PipelineConfig(
        command="train",
        paths={"dataset": m["dataset"], "out": m["out"]},
        seed=seed,
        architecture=m["arch"],
        train=tc,
    )
    manifest = load_dataset(cfg.paths["dataset"])
    train_pairs = list(iter_pairs(manifest, "train"))
    val_pairs = list(iter_pairs(manifest, "val"))
    if not train_pairs:
        raise ValueError("dataset has no training tiles")

    spec = build_architecture(cfg.architecture)
    dtype = np.dtype(tc.dtype)
    tx = prepare_inputs(np.stack([p.lr for p in train_pairs]), spec.input_convention, spec.scale, dtype)
    ty = prepare_targets(np.stack([p.hr for p in train_pairs]), dtype)
    vx = vy = None
    if val_pairs:
        vx = prepare_inputs(np.stack([p.lr for p in val_pairs]), spec.input_convention, spec.scale, dtype)
        vy = prepare_targets(np.stack([p.hr for p in val_pairs]), dtype)

    net = Network(spec, dtype=dtype)
    net.initialize(seed)
    history = train(
        net,
        tx,
        ty,
        tc,
        vx,
        vy,
        checkpoint_path=cfg.paths["out"],
        log=lambda rec: print(f"  {json.dumps(rec)}", file=sys.stderr),
    )
    save_checkpoint(net, cfg.paths["out"], history=history)
    last = history[-1]
    summary = f"trained {cfg.architecture} for {last['step']} steps; train_mse={last['train_mse']:.3e}"
    if "val_mse" in last:
        summary += f" val_mse={last['val_mse']:.3e}"
    print(summary)
    print(m["out"])
    return 0


def _cmd_sr(m: dict) -> int:
    _require(m, "model", "input", "out")
    net, header = load_checkpoint(m["model"])
    if m["arch"] is not None and m["arch"] != header["architecture"]:
        raise ValueError(
            f"checkpoint holds architecture {header['architecture']!r}, not {m['arch']!r}"
        )
    cfg = PipelineConfig(
        command="sr",
        paths={"model": m["model"], "input": m["input"], "out": m["out"]},
        architecture=header["architecture"],
        extra={"tile": m["tile"], "overlap": m["overlap"]},
    )
    img = read_raster(cfg.paths["input"])
    out = super_resolve(net, img, tile=m["tile"], overlap=m["overlap"])
    write_raster(out, cfg.paths["out"])
    print(m["out"])
    return 0


def _cmd_evaluate(m: dict) -> int:
    _require(m, "reference")
    metric_list = tuple(s.strip() for s in m["metrics"].split(",") if s.strip())
    pairs = []
    for spec in m["candidate"] or []:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise ValueError(f"candidate must look like NAME=PATH, got {spec!r}")
        pairs.append((name, path))
    cfg = PipelineConfig(
        command="evaluate",
        paths={"reference": m["reference"], **{n: p for n, p in pairs}},
        threads=m["threads"],
        extra={"format": m["format"], "metrics": metric_list},
    )
    reference = read_raster(cfg.paths["reference"])
    candidates = {name: read_raster(path) for name, path in pairs}
    report = evaluate(
        reference,
        candidates,
        metrics=metric_list,
        ssim_params=cfg.ssim_params,
        fsim_params=cfg.fsim_params,
        issm_params=cfg.issm_params,
        threads=cfg.threads,
    )
    print(report.render(m["format"]))
    return 0


def _cmd_synth(m: dict) -> int:
    _require(m, "out")
    seed = resolve_seed(m["seed"])
    cfg = PipelineConfig(
        command="synth",
        paths={"out": m["out"]},
        seed=seed,
        extra={"scenes": m["scenes"], "lr_size": m["lr_size"]},
    )
    path = write_synth_scenes(cfg.paths["out"], seed, m["scenes"], m["lr_size"])
    print(path)
    return 0


def _cmd_gradcheck(m: dict) -> int:
    seed = resolve_seed(m["seed"])
    names = ARCHITECTURES if m["arch"] == "all" else (m["arch"],)
    all_passed = True
    for name in names:
        report = grad_check(
            name,
            seed=seed,
            samples_per_tensor=m["samples"],
            step=m["step"],
            input_size=m["input_size"],
            tolerance=m["tolerance"],
        )
        status = "PASS" if report["passed"] else "FAIL"
        print(f"{name}: max_rel_err={report['max_rel_err']:.3e} ({status})")
        for t in report["tensors"]:
            print(
                f"  layer {t['layer']:3d} {t['kind']:<16} {t['name']:<6} "
                f"checked {t['checked']}/{t['size']}  max_rel_err={t['max_rel_err']:.3e}"
            )
        print(f"  input{'':<21} max_rel_err={report['input_max_rel_err']:.3e}")
        all_passed &= report["passed"]
    return 0 if all_passed else 1


_COMMANDS = {
    "pansharpen": _cmd_pansharpen,
    "tile": _cmd_tile,
    "train": _cmd_train,
    "sr": _cmd_sr,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
    "gradcheck": _cmd_gradcheck,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        merged = _merge(args)
        _echo(args.command, merged)
        return _COMMANDS[args.command](merged)
    except ValueError as exc:
        print(f"pansr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # I/O failures, divergence, internal errors
        print(f"pansr {args.command}: runtime failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
