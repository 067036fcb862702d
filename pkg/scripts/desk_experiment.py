#!/usr/bin/env python3
"""Desk-scale end-to-end experiment on synthetic scenes.

Synthesizes a seeded corpus, fuses and tiles it into LR/HR training
pairs, trains one or more super-resolution architectures from scratch,
then super-resolves a held-out scene and scores every method against
that scene's fused reference.  The final table mirrors the usual
methods-by-metrics comparison layout (bicubic baseline in the first
column) at a size that finishes on a laptop CPU.

Typical run (a few minutes):

    python3 scripts/desk_experiment.py --out runs/desk --archs srcnn

Training every architecture is supported (--archs all) but the deep
models are slow on CPU; drop --steps accordingly.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from pansr.dataset import (
    TileSpec,
    build_dataset,
    iter_pairs,
    read_scene_list,
    synth_scene,
    write_synth_scenes,
)
from pansr.metrics import evaluate
from pansr.nn.checkpoint import save_checkpoint
from pansr.nn.infer import super_resolve
from pansr.nn.network import ARCHITECTURES, Network, build_architecture
from pansr.nn.train import TrainConfig, prepare_inputs, prepare_targets, train
from pansr.pansharp import SfimParams, sfim
from pansr.raster import SAMPLE_MAX, RasterImage, upsample_bicubic, write_raster


def parse_args(argv: list[str]) -> argparse.Namespace:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="output directory for all artifacts")
    ap.add_argument("--archs", default="srcnn", help="comma-separated architectures, or 'all'")
    ap.add_argument("--scenes", type=int, default=8, help="training scenes (one more is held out)")
    ap.add_argument("--lr-size", type=int, default=64, dest="lr_size")
    ap.add_argument("--lr-tile", type=int, default=16, dest="lr_tile")
    ap.add_argument("--steps", type=int, default=1200)
    ap.add_argument("--batch-size", type=int, default=8, dest="batch_size")
    ap.add_argument("--learning-rate", type=float, default=1e-3, dest="learning_rate")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--format", choices=("table", "json", "csv"), default="table")
    args = ap.parse_args(argv)
    names = ARCHITECTURES if args.archs == "all" else tuple(s.strip() for s in args.archs.split(","))
    for name in names:
        if name not in ARCHITECTURES:
            ap.error(f"unknown architecture {name!r}; choose from {ARCHITECTURES}")
    args.arch_names = names
    return args


def train_one(name: str, manifest, args) -> tuple[Network, dict]:
    spec = build_architecture(name)
    dt = np.dtype("float32")
    tr = list(iter_pairs(manifest, "train"))
    va = list(iter_pairs(manifest, "val"))
    tx = prepare_inputs(np.stack([p.lr for p in tr]), spec.input_convention, spec.scale, dt)
    ty = prepare_targets(np.stack([p.hr for p in tr]), dt)
    vx = prepare_inputs(np.stack([p.lr for p in va]), spec.input_convention, spec.scale, dt)
    vy = prepare_targets(np.stack([p.hr for p in va]), dt)

    net = Network(spec, dtype=dt)
    net.initialize(args.seed)
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_steps=args.steps,
        seed=args.seed,
        checkpoint_interval=max(1, args.steps // 4),
    )
    t0 = time.perf_counter()
    history = train(net, tx, ty, cfg, vx, vy)
    stats = {
        "architecture": name,
        "params": net.num_params(),
        "steps": history[-1]["step"],
        "val_mse_start": history[0]["val_mse"],
        "val_mse_end": [r for r in history if "val_mse" in r][-1]["val_mse"],
        "train_s": round(time.perf_counter() - t0, 1),
    }
    return net, stats


def main(argv: list[str] | None = None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # corpus: args.scenes for training, one extra scene held out entirely
    scene_list = write_synth_scenes(out / "scenes", args.seed, args.scenes, args.lr_size)
    manifest = build_dataset(
        read_scene_list(scene_list),
        TileSpec(hr_tile=args.lr_tile * 4, lr_tile=args.lr_tile, seed=args.seed),
        out / "dataset",
    )
    print(
        f"dataset: {manifest.total} tile pairs "
        f"({manifest.counts['train']} train / {manifest.counts['val']} val)"
    )

    held_ms, held_pan = synth_scene(args.seed + args.scenes, args.lr_size)
    reference = sfim(held_ms, held_pan, SfimParams())
    write_raster(reference, out / "heldout_reference.tif")

    bicubic = RasterImage(
        np.clip(upsample_bicubic(held_ms.data, 4), 0.0, SAMPLE_MAX),
        held_ms.band_roles,
        pixel_size=None if held_ms.pixel_size is None else held_ms.pixel_size / 4.0,
    )
    write_raster(bicubic, out / "heldout_bicubic.tif")
    candidates = {"bicubic": bicubic}

    all_stats = []
    for name in args.arch_names:
        net, stats = train_one(name, manifest, args)
        all_stats.append(stats)
        save_checkpoint(net, out / f"{name}.ck")
        sr = super_resolve(net, held_ms)
        write_raster(sr, out / f"heldout_{name}.tif")
        candidates[name] = sr
        drop = 1.0 - stats["val_mse_end"] / stats["val_mse_start"]
        print(
            f"{name}: {stats['params']} params, {stats['steps']} steps, "
            f"val mse {stats['val_mse_start']:.3e} -> {stats['val_mse_end']:.3e} "
            f"(-{drop * 100:.1f}%), {stats['train_s']}s"
        )

    report = evaluate(reference, candidates)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "training.json").write_text(json.dumps(all_stats, indent=1) + "\n")
    print()
    print(report.render(args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
