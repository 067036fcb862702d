"""Training-pair generation: tiling with overlap augmentation, the 80/20
split, manifest persistence, and synthetic desk-scale scenes."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .pansharp import SfimParams, sfim
from .raster import RasterImage, read_raster, upsample_bicubic, write_raster
from .util import parallel_map

SCALE = 4  # HR/LR resolution ratio, fixed for this toolkit


@dataclass(frozen=True)
class TileSpec:
    """Tile geometry, overlap stride and split parameters."""

    hr_tile: int = 128
    lr_tile: int = 32
    stride_fraction: float = 0.5
    split_ratio: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.hr_tile != self.lr_tile * SCALE:
            raise ValueError(
                f"hr_tile must be {SCALE} x lr_tile, got {self.hr_tile}/{self.lr_tile}"
            )
        if not 0 < self.stride_fraction <= 1:
            raise ValueError(f"stride_fraction must be in (0, 1], got {self.stride_fraction}")
        if not 0 < self.split_ratio < 1:
            raise ValueError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if (self.lr_tile * self.stride_fraction) % 1:
            raise ValueError(
                f"stride {self.lr_tile} x {self.stride_fraction} is not a whole pixel count"
            )

    @property
    def lr_stride(self) -> int:
        return int(self.lr_tile * self.stride_fraction)

    @property
    def hr_stride(self) -> int:
        return self.lr_stride * SCALE


@dataclass
class TilePair:
    """Aligned LR/HR patch pair; the HR patch covers exactly the LR footprint."""

    scene_id: str
    grid_x: int
    grid_y: int
    lr: np.ndarray  # (4, lr_tile, lr_tile)
    hr: np.ndarray  # (4, hr_tile, hr_tile)
    split: str = "train"


def tile_starts(size: int, tile: int, stride: int) -> list[int]:
    """Start offsets at multiples of ``stride``; partial far-border tiles drop."""
    if size < tile:
        return []
    return list(range(0, size - tile + 1, stride))


def tile_count(size: int, tile: int, stride: int) -> int:
    if size < tile:
        return 0
    return (size - tile) // stride + 1


def tile_scene(lr_img: RasterImage, hr_img: RasterImage, spec: TileSpec) -> list[TilePair]:
    """Cut aligned LR/HR tile grids; LR and HR share grid indices."""
    if hr_img.height != lr_img.height * SCALE or hr_img.width != lr_img.width * SCALE:
        raise ValueError(
            f"HR dimensions {hr_img.width}x{hr_img.height} are not "
            f"{SCALE} x LR {lr_img.width}x{lr_img.height}"
        )
    if lr_img.height < spec.lr_tile or lr_img.width < spec.lr_tile:
        raise ValueError(
            f"image {lr_img.width}x{lr_img.height} smaller than one {spec.lr_tile}px tile"
        )
    lt, ls = spec.lr_tile, spec.lr_stride
    ht, hs = spec.hr_tile, spec.hr_stride
    pairs = []
    for gy, y in enumerate(tile_starts(lr_img.height, lt, ls)):
        for gx, x in enumerate(tile_starts(lr_img.width, lt, ls)):
            pairs.append(
                TilePair(
                    scene_id="",
                    grid_x=gx,
                    grid_y=gy,
                    lr=lr_img.data[:, y : y + lt, x : x + lt].copy(),
                    hr=hr_img.data[:, gy * hs : gy * hs + ht, gx * hs : gx * hs + ht].copy(),
                )
            )
    return pairs


def split_dataset(pairs: Sequence[TilePair], spec: TileSpec) -> tuple[list[TilePair], list[TilePair]]:
    """Deterministic seeded shuffle; first ceil(ratio * N) go to train.

    Tags each pair in place and returns (train, val) in original order.
    """
    if not pairs:
        raise ValueError("cannot split an empty pair list")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(len(pairs))
    n_train = math.ceil(spec.split_ratio * len(pairs))
    train_idx = set(perm[:n_train].tolist())
    for i, pair in enumerate(pairs):
        pair.split = "train" if i in train_idx else "val"
    return [p for p in pairs if p.split == "train"], [p for p in pairs if p.split == "val"]


# ---------------------------------------------------------------------------
# Scene lists and manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scene:
    """One input scene: LR multispectral plus either HR pan or a ready HR image."""

    scene_id: str
    ms_path: str
    pan_path: str | None = None
    hr_path: str | None = None


@dataclass(frozen=True)
class TileRecord:
    scene_id: str
    grid_x: int
    grid_y: int
    split: str
    lr_path: str
    hr_path: str


@dataclass
class DatasetManifest:
    root: Path
    tile_spec: TileSpec
    seed: int
    counts: dict[str, int]
    records: list[TileRecord] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.records)


def read_scene_list(path) -> list[Scene]:
    """Scene list JSON: [{"scene_id", "ms", "pan" and/or "hr"}, ...]."""
    entries = json.loads(Path(path).read_text())
    scenes = []
    base = Path(path).parent
    for e in entries:
        def _abs(p):
            return str(base / p) if p and not Path(p).is_absolute() else p
        scenes.append(
            Scene(e["scene_id"], _abs(e["ms"]), _abs(e.get("pan")), _abs(e.get("hr")))
        )
    return scenes


def build_dataset(
    scenes: Sequence[Scene],
    spec: TileSpec,
    out_dir,
    sfim_params: SfimParams = SfimParams(),
    threads: int | None = 1,
) -> DatasetManifest:
    """Pansharpen where needed, tile every scene, split, persist tiles.

    Tiles go to ``out_dir/tiles`` as individual rasters; records to
    ``tiles.jsonl`` (one per line) and the header to ``dataset.json``.
    """
    if not scenes:
        raise ValueError("empty scene list")
    out_dir = Path(out_dir)
    (out_dir / "tiles").mkdir(parents=True, exist_ok=True)

    def _scene_pairs(scene: Scene) -> list[TilePair]:
        ms = read_raster(scene.ms_path)
        if scene.hr_path:
            hr = read_raster(scene.hr_path)
        elif scene.pan_path:
            hr = sfim(ms, read_raster(scene.pan_path), sfim_params)
        else:
            raise ValueError(f"scene {scene.scene_id}: needs pan_path or hr_path")
        pairs = tile_scene(ms, hr, spec)
        for p in pairs:
            p.scene_id = scene.scene_id
        return pairs

    pairs: list[TilePair] = []
    for scene_pairs in parallel_map(_scene_pairs, scenes, threads):
        pairs.extend(scene_pairs)
    split_dataset(pairs, spec)

    records = []
    roles = ("R", "G", "B", "NIR")
    for p in pairs:
        stem = f"{p.scene_id}_{p.grid_y:03d}_{p.grid_x:03d}"
        lr_rel, hr_rel = f"tiles/{stem}_lr.tif", f"tiles/{stem}_hr.tif"
        write_raster(RasterImage(p.lr, roles), out_dir / lr_rel)
        write_raster(RasterImage(p.hr, roles), out_dir / hr_rel)
        records.append(TileRecord(p.scene_id, p.grid_x, p.grid_y, p.split, lr_rel, hr_rel))

    counts = {
        "train": sum(r.split == "train" for r in records),
        "val": sum(r.split == "val" for r in records),
    }
    manifest = DatasetManifest(out_dir, spec, spec.seed, counts, records)
    with open(out_dir / "tiles.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")
    header = {
        "tile_spec": asdict(spec),
        "seed": spec.seed,
        "counts": counts,
        "total": len(records),
    }
    (out_dir / "dataset.json").write_text(json.dumps(header, indent=2) + "\n")
    return manifest


def load_dataset(path) -> DatasetManifest:
    """Load a manifest; every referenced tile file must exist."""
    root = Path(path)
    if root.is_file():
        root = root.parent
    header = json.loads((root / "dataset.json").read_text())
    records = []
    with open(root / "tiles.jsonl") as fh:
        for line in fh:
            records.append(TileRecord(**json.loads(line)))
    for r in records:
        for rel in (r.lr_path, r.hr_path):
            if not (root / rel).exists():
                raise ValueError(f"manifest references missing tile file {rel}")
    counts = header["counts"]
    if counts["train"] + counts["val"] != len(records):
        raise ValueError("manifest counts disagree with record total")
    spec = TileSpec(**header["tile_spec"])
    return DatasetManifest(root, spec, header["seed"], counts, records)


def iter_pairs(manifest: DatasetManifest, split: str | None = None) -> Iterator[TilePair]:
    """Stream pairs from disk in manifest order."""
    for r in manifest.records:
        if split is not None and r.split != split:
            continue
        lr = read_raster(manifest.root / r.lr_path)
        hr = read_raster(manifest.root / r.hr_path)
        yield TilePair(r.scene_id, r.grid_x, r.grid_y, lr.data, hr.data, r.split)


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------


def _value_noise(rng: np.random.Generator, size: int, cell: int) -> np.ndarray:
    """Seeded lattice noise bicubically interpolated to ``size``."""
    lattice = rng.uniform(-1.0, 1.0, size=(size // cell, size // cell))
    return upsample_bicubic(lattice, cell)


def synth_scene(seed: int, lr_size: int = 64) -> tuple[RasterImage, RasterImage]:
    """Procedural (MS @ LR, pan @ HR) pair standing in for real imagery.

    Bands are correlated sums of oriented sinusoids plus seeded value
    noise; the pan band is a weighted mean of the clean band textures at
    the full 4x resolution.  Deterministic per seed.
    """
    if lr_size < 32:
        raise ValueError(f"lr_size must be >= 32, got {lr_size}")
    rng = np.random.default_rng(seed)
    hr = lr_size * SCALE
    yy, xx = np.meshgrid(np.arange(hr) / hr, np.arange(hr) / hr, indexing="ij")

    n_waves = 12
    thetas = rng.uniform(0.0, np.pi, n_waves)
    freqs = rng.uniform(3.0, hr / 6.0, n_waves)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    base_w = rng.uniform(0.5, 1.0, n_waves)
    band_w = base_w[None, :] * rng.uniform(0.6, 1.4, size=(4, n_waves))

    waves = np.stack(
        [
            np.sin(2.0 * np.pi * f * (np.cos(t) * xx + np.sin(t) * yy) + ph)
            for t, f, ph in zip(thetas, freqs, phases)
        ]
    )
    clean = np.tensordot(band_w, waves, axes=(1, 0))  # (4, hr, hr)
    noise = np.stack([_value_noise(rng, hr, 8) for _ in range(4)])
    bands = clean + 0.35 * noise

    pan_weights = np.array([0.25, 0.30, 0.25, 0.20])
    pan = np.tensordot(pan_weights, clean, axes=(0, 0))

    # one affine map into a sub-range of the 12-bit domain, shared by all
    # planes so pan keeps its weighted-mean relationship to the bands
    lo, hi = bands.min(), bands.max()
    def _rescale(a):
        return 150.0 + (a - lo) * (3950.0 - 150.0) / (hi - lo)
    bands = np.clip(_rescale(bands), 0.0, 4095.0)
    pan = np.clip(_rescale(pan), 0.0, 4095.0)

    ms_lr = bands.reshape(4, lr_size, SCALE, lr_size, SCALE).mean(axis=(2, 4))
    ms = RasterImage(np.rint(ms_lr), ("R", "G", "B", "NIR"), pixel_size=2.0)
    pan_img = RasterImage(np.rint(pan)[None], ("PAN",), pixel_size=0.5)
    return ms, pan_img


def write_synth_scenes(out_dir, seed: int, count: int, lr_size: int = 64) -> Path:
    """Generate scenes, write rasters and a scene-list JSON; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        ms, pan = synth_scene(seed + i, lr_size)
        sid = f"synth{i:03d}"
        write_raster(ms, out_dir / f"{sid}_ms.tif")
        write_raster(pan, out_dir / f"{sid}_pan.tif")
        entries.append({"scene_id": sid, "ms": f"{sid}_ms.tif", "pan": f"{sid}_pan.tif"})
    path = out_dir / "scenes.json"
    path.write_text(json.dumps(entries, indent=2) + "\n")
    return path
