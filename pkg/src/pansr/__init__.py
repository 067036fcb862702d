"""Super-resolution toolkit for 4-band 12-bit satellite imagery.

Pipeline: SFIM pansharpening builds high-resolution training targets from
(multispectral, panchromatic) scene pairs; aligned LR/HR tile datasets feed
four small convolutional super-resolution networks trained with a compact
numpy autodiff engine; results are scored with a 12-bit-aware metric suite
(PSNR, SSIM, FSIM, ISSM).  Everything is seeded and bit-reproducible.
"""

from .raster import (
    RasterImage,
    ResampleSpec,
    SAMPLE_MAX,
    box_filter,
    denormalize,
    normalize,
    quantize,
    read_raster,
    resample,
    upsample_bicubic,
    write_raster,
)
from .pansharp import SfimParams, pansharpen_scene, sfim
from .dataset import (
    DatasetManifest,
    Scene,
    TilePair,
    TileSpec,
    build_dataset,
    load_dataset,
    read_scene_list,
    split_dataset,
    synth_scene,
    tile_count,
    tile_scene,
    tile_starts,
    write_synth_scenes,
)
from .edges import CannyParams, canny_edges, gaussian_smooth, scharr_gradients, scharr_magnitude, shannon_entropy
from .phasecong import PhaseCongruencyParams, log_gabor_bank, phase_congruency
from .metrics import (
    FsimParams,
    IssmParams,
    MetricReport,
    SsimParams,
    evaluate,
    fsim,
    issm,
    issm_identity_value,
    mse,
    psnr,
    ssim,
)
from .nn import (
    ArchitectureSpec,
    LayerSpec,
    Network,
    TrainConfig,
    TrainingDiverged,
    build_architecture,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    super_resolve,
    train,
)
from .util import parallel_map, resolve_seed

__version__ = "0.1.0"

__all__ = [
    "RasterImage",
    "ResampleSpec",
    "SAMPLE_MAX",
    "box_filter",
    "denormalize",
    "normalize",
    "quantize",
    "read_raster",
    "resample",
    "upsample_bicubic",
    "write_raster",
    "SfimParams",
    "pansharpen_scene",
    "sfim",
    "DatasetManifest",
    "Scene",
    "TilePair",
    "TileSpec",
    "build_dataset",
    "load_dataset",
    "read_scene_list",
    "split_dataset",
    "synth_scene",
    "tile_count",
    "tile_scene",
    "tile_starts",
    "write_synth_scenes",
    "CannyParams",
    "canny_edges",
    "gaussian_smooth",
    "scharr_gradients",
    "scharr_magnitude",
    "shannon_entropy",
    "PhaseCongruencyParams",
    "log_gabor_bank",
    "phase_congruency",
    "FsimParams",
    "IssmParams",
    "MetricReport",
    "SsimParams",
    "evaluate",
    "fsim",
    "issm",
    "issm_identity_value",
    "mse",
    "psnr",
    "ssim",
    "ArchitectureSpec",
    "LayerSpec",
    "Network",
    "TrainConfig",
    "TrainingDiverged",
    "build_architecture",
    "grad_check",
    "load_checkpoint",
    "save_checkpoint",
    "super_resolve",
    "train",
    "parallel_map",
    "resolve_seed",
    "__version__",
]
