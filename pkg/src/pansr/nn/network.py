"""Network assembly: layer specs, the four architectures, forward/backward.

Architectures are flat layer lists; skip connections reference earlier layers
by index (-1 is the network input), so the whole graph serialises as a table.
Two input conventions exist:

* ``pre_upsampled``: the network maps a bicubically upsampled image to the
  refined image at the same size (srcnn, aesr, rednet30).
* ``native_lr``: the network consumes the low-resolution image directly and
  upscales internally by the architecture's ``scale`` (srresnet).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    AddSkip,
    Conv2d,
    Layer,
    MaxPool2x2,
    PixelShuffle,
    PReLU,
    ReLU,
    TransposedConv2d,
    UpsampleNearest2x,
)

ARCHITECTURES = ("srcnn", "aesr", "rednet30", "srresnet")


class NonFiniteActivation(FloatingPointError):
    """An activation came out NaN/inf; carries the offending layer index."""

    def __init__(self, layer_index: int, kind: str) -> None:
        super().__init__(f"non-finite activation after layer {layer_index} ({kind})")
        self.layer_index = layer_index
        self.kind = kind


@dataclass(frozen=True)
class LayerSpec:
    """One row of an architecture table.

    kind      one of conv, transposed_conv, relu, prelu, maxpool,
              upsample_nearest, pixel_shuffle, add_skip
    channels  output channels (conv and transposed_conv only)
    kernel    kernel size (conv and transposed_conv only)
    stride    convolution stride
    factor    upscaling factor (upsample_nearest, pixel_shuffle)
    source    layer index whose output is added (add_skip); -1 = network input
    """

    kind: str
    channels: int | None = None
    kernel: int | None = None
    stride: int = 1
    factor: int = 2
    source: int | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "channels": self.channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "factor": self.factor,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(
            kind=d["kind"],
            channels=d.get("channels"),
            kernel=d.get("kernel"),
            stride=d.get("stride", 1),
            factor=d.get("factor", 2),
            source=d.get("source"),
        )


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_convention: str  # "pre_upsampled" or "native_lr"
    layers: tuple[LayerSpec, ...]
    scale: int = 4

    def __post_init__(self) -> None:
        if self.input_convention not in ("pre_upsampled", "native_lr"):
            raise ValueError(f"unknown input convention {self.input_convention!r}")


def _srcnn() -> tuple[LayerSpec, ...]:
    return (
        LayerSpec("conv", channels=64, kernel=9),
        LayerSpec("relu"),
        LayerSpec("conv", channels=32, kernel=1),
        LayerSpec("relu"),
        LayerSpec("conv", channels=4, kernel=5),
    )


def _aesr() -> tuple[LayerSpec, ...]:
    # Two-level convolutional autoencoder.  Encoder activations feed the
    # mirrored decoder stages additively and the input is added to the final
    # conv output, so the network learns a residual correction.
    return (
        LayerSpec("conv", channels=64, kernel=3),  # 0
        LayerSpec("relu"),  # 1: first encoder feature, reused at 14
        LayerSpec("maxpool"),  # 2
        LayerSpec("conv", channels=128, kernel=3),  # 3
        LayerSpec("relu"),  # 4: second encoder feature, reused at 10
        LayerSpec("maxpool"),  # 5
        LayerSpec("conv", channels=256, kernel=3),  # 6
        LayerSpec("relu"),  # 7
        LayerSpec("upsample_nearest", factor=2),  # 8
        LayerSpec("conv", channels=128, kernel=3),  # 9
        LayerSpec("add_skip", source=4),  # 10
        LayerSpec("relu"),  # 11
        LayerSpec("upsample_nearest", factor=2),  # 12
        LayerSpec("conv", channels=64, kernel=3),  # 13
        LayerSpec("add_skip", source=1),  # 14
        LayerSpec("relu"),  # 15
        LayerSpec("conv", channels=4, kernel=3),  # 16
        LayerSpec("add_skip", source=-1),  # 17
    )


def _rednet30() -> tuple[LayerSpec, ...]:
    # 15 convolutions + 15 transposed convolutions.  The activation of every
    # second encoder stage is added to the mirrored decoder output before its
    # ReLU (encoder stage j pairs with decoder stage 14 - j).  The final
    # decoder layer projects back to 4 bands with no activation.
    specs: list[LayerSpec] = []
    post_relu: dict[int, int] = {}
    for j in range(15):
        specs.append(LayerSpec("conv", channels=64, kernel=3))
        specs.append(LayerSpec("relu"))
        post_relu[j] = len(specs) - 1
    for d in range(15):
        last = d == 14
        specs.append(LayerSpec("transposed_conv", channels=4 if last else 64, kernel=3))
        if not last:
            if d % 2 == 1:
                specs.append(LayerSpec("add_skip", source=post_relu[14 - d]))
            specs.append(LayerSpec("relu"))
    return tuple(specs)


def _srresnet() -> tuple[LayerSpec, ...]:
    # Residual network operating at low resolution: 16 two-conv residual
    # blocks between a long skip, then two pixel-shuffle stages for the 4x
    # upscale.  Batch normalisation is omitted; at the small batch sizes used
    # here its statistics are too noisy to help and the blocks train fine
    # without it.
    specs: list[LayerSpec] = [
        LayerSpec("conv", channels=64, kernel=9),
        LayerSpec("prelu"),
    ]
    head = len(specs) - 1
    for _ in range(16):
        entry = len(specs) - 1
        specs.append(LayerSpec("conv", channels=64, kernel=3))
        specs.append(LayerSpec("prelu"))
        specs.append(LayerSpec("conv", channels=64, kernel=3))
        specs.append(LayerSpec("add_skip", source=entry))
    specs.append(LayerSpec("conv", channels=64, kernel=3))
    specs.append(LayerSpec("add_skip", source=head))
    for _ in range(2):
        specs.append(LayerSpec("conv", channels=256, kernel=3))
        specs.append(LayerSpec("pixel_shuffle", factor=2))
        specs.append(LayerSpec("prelu"))
    specs.append(LayerSpec("conv", channels=4, kernel=9))
    return tuple(specs)


def build_architecture(name: str, scale: int = 4) -> ArchitectureSpec:
    """Return the layer table for one of the four built-in architectures."""
    builders = {
        "srcnn": ("pre_upsampled", _srcnn),
        "aesr": ("pre_upsampled", _aesr),
        "rednet30": ("pre_upsampled", _rednet30),
        "srresnet": ("native_lr", _srresnet),
    }
    if name not in builders:
        raise ValueError(f"unknown architecture {name!r}; choose from {ARCHITECTURES}")
    convention, fn = builders[name]
    return ArchitectureSpec(name=name, input_convention=convention, layers=fn(), scale=scale)


class Network:
    """Executable network built from an ArchitectureSpec.

    Activations are cached on forward so backward can route skip gradients;
    parameter gradients accumulate on the layers until `zero_grads`.
    """

    def __init__(self, spec: ArchitectureSpec, in_channels: int = 4, dtype=np.float32) -> None:
        self.spec = spec
        self.in_channels = in_channels
        self.dtype = np.dtype(dtype)
        self.seed: int | None = None
        self.layers: list[Layer] = []
        self._acts: list[np.ndarray] | None = None

        channels = [in_channels]  # channels[i + 1] = output channels of layer i
        cur = in_channels
        for idx, ls in enumerate(spec.layers):
            if ls.kind == "conv":
                layer: Layer = Conv2d(cur, ls.channels, ls.kernel, ls.stride, dtype=self.dtype)
                cur = ls.channels
            elif ls.kind == "transposed_conv":
                layer = TransposedConv2d(cur, ls.channels, ls.kernel, dtype=self.dtype)
                cur = ls.channels
            elif ls.kind == "relu":
                layer = ReLU()
            elif ls.kind == "prelu":
                layer = PReLU(cur, dtype=self.dtype)
            elif ls.kind == "maxpool":
                layer = MaxPool2x2()
            elif ls.kind == "upsample_nearest":
                if ls.factor != 2:
                    raise ValueError("upsample_nearest supports factor 2 only")
                layer = UpsampleNearest2x()
            elif ls.kind == "pixel_shuffle":
                if cur % (ls.factor**2):
                    raise ValueError(
                        f"layer {idx}: pixel_shuffle needs channels divisible by "
                        f"{ls.factor**2}, got {cur}"
                    )
                layer = PixelShuffle(ls.factor)
                cur //= ls.factor**2
            elif ls.kind == "add_skip":
                src = ls.source
                if src is None or src < -1 or src >= idx:
                    raise ValueError(f"layer {idx}: bad skip source {src}")
                if channels[src + 1] != cur:
                    raise ValueError(
                        f"layer {idx}: skip source {src} has {channels[src + 1]} "
                        f"channels, expected {cur}"
                    )
                layer = AddSkip(src)
            else:
                raise ValueError(f"unknown layer kind {ls.kind!r}")
            self.layers.append(layer)
            channels.append(cur)
        self.out_channels = cur

    def initialize(self, seed: int) -> None:
        """Draw all parameters from one seeded generator in layer order."""
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            layer.init_params(rng)
        self.seed = seed

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"expected (batch, {self.in_channels}, h, w) input, got {x.shape}")
        x = np.ascontiguousarray(x, dtype=self.dtype)
        acts = [x]
        for i, layer in enumerate(self.layers):
            if isinstance(layer, AddSkip):
                out = layer.forward(acts[-1], acts[layer.source + 1])
            else:
                out = layer.forward(acts[-1])
            if not np.isfinite(out).all():
                raise NonFiniteActivation(i, layer.kind)
            acts.append(out)
        self._acts = acts
        return acts[-1]

    def backward(self, g_out: np.ndarray, need_input_grad: bool = False) -> np.ndarray | None:
        """Backpropagate; returns the input gradient when requested.

        Accumulator slots are never updated in place, so one gradient array may
        be deposited into several slots (skip fan-out) without aliasing bugs.
        """
        if self._acts is None:
            raise RuntimeError("backward called before forward")
        n = len(self.layers)
        acc: dict[int, np.ndarray] = {n - 1: np.ascontiguousarray(g_out, dtype=self.dtype)}

        def deposit(slot: int, g: np.ndarray) -> None:
            acc[slot] = acc[slot] + g if slot in acc else g

        for i in range(n - 1, -1, -1):
            g = acc.pop(i)
            layer = self.layers[i]
            if isinstance(layer, AddSkip):
                if i > 0:
                    deposit(i - 1, g)
                elif need_input_grad:
                    deposit(-1, g)
                if layer.source >= 0:
                    deposit(layer.source, g)
                elif need_input_grad:
                    deposit(-1, g)
                continue
            want = i > 0 or need_input_grad
            gi = layer.backward(g, need_input_grad=want)
            if want and gi is not None:
                deposit(i - 1, gi)
        return acc.get(-1) if need_input_grad else None

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def param_tensors(self):
        """Yield (layer_index, name, param, grad) in a fixed order."""
        for idx, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield idx, name, layer.params[name], layer.grads[name]

    def num_params(self) -> int:
        return sum(p.size for _, _, p, _ in self.param_tensors())
