"""Tensor layers with exact analytic gradients.

Every layer operates on (batch, channels, height, width) arrays in a caller
chosen float dtype.  Forward passes cache whatever the backward pass needs;
backward passes return the gradient with respect to the layer input and store
parameter gradients on the layer.  All spatial layers use edge replication at
the borders, which keeps feature maps the same size as their inputs and avoids
the dark frame that zero padding produces on imagery.

The convolutions are expressed as a single matrix product per call (patch
matrix times flattened kernels) so the heavy lifting runs inside BLAS.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def pad_replicate(x: np.ndarray, pad: int) -> np.ndarray:
    """Replicate-pad the two trailing spatial axes by `pad` pixels."""
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="edge")


def pad_replicate_adjoint(g: np.ndarray, pad: int) -> np.ndarray:
    """Exact adjoint of `pad_replicate`: fold border gradients onto the edge.

    Replication copies edge pixels outward, so the adjoint sums every padded
    row/column back into the edge row/column it was copied from.  Rows are
    folded before columns; corner cells pass through both folds, matching the
    corner replication of the forward pad.
    """
    if pad == 0:
        return g
    rows = g[:, :, pad:-pad, :].copy()
    rows[:, :, 0, :] += g[:, :, :pad, :].sum(axis=2)
    rows[:, :, -1, :] += g[:, :, -pad:, :].sum(axis=2)
    out = rows[:, :, :, pad:-pad].copy()
    out[:, :, :, 0] += rows[:, :, :, :pad].sum(axis=3)
    out[:, :, :, -1] += rows[:, :, :, -pad:].sum(axis=3)
    return out


def _im2col(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    """(b, c, Hp, Wp) -> (b, Ho, Wo, c*k*k) patch matrix."""
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    b, c, ho, wo = win.shape[:4]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(b, ho, wo, c * k * k)


def _col2im_add(cols: np.ndarray, shape: tuple, k: int, stride: int) -> np.ndarray:
    """Adjoint of `_im2col`: scatter-add patch gradients into an array of `shape`."""
    b, c, hp, wp = shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    out = np.zeros(shape, dtype=cols.dtype)
    cols6 = cols.reshape(b, ho, wo, c, k, k).transpose(0, 3, 1, 2, 4, 5)
    for u in range(k):
        for v in range(k):
            out[:, :, u : u + ho * stride : stride, v : v + wo * stride : stride] += cols6[..., u, v]
    return out


class Layer:
    """Base class; subclasses fill `params` and `grads` with matching keys."""

    kind = "layer"

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    @property
    def out_channels(self) -> int | None:
        return None

    def init_params(self, rng: np.random.Generator) -> None:
        """Draw parameters; no-op for parameter-free layers."""

    def zero_grads(self) -> None:
        for key, val in self.params.items():
            self.grads[key] = np.zeros_like(val)

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        raise NotImplementedError


class Conv2d(Layer):
    """k x k convolution, stride s, replicate border padding of k//2.

    Weights (out, in, k, k) and biases (out,) are drawn from the fan-in scaled
    uniform distribution U(-sqrt(1/fan_in), sqrt(1/fan_in)), fan_in = in*k*k.
    Odd kernels only, so output size is exactly ceil(input/stride).
    """

    kind = "conv"

    def __init__(self, in_ch: int, out_ch: int, k: int, stride: int = 1, dtype=np.float32) -> None:
        super().__init__()
        if k % 2 != 1:
            raise ValueError(f"conv kernel must be odd, got {k}")
        if stride < 1:
            raise ValueError(f"conv stride must be >= 1, got {stride}")
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.k = k
        self.stride = stride
        self.dtype = np.dtype(dtype)
        self.params = {
            "w": np.zeros((out_ch, in_ch, k, k), dtype=self.dtype),
            "b": np.zeros(out_ch, dtype=self.dtype),
        }
        self.zero_grads()
        self._cols: np.ndarray | None = None
        self._x: np.ndarray | None = None
        self._xshape: tuple | None = None

    @property
    def out_channels(self) -> int:
        return self.out_ch

    def init_params(self, rng: np.random.Generator) -> None:
        fan_in = self.in_ch * self.k * self.k
        bound = np.sqrt(1.0 / fan_in)
        self.params["w"][...] = rng.uniform(-bound, bound, self.params["w"].shape)
        self.params["b"][...] = rng.uniform(-bound, bound, self.params["b"].shape)

    def _effective_w(self) -> np.ndarray:
        return self.params["w"]

    def _store_w_grad(self, gw: np.ndarray) -> None:
        self.grads["w"] += gw

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_ch:
            raise ValueError(f"{self.kind} expected {self.in_ch} channels, got {x.shape[1]}")
        self._xshape = x.shape
        if self.k == 1 and self.stride == 1:
            # 1x1 convolution is a plain channel mix; skip patch extraction.
            self._x = x
            self._cols = None
            out = np.tensordot(x, self._effective_w()[:, :, 0, 0], axes=(1, 1))
            out += self.params["b"]
            return out.transpose(0, 3, 1, 2)
        xp = pad_replicate(x, self.k // 2)
        cols = _im2col(xp, self.k, self.stride)
        self._cols = cols
        b, ho, wo, ckk = cols.shape
        w_mat = self._effective_w().reshape(self.out_ch, ckk)
        out = cols.reshape(-1, ckk) @ w_mat.T
        out += self.params["b"]
        return out.reshape(b, ho, wo, self.out_ch).transpose(0, 3, 1, 2)

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        if self._xshape is None:
            raise RuntimeError("backward called before forward")
        if self.k == 1 and self.stride == 1:
            gw = np.tensordot(g, self._x, axes=([0, 2, 3], [0, 2, 3]))[:, :, None, None]
            self._store_w_grad(gw)
            self.grads["b"] += g.sum(axis=(0, 2, 3))
            if not need_input_grad:
                return None
            gx = np.tensordot(g, self._effective_w()[:, :, 0, 0], axes=(1, 0))
            return np.ascontiguousarray(gx.transpose(0, 3, 1, 2))

        cols = self._cols
        b, ho, wo, ckk = cols.shape
        g_mat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, self.out_ch)
        gw = (g_mat.T @ cols.reshape(-1, ckk)).reshape(self.params["w"].shape)
        self._store_w_grad(gw)
        self.grads["b"] += g_mat.sum(axis=0)
        if not need_input_grad:
            return None
        pad = self.k // 2
        _, _, h, w = self._xshape
        if self.stride == 1:
            # Input gradient as one GEMM: the adjoint of stride-1 correlation
            # is a full convolution of g with the spatially flipped kernel.
            gz = np.pad(g, ((0, 0), (0, 0), (self.k - 1,) * 2, (self.k - 1,) * 2))
            gcols = _im2col(gz, self.k, 1)  # (b, h + 2*pad, w + 2*pad, cout*k*k)
            w_full = (
                self._effective_w()[:, :, ::-1, ::-1]
                .transpose(0, 2, 3, 1)
                .reshape(self.out_ch * self.k * self.k, self.in_ch)
            )
            gxp = (gcols.reshape(-1, w_full.shape[0]) @ w_full).reshape(b, h + 2 * pad, w + 2 * pad, self.in_ch)
            gxp = np.ascontiguousarray(gxp.transpose(0, 3, 1, 2))
        else:
            w_mat = self._effective_w().reshape(self.out_ch, ckk)
            gcols = (g_mat @ w_mat).reshape(b, ho, wo, ckk)
            gxp = _col2im_add(gcols, (b, self.in_ch, h + 2 * pad, w + 2 * pad), self.k, self.stride)
        return pad_replicate_adjoint(gxp, pad)


class TransposedConv2d(Conv2d):
    """Stride-1 decoder convolution applying the spatially flipped kernel.

    At stride 1 the transposed operator keeps the spatial size of its mirror
    convolution and reduces to a convolution with a 180-degree rotated kernel;
    this layer stores the kernel in decoder orientation and flips it on use, so
    encoder/decoder pairs stay structurally symmetric in checkpoints.  Border
    handling is the same replicate padding as `Conv2d`.
    """

    kind = "transposed_conv"

    def __init__(self, in_ch: int, out_ch: int, k: int, dtype=np.float32) -> None:
        super().__init__(in_ch, out_ch, k, stride=1, dtype=dtype)

    def _effective_w(self) -> np.ndarray:
        return self.params["w"][:, :, ::-1, ::-1]

    def _store_w_grad(self, gw: np.ndarray) -> None:
        self.grads["w"] += gw[:, :, ::-1, ::-1]


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2; ties route the gradient to the first argmax."""

    kind = "maxpool"

    def __init__(self) -> None:
        super().__init__()
        self._idx: np.ndarray | None = None
        self._xshape: tuple | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"maxpool needs even spatial dims, got {h}x{w}")
        patches = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
            b, c, h // 2, w // 2, 4
        )
        self._idx = patches.argmax(axis=-1)
        self._xshape = x.shape
        return np.take_along_axis(patches, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        if not need_input_grad:
            return None
        b, c, h, w = self._xshape
        flat = np.zeros((b, c, h // 2, w // 2, 4), dtype=g.dtype)
        np.put_along_axis(flat, self._idx[..., None], g[..., None], axis=-1)
        return flat.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)


class UpsampleNearest2x(Layer):
    """Nearest-neighbour 2x upsampling; adjoint sums each 2x2 output block."""

    kind = "upsample_nearest"

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        if not need_input_grad:
            return None
        b, c, h, w = g.shape
        return g.reshape(b, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


class PixelShuffle(Layer):
    """Rearrange (b, c*r*r, h, w) to (b, c, h*r, w*r).

    Output pixel (y, x) of channel c reads input channel c*r*r + (y%r)*r + (x%r)
    at (y//r, x//r): each group of r*r input channels tiles one output plane.
    """

    kind = "pixel_shuffle"

    def __init__(self, factor: int = 2) -> None:
        super().__init__()
        self.factor = factor

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, c, h, w = x.shape
        r = self.factor
        if c % (r * r):
            raise ValueError(f"pixel_shuffle input channels {c} not divisible by {r * r}")
        co = c // (r * r)
        return (
            x.reshape(b, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(b, co, h * r, w * r)
        )

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        if not need_input_grad:
            return None
        b, co, hr, wr = g.shape
        r = self.factor
        h, w = hr // r, wr // r
        return g.reshape(b, co, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(b, co * r * r, h, w)


class ReLU(Layer):
    kind = "relu"

    def __init__(self) -> None:
        super().__init__()
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        if not need_input_grad:
            return None
        return np.where(self._mask, g, 0)


class PReLU(Layer):
    """Per-channel parametric ReLU, negative slopes initialised to 0.25."""

    kind = "prelu"

    def __init__(self, channels: int, dtype=np.float32) -> None:
        super().__init__()
        self.channels = channels
        self.dtype = np.dtype(dtype)
        self.params = {"alpha": np.full(channels, 0.25, dtype=self.dtype)}
        self.zero_grads()
        self._x: np.ndarray | None = None

    def init_params(self, rng: np.random.Generator) -> None:
        self.params["alpha"][...] = 0.25

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        alpha = self.params["alpha"][None, :, None, None]
        return np.where(x > 0, x, alpha * x)

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        x = self._x
        neg = np.minimum(x, 0)
        self.grads["alpha"] += (g * neg).sum(axis=(0, 2, 3))
        if not need_input_grad:
            return None
        alpha = self.params["alpha"][None, :, None, None]
        return np.where(x > 0, g, alpha * g)


class AddSkip(Layer):
    """Elementwise addition of a stored earlier activation (wired by Network)."""

    kind = "add_skip"

    def __init__(self, source: int) -> None:
        super().__init__()
        self.source = source

    def forward(self, x: np.ndarray, skip: np.ndarray | None = None) -> np.ndarray:
        if skip is None:
            raise RuntimeError("add_skip requires the source activation")
        if x.shape != skip.shape:
            raise ValueError(f"skip shapes differ: {x.shape} vs {skip.shape}")
        return x + skip

    def backward(self, g: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        # Gradient passes unchanged to both addends; Network routes the copy.
        return g
