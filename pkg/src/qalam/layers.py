"""Neural layers: forward passes plus analytic parameter and input gradients.

Activations are NHWC (``[batch, height, width, channels]``) for the
convolutional part of the stack and ``[batch, features]`` after flattening.
Each layer caches whatever its backward pass needs during forward; backward
returns the input gradient and stores parameter gradients in ``self.grads``.

Convolution runs as im2col + one matrix multiply, which is where essentially
all the training time goes, so that path stays allocation-light: the padded
input is cached and the column matrix is rebuilt on demand in backward.
"""

from __future__ import annotations

import numpy as np


class BackwardStateError(RuntimeError):
    """Backward called without a matching train-mode forward."""


def he_uniform_init(fan_in: int, shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """i.i.d. uniform on [-sqrt(6/fan_in), +sqrt(6/fan_in)]."""
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    """Base layer. ``params`` lists learnable tensors, ``state`` persistent
    non-learned tensors (batchnorm running statistics)."""

    params: tuple[str, ...] = ()
    state: tuple[str, ...] = ()

    def __init__(self):
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _im2col(x_padded: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """[b, H, W, c] (padded) -> [b*oh*ow, kh*kw*c] patch matrix, stride 1."""
    windows = np.lib.stride_tricks.sliding_window_view(x_padded, (kh, kw), axis=(1, 2))
    # windows: [b, oh, ow, c, kh, kw] -> [b, oh, ow, kh, kw, c]
    b, oh, ow = windows.shape[:3]
    cols = windows.transpose(0, 1, 2, 4, 5, 3)
    return np.ascontiguousarray(cols).reshape(b * oh * ow, -1)


class Conv2D(Layer):
    """3x3 (by default) cross-correlation, zero same-padding, stride 1.

    Kernels are [kh, kw, c_in, c_out]; output spatial size equals input
    spatial size. Even kernels pad (k-1)//2 before and k//2 after.
    """

    params = ("kernels", "bias")

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        if rng is None:
            rng = np.random.default_rng()
        self.kernel = kernel
        self.in_channels = in_channels
        self.out_channels = out_channels
        fan_in = kernel * kernel * in_channels
        self.kernels = he_uniform_init(fan_in, (kernel, kernel, in_channels, out_channels), rng, dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self._x_padded = None

    def _pad(self, x):
        k = self.kernel
        before, after = (k - 1) // 2, k // 2
        return np.pad(x, ((0, 0), (before, after), (before, after), (0, 0)))

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ValueError(f"expected [b,h,w,{self.in_channels}], got {x.shape}")
        b, h, w, _ = x.shape
        self._x_padded = self._pad(x)
        self._in_shape = x.shape
        cols = _im2col(self._x_padded, self.kernel, self.kernel)
        w_mat = self.kernels.reshape(-1, self.out_channels)
        out = cols @ w_mat + self.bias
        return out.reshape(b, h, w, self.out_channels)

    def backward(self, grad_out):
        if self._x_padded is None:
            raise BackwardStateError("conv backward needs a cached forward input")
        b, h, w, _ = self._in_shape
        if grad_out.shape != (b, h, w, self.out_channels):
            raise ValueError(f"grad_out shape {grad_out.shape} does not match forward output")
        k = self.kernel
        g = grad_out.reshape(-1, self.out_channels)

        cols = _im2col(self._x_padded, k, k)
        self.grads["bias"] = g.sum(axis=0)
        self.grads["kernels"] = (cols.T @ g).reshape(self.kernels.shape)

        # input gradient: columns gradient scattered back through the padding
        grad_cols = (g @ self.kernels.reshape(-1, self.out_channels).T)
        grad_cols = grad_cols.reshape(b, h, w, k, k, self.in_channels)
        grad_padded = np.zeros_like(self._x_padded)
        for i in range(k):
            for j in range(k):
                grad_padded[:, i:i + h, j:j + w, :] += grad_cols[:, :, :, i, j, :]
        before = (k - 1) // 2
        return grad_padded[:, before:before + h, before:before + w, :]


class MaxPool2(Layer):
    """2x2 max pooling, stride 2. Odd trailing rows/columns are dropped."""

    def __init__(self):
        super().__init__()
        self._arg = None

    def forward(self, x, training=False):
        b, h, w, c = x.shape
        oh, ow = h // 2, w // 2
        self._in_shape = x.shape
        cropped = x[:, :oh * 2, :ow * 2, :]
        r = cropped.reshape(b, oh, 2, ow, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(b, oh, ow, c, 4)
        self._arg = r.argmax(axis=4)
        return r.max(axis=4)

    def backward(self, grad_out):
        if self._arg is None:
            raise BackwardStateError("maxpool backward needs a cached forward")
        b, h, w, c = self._in_shape
        oh, ow = h // 2, w // 2
        scattered = np.zeros((b, oh, ow, c, 4), dtype=grad_out.dtype)
        np.put_along_axis(scattered, self._arg[..., None], grad_out[..., None], axis=4)
        grad = scattered.reshape(b, oh, ow, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        grad = grad.reshape(b, oh * 2, ow * 2, c)
        if (h, w) != (oh * 2, ow * 2):
            padded = np.zeros(self._in_shape, dtype=grad_out.dtype)
            padded[:, :oh * 2, :ow * 2, :] = grad
            return padded
        return grad


class BatchNorm(Layer):
    """Per-channel batch normalization over all non-channel axes.

    Training mode normalizes with batch statistics and updates the running
    estimates; inference mode uses the running estimates only.
    """

    params = ("gamma", "beta")
    state = ("running_mean", "running_var")

    def __init__(self, channels: int, momentum: float = 0.99, epsilon: float = 1e-3, dtype=np.float32):
        super().__init__()
        if not 0.0 < momentum < 1.0:
            raise ValueError(f"momentum must be in (0,1), got {momentum}")
        self.channels = channels
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def forward(self, x, training=False):
        if x.shape[-1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[-1]}")
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            inv_std = 1.0 / np.sqrt(var + self.epsilon)
            xhat = (x - mean) * inv_std
            self._cache = (xhat, inv_std, axes)
            m = self.momentum
            self.running_mean = (m * self.running_mean + (1 - m) * mean).astype(self.running_mean.dtype)
            self.running_var = (m * self.running_var + (1 - m) * var).astype(self.running_var.dtype)
        else:
            self._cache = None
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.epsilon)
        return self.gamma * xhat + self.beta

    def backward(self, grad_out):
        if self._cache is None:
            raise BackwardStateError("batchnorm backward only after a train-mode forward")
        xhat, inv_std, axes = self._cache
        n = grad_out.size // self.channels
        self.grads["gamma"] = (grad_out * xhat).sum(axis=axes)
        self.grads["beta"] = grad_out.sum(axis=axes)
        dxhat = grad_out * self.gamma
        dx = (inv_std / n) * (
            n * dxhat
            - dxhat.sum(axis=axes)
            - xhat * (dxhat * xhat).sum(axis=axes)
        )
        return dx


class Dense(Layer):
    """Fully connected layer: out = x @ W + b."""

    params = ("weights", "bias")

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        super().__init__()
        if rng is None:
            rng = np.random.default_rng()
        self.in_features = in_features
        self.out_features = out_features
        self.weights = he_uniform_init(in_features, (in_features, out_features), rng, dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self._x = None

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(f"expected [b,{self.in_features}], got {x.shape}")
        self._x = x
        return x @ self.weights + self.bias

    def backward(self, grad_out):
        if self._x is None:
            raise BackwardStateError("dense backward needs a cached forward input")
        self.grads["weights"] = self._x.T @ grad_out
        self.grads["bias"] = grad_out.sum(axis=0)
        return grad_out @ self.weights.T


class LeakyReLU(Layer):
    """f(x) = x for x >= 0, slope*x otherwise."""

    def __init__(self, slope: float = 0.3):
        super().__init__()
        self.slope = slope
        self._factor = None

    def forward(self, x, training=False):
        self._factor = np.where(x >= 0, 1.0, self.slope).astype(x.dtype)
        return x * self._factor

    def backward(self, grad_out):
        if self._factor is None:
            raise BackwardStateError("leakyrelu backward needs a cached forward")
        return grad_out * self._factor


class Dropout(Layer):
    """Inverted dropout: train mode zeroes with probability ``rate`` and
    scales survivors by 1/(1-rate); inference mode is the identity."""

    def __init__(self, rate: float = 0.3, rng: np.random.Generator | None = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"rate must be in [0,1), got {rate}")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng()
        self._mask = None

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) >= self.rate).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            raise BackwardStateError("dropout backward only after a train-mode forward")
        return grad_out * self._mask


class Flatten(Layer):
    """[b, h, w, c] -> [b, h*w*c], row-major."""

    def __init__(self):
        super().__init__()
        self._in_shape = None

    def forward(self, x, training=False):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        if self._in_shape is None:
            raise BackwardStateError("flatten backward needs a cached forward")
        return grad_out.reshape(self._in_shape)
