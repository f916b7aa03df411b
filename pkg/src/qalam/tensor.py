"""Dense n-dimensional arrays and the arithmetic the layer stack needs.

Tensors are plain ``numpy.ndarray`` values in row-major layout. Images are
``[height, width, channels]`` with a leading batch axis where present. There
is no broadcasting beyond tensor-scalar, and every operation here checks its
result for NaN/Inf: a non-finite value is an error state, not data.

Two precision modes exist: FAST (float32) for training and HIGH (float64)
for finite-difference gradient checks.
"""

from __future__ import annotations

import numpy as np

Tensor = np.ndarray

FAST = np.float32
HIGH = np.float64


class ShapeError(ValueError):
    """Raised when shapes are invalid or incompatible."""


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or Inf."""


def check_shape(dims) -> tuple[int, ...]:
    """Validate a shape: a nonempty sequence of positive integers."""
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise ShapeError("shape must have at least one dimension")
    for d in dims:
        if d < 1:
            raise ShapeError(f"dimension must be >= 1, got {d} in {dims}")
    return dims


def _finite(a: Tensor) -> Tensor:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("operation produced NaN or Inf")
    return a


def zeros(shape, dtype=FAST) -> Tensor:
    return np.zeros(check_shape(shape), dtype=dtype)


def full(shape, value: float, dtype=FAST) -> Tensor:
    return _finite(np.full(check_shape(shape), value, dtype=dtype))


def _binary(a: Tensor, b, op) -> Tensor:
    if isinstance(b, np.ndarray):
        if a.shape != b.shape:
            raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    elif not np.isscalar(b):
        raise TypeError(f"expected tensor or scalar, got {type(b).__name__}")
    with np.errstate(over="ignore", invalid="ignore"):
        return _finite(op(a, b))


def add(a: Tensor, b) -> Tensor:
    return _binary(a, b, np.add)


def sub(a: Tensor, b) -> Tensor:
    return _binary(a, b, np.subtract)


def mul(a: Tensor, b) -> Tensor:
    return _binary(a, b, np.multiply)


def scale(a: Tensor, s: float) -> Tensor:
    if not np.isscalar(s):
        raise TypeError("scale takes a scalar factor")
    return _finite(np.multiply(a, s))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard matrix product of two rank-2 tensors."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 tensors, got {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dims differ: {a.shape} x {b.shape}")
    return _finite(a @ b)


def transpose2d(a: Tensor) -> Tensor:
    """out[j][i] = in[i][j]; used for the AHCD orientation fix."""
    if a.ndim != 2:
        raise ShapeError(f"transpose2d needs a rank-2 tensor, got rank {a.ndim}")
    return np.ascontiguousarray(a.T)


def reshape(a: Tensor, new_shape) -> Tensor:
    """Same data, new shape; row-major element sequence preserved."""
    new_shape = check_shape(new_shape)
    if a.size != int(np.prod(new_shape)):
        raise ShapeError(f"element count mismatch: {a.size} -> {new_shape}")
    return np.reshape(a, new_shape)


def flatten(a: Tensor) -> Tensor:
    return reshape(a, (a.size,))
