"""Dense H x W x C tensors, quality metrics, and noise.

Tensors are plain numpy arrays of shape (height, width, channels), float32,
C-contiguous, so the flat index of entry (h, w, c) is (h*W + w)*C + c.
Reductions (MSE, inner products) accumulate in float64.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ShapeError
from .rng import Rng

DTYPE = np.float32


def as_tensor3(data, name: str = "tensor") -> np.ndarray:
    """Validate and return `data` as an (H, W, C) float32 tensor.

    Raises ShapeError unless data is 3-D with positive dims, and DomainError
    if any entry is NaN or infinite.
    """
    arr = np.ascontiguousarray(data, dtype=DTYPE)
    if arr.ndim != 3:
        raise ShapeError(f"{name} must be 3-D (H, W, C), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeError(f"{name} dims must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def tensor3(height: int, width: int, channels: int, flat) -> np.ndarray:
    """Build a tensor from flat row-major channel-last scalars."""
    arr = np.asarray(flat, dtype=DTYPE).reshape(height, width, channels)
    return as_tensor3(arr)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Mean squared error, accumulated in float64."""
    _check_same_shape(reference, candidate)
    diff = reference.astype(np.float64) - candidate.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB, peak fixed at 255.

    Returns math.inf when the two tensors are identical (zero MSE).
    """
    err = mse(reference, candidate)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / err)


def add_awgn(x: np.ndarray, sigma: float, rng: Rng) -> np.ndarray:
    """x plus i.i.d. Gaussian noise of standard deviation sigma.

    Deterministic given the rng state; the input is not modified.
    """
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    noise = rng.normal(x.size).reshape(x.shape)
    return (x.astype(np.float64) + sigma * noise).astype(DTYPE)


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of elementwise products in float64, fixed row-major order."""
    _check_same_shape(a, b)
    return float(np.sum(a.astype(np.float64) * b.astype(np.float64)))
