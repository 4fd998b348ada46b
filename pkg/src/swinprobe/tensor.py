"""Dense float32 tensor kernels shared by every other module.

Tensors are plain numpy ndarrays: 32-bit floats, C-contiguous, row-major.
Reductions (matmul, normalization statistics, softmax denominators)
accumulate in float64 and round to float32 once on the way out, so repeated
runs are bit-identical and downstream finite-difference checks stay clean.

All functions are pure; none mutates its inputs.
"""

import numpy as np
from scipy.special import erf

__all__ = ["as_tensor", "matmul", "softmax_rows", "layer_norm", "gelu"]

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def as_tensor(values, name: str = "tensor") -> np.ndarray:
    """Coerce ``values`` to a C-contiguous float32 array with positive extents."""
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if any(extent < 1 for extent in arr.shape):
        raise ValueError(f"{name} has zero-sized extent: shape {arr.shape}")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of ``a`` [m, k] and ``b`` [k, n] with float64 accumulation.

    Raises ``ValueError`` reporting both shapes when the inner extents differ.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = np.matmul(a.astype(np.float64), b.astype(np.float64))
    return out.astype(np.float32)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-d array, stabilised by per-row max subtraction."""
    if x.ndim != 2:
        raise ValueError(f"softmax_rows expects a 2-d array, got shape {x.shape}")
    if np.isnan(x).any():
        raise ValueError("softmax_rows rejects NaN input")
    shifted = x.astype(np.float64) - np.max(x, axis=1, keepdims=True)
    num = np.exp(shifted)
    return (num / num.sum(axis=1, keepdims=True)).astype(np.float32)


def layer_norm(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float = 1e-5,
) -> np.ndarray:
    """Normalize the trailing axis to zero mean / unit variance, then affine.

    ``gamma`` and ``beta`` must be 1-d of length ``x.shape[-1]``; variance is
    the biased (1/C) estimate, computed in float64.
    """
    c = x.shape[-1]
    gamma = np.asarray(gamma)
    beta = np.asarray(beta)
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(
            f"layer_norm affine shape mismatch: x trailing extent {c}, "
            f"gamma {gamma.shape}, beta {beta.shape}"
        )
    x64 = x.astype(np.float64)
    mean = x64.mean(axis=-1, keepdims=True)
    var = np.square(x64 - mean).mean(axis=-1, keepdims=True)
    normed = (x64 - mean) / np.sqrt(var + eps)
    return (normed * gamma.astype(np.float64) + beta.astype(np.float64)).astype(
        np.float32
    )


def gelu(x: np.ndarray) -> np.ndarray:
    """Elementwise Gaussian-error linear unit, exact erf form."""
    x64 = np.asarray(x, dtype=np.float64)
    return (0.5 * x64 * (1.0 + erf(x64 * _INV_SQRT2))).astype(np.float32)
